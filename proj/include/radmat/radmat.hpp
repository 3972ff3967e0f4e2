#pragma once

#include "radmat/app.hpp"
#include "radmat/core.hpp"
#include "radmat/dsp.hpp"
#include "radmat/em.hpp"
#include "radmat/fft.hpp"
#include "radmat/io.hpp"
#include "radmat/llm_client.hpp"
#include "radmat/rag.hpp"
#include "radmat/reasoner.hpp"
#include "radmat/scenario.hpp"
#include "radmat/sim.hpp"
