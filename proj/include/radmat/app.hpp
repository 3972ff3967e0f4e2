#pragma once

// Command implementations behind the radmat CLI. Each returns a process exit
// status; human-readable output goes to `out`, diagnostics to `err`.

#include <cstdio>
#include <filesystem>
#include <future>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "radmat/dsp.hpp"
#include "radmat/em.hpp"
#include "radmat/io.hpp"
#include "radmat/llm_client.hpp"
#include "radmat/rag.hpp"
#include "radmat/reasoner.hpp"
#include "radmat/scenario.hpp"
#include "radmat/sim.hpp"

namespace radmat {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

struct AppContext {
    std::optional<std::string> config_path;
    std::optional<std::uint64_t> seed;
    bool verbose = false;
    std::ostream* out = &std::cout;
    std::ostream* err = &std::cerr;

    RadarConfig config() const { return config_path ? load_config(*config_path) : RadarConfig{}; }
    void note(const std::string& msg) const {
        if (verbose) *err << msg << "\n";
    }
};

namespace detail {

template <class F>
int guarded(const AppContext& ctx, F&& body) {
    try {
        return body();
    } catch (const Error& e) {
        *ctx.err << "radmat: " << e.what() << "\n";
        return kExitFailure;
    } catch (const std::exception& e) {
        *ctx.err << "radmat: " << e.what() << "\n";
        return kExitFailure;
    }
}

/// A capture carries its own config; an explicit --config must agree with it.
inline void check_capture_config(const AppContext& ctx, const RadarCube& cube) {
    if (ctx.config_path && ctx.config() != cube.config())
        throw Error(ErrorKind::InvalidConfig, "capture header does not match --config '" + *ctx.config_path + "'");
}

inline void write_or_print(const AppContext& ctx, const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") *ctx.out << text;
    else write_text_file(path, text);
}

inline std::string fixed(double v, int prec) {
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(prec) << v;
    auto s = ss.str();
    if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
    return s;
}

inline std::string sci(double v) {
    std::ostringstream ss;
    ss << std::scientific << std::setprecision(3) << v;
    return ss.str();
}

inline std::string pad(std::string s, std::size_t w) {
    if (s.size() < w) s.append(w - s.size(), ' ');
    return s;
}

} // namespace detail

// --- simulate ------------------------------------------------------------------

inline int cmd_simulate(const AppContext& ctx, const std::string& scenario_path, const std::string& out_capture) {
    return detail::guarded(ctx, [&] {
        const auto cfg = ctx.config();
        auto sc = parse_scenario(read_text_file(scenario_path), cfg);
        if (ctx.seed) sc.seed = *ctx.seed;
        const auto noise = sc.noise(cfg);
        const auto cube = synthesize_cube(cfg, sc.targets, noise);
        save_capture(out_capture, cube);

        auto& o = *ctx.out;
        o << detail::pad("label", 20) << detail::pad("range_m", 10) << detail::pad("vel_mps", 10)
          << detail::pad("angle_deg", 11) << detail::pad("rcs_m2", 12) << "snr_db\n";
        for (const auto& t : sc.targets) {
            const double snr = noise.noise_power > 0.0 ? received_power(cfg, t.range_m, t.rcs_m2) / noise.noise_power : 0.0;
            o << detail::pad(t.label, 20) << detail::pad(detail::fixed(t.range_m, 3), 10)
              << detail::pad(detail::fixed(t.velocity_mps, 3), 10)
              << detail::pad(detail::fixed(deg_from_rad(t.angle_rad), 2), 11) << detail::pad(detail::sci(t.rcs_m2), 12)
              << (snr > 0.0 ? detail::fixed(db_from_linear(snr), 2) : std::string("inf")) << "\n";
        }
        ctx.note("wrote " + out_capture + " (" + std::to_string(kCaptureHeaderBytes + capture_payload_bytes(cfg)) +
                 " bytes, seed " + std::to_string(noise.rng_seed) + ")");
        return kExitOk;
    });
}

// --- calibrate -------------------------------------------------------------------

inline Calibration calibrate_from_cube(const RadarCube& cube, double sphere_diameter_m) {
    const auto dets = locate_targets(cube);
    if (dets.empty()) throw Error(ErrorKind::CalibrationAmbiguity, "no target detected in the sphere capture");
    if (dets.size() > 1)
        throw Error(ErrorKind::CalibrationAmbiguity,
                    std::to_string(dets.size()) + " targets detected; the sphere capture must contain exactly one");
    return calibrate(dets.front(), sphere_diameter_m, cube.config());
}

inline int cmd_calibrate(const AppContext& ctx, const std::string& capture_path, double sphere_diameter_m,
                         const std::string& out_cal) {
    return detail::guarded(ctx, [&] {
        const auto cube = load_capture(capture_path);
        detail::check_capture_config(ctx, cube);
        const auto cal = calibrate_from_cube(cube, sphere_diameter_m);
        write_text_file(out_cal, to_record(cal).to_string());
        *ctx.out << "K = " << format_double(cal.k()) << "\n"
                 << "rho_ref = " << format_double(cal.rho_ref()) << "\n"
                 << "sigma_c = " << format_double(sphere_rcs(sphere_diameter_m, wavelength(cube.config())).sigma_m2)
                 << " m2\n";
        ctx.note(cal.source());
        return kExitOk;
    });
}

// --- process -----------------------------------------------------------------------

struct ProcessOptions {
    bool all_targets = false;
    std::string export_rd; // optional RMM1 matrix paths
    std::string export_ra;
};

inline int cmd_process(const AppContext& ctx, const std::string& capture_path, const std::string& cal_path,
                       const std::string& out_params, const ProcessOptions& opt = {}) {
    return detail::guarded(ctx, [&] {
        const auto cube = load_capture(capture_path);
        detail::check_capture_config(ctx, cube);
        const auto cal = load_calibration(cal_path);
        const auto res = run_pipeline(cube);
        if (!opt.export_rd.empty()) save_matrix(opt.export_rd, res.rd.n_range, res.rd.n_doppler, res.rd.power);
        if (!opt.export_ra.empty()) {
            if (!res.ra) throw Error(ErrorKind::Unsupported, "range-angle map needs at least two channels");
            save_matrix(opt.export_ra, res.ra->n_range, res.ra->n_angle, res.ra->power);
        }
        if (res.detections.empty()) throw Error(ErrorKind::NoTarget, "no target detected");
        ctx.note(std::to_string(res.detections.size()) + " detection(s), noise floor " +
                 format_double(res.rd.noise_floor));

        std::string text;
        const std::size_t n = opt.all_targets ? res.detections.size() : 1;
        for (std::size_t i = 0; i < n; ++i) {
            const auto p = estimate_em_parameters(res.detections[i], cal, cube.config());
            if (p.high_permittivity_warning)
                *ctx.err << "radmat: warning: gamma_f " << format_double(p.gamma_f)
                         << " is close to 1; epsilon_r is poorly conditioned\n";
            if (i > 0) text += "\n";
            text += to_record(p).to_string();
        }
        detail::write_or_print(ctx, out_params, text);
        return kExitOk;
    });
}

// --- index ---------------------------------------------------------------------------

inline int cmd_index(const AppContext& ctx, const std::string& docs_dir, const std::string& out_index,
                     const ChunkOptions& chunking = {}) {
    return detail::guarded(ctx, [&] {
        HashedBowEmbedder embedder;
        KnowledgeIndex index(embedder);
        const auto rep = ingest_directory(index, docs_dir, embedder, chunking);
        if (index.size() == 0) throw Error(ErrorKind::EmptyIndex, "no indexable documents in '" + docs_dir + "'");
        index.save(out_index);
        for (const auto& [doc, n] : rep.chunks_per_document) *ctx.out << detail::pad(doc, 40) << n << " chunks\n";
        *ctx.out << "total " << index.size() << " chunks, embedder " << embedder.id() << "\n";
        return kExitOk;
    });
}

// --- identify --------------------------------------------------------------------------

struct IdentifyCommandOptions {
    IdentifyOptions identify;
    std::string index_path;
    EndpointConfig endpoint;
    std::string out_path; // "-" or empty: stdout
};

inline int cmd_identify(const AppContext& ctx, const std::string& params_path, const IdentifyCommandOptions& opt) {
    return detail::guarded(ctx, [&] {
        const auto all = parse_em_parameters(read_text_file(params_path));
        if (all.empty()) throw Error(ErrorKind::Format, "no parameter records in '" + params_path + "'");

        HashedBowEmbedder embedder;
        std::optional<KnowledgeIndex> index;
        std::unique_ptr<ChatClient> client;
        if (opt.identify.use_llm) {
            if (opt.identify.with_rag) {
                if (opt.index_path.empty())
                    throw Error(ErrorKind::InvalidInput, "retrieval needs --index (or pass --no-rag)");
                if (!std::filesystem::exists(opt.index_path))
                    throw Error(ErrorKind::Io, "index file '" + opt.index_path + "' not found");
                index = KnowledgeIndex::load(opt.index_path);
            }
            client = make_chat_client(opt.endpoint, opt.identify.rules);
        }

        std::string text;
        for (std::size_t i = 0; i < all.size(); ++i) {
            const auto v = identify(all[i], index ? &*index : nullptr, embedder, client.get(), opt.identify);
            if (i > 0) text += "\n";
            text += to_record(v).to_string();
        }
        detail::write_or_print(ctx, opt.out_path, text);
        return kExitOk;
    });
}

// --- report ----------------------------------------------------------------------------

struct ReportRow {
    SuiteObject object;
    EMParameters params;
    std::vector<MaterialVerdict> verdicts; // one per mode, same order as RunReport::modes
};

struct ModeSummary {
    VerdictMode mode = VerdictMode::RuleBased;
    std::size_t correct = 0;
    std::size_t total = 0;
    double accuracy = 0.0;
};

struct RunReport {
    std::vector<VerdictMode> modes;
    std::vector<ReportRow> rows;
    std::vector<ModeSummary> summary;
    double k = 0.0;
    double rho_ref = 0.0;
    std::string endpoint;
};

struct ReportOptions {
    std::vector<VerdictMode> modes{VerdictMode::RuleBased, VerdictMode::LlmOnly, VerdictMode::LlmRag};
    ChatClient* client = nullptr;         // required for LLM modes
    const KnowledgeIndex* index = nullptr; // required for llm+rag
    const Embedder* embedder = nullptr;
    std::size_t k = 4;
    RuleTable rules;
    std::string endpoint_label;
    std::optional<std::uint64_t> seed_offset;
};

/// Simulated measurement of one suite object, ready for identification.
inline EMParameters measure_object(const SuiteObject& o, const Calibration& cal, double rho_ref, const RadarConfig& cfg,
                                   std::uint64_t seed) {
    const auto target = object_target(o, rho_ref, cfg);
    const auto cube = synthesize_cube(cfg, {target}, thermal_noise(cfg, seed));
    const auto dets = locate_targets(cube);
    if (dets.empty()) throw Error(ErrorKind::NoTarget, "object '" + o.label + "': no target detected");
    return estimate_em_parameters(dets.front(), cal, cfg);
}

inline RunReport run_report(const Suite& suite, const RadarConfig& cfg, const ReportOptions& opt) {
    for (auto m : opt.modes) {
        if (m != VerdictMode::RuleBased && !opt.client)
            throw Error(ErrorKind::InvalidInput, std::string(to_string(m)) + " mode needs a model endpoint");
        if (m == VerdictMode::LlmRag && !opt.index)
            throw Error(ErrorKind::InvalidInput, "llm+rag mode needs a knowledge index");
    }
    const std::uint64_t offset = opt.seed_offset.value_or(0);
    const auto sphere = calibration_target(suite, cfg);
    const auto cal_cube = synthesize_cube(cfg, {sphere}, thermal_noise(cfg, suite.calibration_seed + offset));
    const auto cal = calibrate_from_cube(cal_cube, suite.sphere_diameter_m);
    const double rho_ref = reference_reflectivity(suite, cfg);

    HashedBowEmbedder default_embedder;
    const Embedder& embedder = opt.embedder ? *opt.embedder : default_embedder;

    RunReport rep;
    rep.modes = opt.modes;
    rep.k = cal.k();
    rep.rho_ref = cal.rho_ref();
    rep.endpoint = opt.endpoint_label;

    // Measurements are independent; results keep suite order.
    std::vector<std::future<EMParameters>> jobs;
    for (const auto& o : suite.objects)
        jobs.push_back(std::async(std::launch::async, [&, o] { return measure_object(o, cal, rho_ref, cfg, o.seed + offset); }));

    for (std::size_t i = 0; i < suite.objects.size(); ++i) {
        ReportRow row{suite.objects[i], jobs[i].get(), {}};
        for (auto m : opt.modes) {
            IdentifyOptions io;
            io.use_llm = m != VerdictMode::RuleBased;
            io.with_rag = m == VerdictMode::LlmRag;
            io.k = opt.k;
            io.rules = opt.rules;
            row.verdicts.push_back(identify(row.params, opt.index, embedder, opt.client, io));
        }
        rep.rows.push_back(std::move(row));
    }

    for (std::size_t j = 0; j < opt.modes.size(); ++j) {
        ModeSummary s;
        s.mode = opt.modes[j];
        s.total = rep.rows.size();
        for (const auto& r : rep.rows) s.correct += r.verdicts[j].canonical_class == r.object.material ? 1 : 0;
        s.accuracy = static_cast<double>(s.correct) / static_cast<double>(s.total);
        rep.summary.push_back(s);
    }
    return rep;
}

inline std::string format_report_table(const RunReport& rep) {
    using detail::fixed;
    using detail::pad;
    using detail::sci;
    std::ostringstream o;
    o << pad("object", 14) << pad("truth", 9) << pad("R_m", 7) << pad("V_mps", 7) << pad("ang_deg", 8)
      << pad("snr_db", 8) << pad("rcs_m2", 12) << pad("rho", 10) << pad("gamma_f", 9) << pad("eps_r", 8);
    for (auto m : rep.modes) o << pad(std::string(to_string(m)), 12);
    o << "\n";
    for (const auto& r : rep.rows) {
        const auto& p = r.params;
        o << pad(r.object.label, 14) << pad(std::string(to_string(r.object.material)), 9)
          << pad(fixed(p.detection.range_m, 3), 7) << pad(fixed(p.detection.velocity_mps, 2), 7)
          << pad(fixed(deg_from_rad(p.detection.angle_rad), 2), 8) << pad(fixed(db_from_linear(p.detection.snr_linear), 2), 8)
          << pad(sci(p.rcs_m2), 12) << pad(fixed(p.rho, 4), 10)
          << pad(fixed(p.gamma_f, 4), 9) << pad(std::isinf(p.epsilon_r) ? std::string("inf") : fixed(p.epsilon_r, 3), 8);
        for (const auto& v : r.verdicts) {
            const bool ok = v.canonical_class == r.object.material;
            o << pad(std::string(to_string(v.canonical_class)) + (ok ? "" : "(x)"), 12);
        }
        o << "\n";
    }
    return o.str();
}

/// Objects x modes with ok/x marks, plus per-mode accuracy. Rule-based rows are
/// left out.
inline std::string format_ablation_table(const RunReport& rep) {
    using detail::pad;
    std::ostringstream o;
    o << pad("mode", 12);
    for (const auto& r : rep.rows) o << pad(r.object.label, std::max<std::size_t>(r.object.label.size() + 2, 6));
    o << pad("correct", 9) << "accuracy\n";
    for (std::size_t j = 0; j < rep.modes.size(); ++j) {
        if (rep.modes[j] == VerdictMode::RuleBased) continue;
        o << pad(std::string(to_string(rep.modes[j])), 12);
        for (const auto& r : rep.rows)
            o << pad(r.verdicts[j].canonical_class == r.object.material ? "ok" : "x",
                     std::max<std::size_t>(r.object.label.size() + 2, 6));
        const auto& s = rep.summary[j];
        o << pad(std::to_string(s.correct) + "/" + std::to_string(s.total), 9) << format_double(s.accuracy) << "\n";
    }
    return o.str();
}

inline std::string report_records(const RunReport& rep) {
    std::string out;
    KvRecord head("run");
    head.set("objects", std::to_string(rep.rows.size()));
    std::string modes;
    for (auto m : rep.modes) modes += (modes.empty() ? "" : ",") + std::string(to_string(m));
    head.set("modes", modes);
    head.set("K", rep.k);
    head.set("rho_ref", rep.rho_ref);
    head.set("endpoint", rep.endpoint.empty() ? std::string("none") : rep.endpoint);
    out += head.to_string() + "\n";
    for (const auto& r : rep.rows) {
        KvRecord rec = to_record(r.params);
        rec.set_tag("object");
        rec.set("label", r.object.label);
        rec.set("truth", std::string(to_string(r.object.material)));
        for (std::size_t j = 0; j < rep.modes.size(); ++j)
            rec.set("verdict_" + std::string(to_string(rep.modes[j])),
                    std::string(to_string(r.verdicts[j].canonical_class)));
        out += rec.to_string() + "\n";
    }
    for (const auto& s : rep.summary) {
        KvRecord rec("summary");
        rec.set("mode", std::string(to_string(s.mode)));
        rec.set("correct", std::to_string(s.correct));
        rec.set("total", std::to_string(s.total));
        rec.set("accuracy", s.accuracy);
        out += rec.to_string() + "\n";
    }
    return out;
}

struct ReportCommandOptions {
    std::vector<VerdictMode> modes{VerdictMode::RuleBased, VerdictMode::LlmOnly, VerdictMode::LlmRag};
    EndpointConfig endpoint;     // empty base_url: the rule stub
    std::string index_path;      // prebuilt index, or
    std::string knowledge_dir;   // documents indexed on the fly
    std::string record_path;     // machine-readable output
    std::size_t k = 4;
};

inline int cmd_report(const AppContext& ctx, const std::string& suite_path, const std::string& out_report,
                      const ReportCommandOptions& opt) {
    return detail::guarded(ctx, [&] {
        const auto cfg = ctx.config();
        const auto suite = load_suite(suite_path);

        bool need_llm = false, need_rag = false;
        for (auto m : opt.modes) {
            need_llm = need_llm || m != VerdictMode::RuleBased;
            need_rag = need_rag || m == VerdictMode::LlmRag;
        }
        EndpointConfig ep = opt.endpoint;
        if (!ep.configured()) ep.base_url = std::string(kStubEndpoint);
        std::unique_ptr<ChatClient> client;
        if (need_llm) client = make_chat_client(ep);

        HashedBowEmbedder embedder;
        std::optional<KnowledgeIndex> index;
        if (need_rag) {
            if (!opt.index_path.empty()) {
                index = KnowledgeIndex::load(opt.index_path);
            } else if (!opt.knowledge_dir.empty()) {
                index.emplace(embedder);
                ingest_directory(*index, opt.knowledge_dir, embedder);
            } else {
                throw Error(ErrorKind::InvalidInput, "llm+rag mode needs --index or --knowledge");
            }
        }

        ReportOptions ro;
        ro.modes = opt.modes;
        ro.client = client.get();
        ro.index = index ? &*index : nullptr;
        ro.embedder = &embedder;
        ro.k = opt.k;
        ro.endpoint_label = need_llm ? ep.base_url + (ep.base_url == kStubEndpoint ? "" : " (" + ep.model + ")") : "";
        ro.seed_offset = ctx.seed;
        const auto rep = run_report(suite, cfg, ro);

        std::string text = format_report_table(rep) + "\n" + format_ablation_table(rep) + "\n";
        for (const auto& s : rep.summary)
            text += "accuracy " + detail::pad(std::string(to_string(s.mode)), 12) + std::to_string(s.correct) + "/" +
                    std::to_string(s.total) + " = " + format_double(s.accuracy) + "\n";
        *ctx.out << text;
        if (!out_report.empty() && out_report != "-") write_text_file(out_report, text);
        if (!opt.record_path.empty()) write_text_file(opt.record_path, report_records(rep));
        return kExitOk;
    });
}

} // namespace radmat
