#pragma once

// Material verdicts: prompt assembly, response parsing, the rule table used
// offline, and the identify() orchestration.

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "radmat/em.hpp"
#include "radmat/kv.hpp"
#include "radmat/rag.hpp"

namespace radmat {

enum class MaterialClass { Metal, Ceramic, Glass, Plastic, Other, Unknown };

inline std::string_view to_string(MaterialClass c) {
    switch (c) {
    case MaterialClass::Metal: return "metal";
    case MaterialClass::Ceramic: return "ceramic";
    case MaterialClass::Glass: return "glass";
    case MaterialClass::Plastic: return "plastic";
    case MaterialClass::Other: return "other";
    case MaterialClass::Unknown: return "unknown";
    }
    return "unknown";
}

inline std::optional<MaterialClass> material_class_from_string(std::string_view s) {
    for (auto c : {MaterialClass::Metal, MaterialClass::Ceramic, MaterialClass::Glass, MaterialClass::Plastic,
                   MaterialClass::Other, MaterialClass::Unknown})
        if (to_string(c) == s) return c;
    return std::nullopt;
}

enum class VerdictMode { LlmRag, LlmOnly, RuleBased };

inline std::string_view to_string(VerdictMode m) {
    switch (m) {
    case VerdictMode::LlmRag: return "llm+rag";
    case VerdictMode::LlmOnly: return "llm-only";
    case VerdictMode::RuleBased: return "rule-based";
    }
    return "rule-based";
}

struct MaterialVerdict {
    std::string label; // free text, open set
    MaterialClass canonical_class = MaterialClass::Unknown;
    std::string rationale;
    std::vector<std::string> sources; // doc_ids, retrieval order
    VerdictMode mode = VerdictMode::RuleBased;
};

// --- prompt -------------------------------------------------------------------

struct ContextBlock {
    std::string doc_id;
    std::uint32_t seq = 0;
    double score = 0.0;
    std::string text;
};

struct Prompt {
    std::string system_text;
    std::vector<ContextBlock> context;
    std::string parameter_block;
    std::string instruction_text;

    /// The user turn sent to the model.
    std::string user_text() const {
        std::string out;
        if (!context.empty()) {
            out += "Reference material retrieved from the knowledge base:\n\n";
            for (std::size_t i = 0; i < context.size(); ++i) {
                out += "[Context " + std::to_string(i + 1) + "] (source: " + context[i].doc_id + ", chunk " +
                       std::to_string(context[i].seq) + ")\n" + context[i].text + "\n\n";
            }
        }
        out += "Radar measurement of the target:\n" + parameter_block + "\n" + instruction_text;
        return out;
    }
};

/// Eight measured fields plus the metal-like flag, one `key = value` per line.
inline std::string render_parameter_block(const EMParameters& p) { return to_record(p).to_string(); }

inline constexpr std::string_view kSystemText =
    "You are an expert in radar electromagnetics and material science. You identify the material of an "
    "object from millimeter-wave radar measurements. Ground your reasoning in physics and, when reference "
    "material is supplied, cite it.";

inline constexpr std::string_view kInstructionText =
    "Field meanings: range_m is the distance R in metres, velocity_mps the radial velocity V (positive = "
    "approaching), angle_deg the direction of arrival, snr_db the echo signal-to-noise ratio, rcs_m2 the radar "
    "cross section sigma, rho the power reflection coefficient of the peak reflection cell, gamma_f the "
    "normalized Fresnel reflection coefficient (vertical polarization) and epsilon_r the estimated relative "
    "permittivity. metal_like_flag = 1 means the reflection saturated the perfect-reflector reference.\n"
    "Reason step by step: first judge whether the geometry (R, V, angle, SNR) makes the measurement reliable, "
    "then interpret sigma and rho, then relate gamma_f and epsilon_r to known dielectric properties of candidate "
    "materials, and finally decide on the most likely material.\n"
    "End your answer with exactly one final line of the form:\n"
    "MATERIAL: <material name>\n";

inline Prompt assemble_prompt(const EMParameters& params, const std::vector<ContextBlock>& chunks, bool with_rag) {
    Prompt p;
    p.system_text = std::string(kSystemText);
    if (with_rag) p.context = chunks;
    p.parameter_block = render_parameter_block(params);
    p.instruction_text = std::string(kInstructionText);
    return p;
}

/// Retrieval query naming the four electromagnetic features and their values.
inline std::string retrieval_query(const EMParameters& p) {
    return "material identification from radar: radar cross section rcs " + format_double(p.rcs_m2) +
           " m2, power reflection coefficient rho " + format_double(p.rho) + ", Fresnel reflection coefficient " +
           format_double(p.gamma_f) + ", relative permittivity dielectric constant " + format_double(p.epsilon_r) +
           (p.metal_like ? ", metal-like total reflection conductor" : "");
}

// --- response parsing ---------------------------------------------------------

namespace detail {

inline std::string lower_ascii(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

struct Synonym {
    std::string_view word;
    MaterialClass cls;
};

inline constexpr std::array<Synonym, 45> kSynonyms{{
    {"metal", MaterialClass::Metal},        {"metallic", MaterialClass::Metal},
    {"steel", MaterialClass::Metal},        {"stainless", MaterialClass::Metal},
    {"aluminum", MaterialClass::Metal},     {"aluminium", MaterialClass::Metal},
    {"iron", MaterialClass::Metal},         {"copper", MaterialClass::Metal},
    {"brass", MaterialClass::Metal},        {"tin", MaterialClass::Metal},
    {"titanium", MaterialClass::Metal},     {"chrome", MaterialClass::Metal},
    {"zinc", MaterialClass::Metal},         {"silver", MaterialClass::Metal},
    {"conductor", MaterialClass::Metal},    {"ceramic", MaterialClass::Ceramic},
    {"ceramics", MaterialClass::Ceramic},   {"porcelain", MaterialClass::Ceramic},
    {"stoneware", MaterialClass::Ceramic},  {"earthenware", MaterialClass::Ceramic},
    {"terracotta", MaterialClass::Ceramic}, {"china", MaterialClass::Ceramic},
    {"glass", MaterialClass::Glass},        {"glassware", MaterialClass::Glass},
    {"borosilicate", MaterialClass::Glass}, {"soda", MaterialClass::Glass},
    {"pyrex", MaterialClass::Glass},        {"plastic", MaterialClass::Plastic},
    {"plastics", MaterialClass::Plastic},   {"polymer", MaterialClass::Plastic},
    {"polyethylene", MaterialClass::Plastic}, {"polypropylene", MaterialClass::Plastic},
    {"polystyrene", MaterialClass::Plastic}, {"polycarbonate", MaterialClass::Plastic},
    {"pet", MaterialClass::Plastic},        {"hdpe", MaterialClass::Plastic},
    {"ldpe", MaterialClass::Plastic},       {"pvc", MaterialClass::Plastic},
    {"abs", MaterialClass::Plastic},        {"acrylic", MaterialClass::Plastic},
    {"pmma", MaterialClass::Plastic},       {"nylon", MaterialClass::Plastic},
    {"ptfe", MaterialClass::Plastic},       {"teflon", MaterialClass::Plastic},
    {"resin", MaterialClass::Plastic},
}};

inline std::vector<std::string> words(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : s) {
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

inline std::optional<MaterialClass> lookup_word(std::string_view w) {
    for (const auto& s : kSynonyms)
        if (s.word == w) return s.cls;
    return std::nullopt;
}

/// Drops `<think>...</think>` sections emitted by reasoning models.
inline std::string strip_think(std::string_view raw) {
    std::string out;
    std::size_t pos = 0;
    for (;;) {
        const auto open = raw.find("<think>", pos);
        if (open == std::string_view::npos) break;
        out.append(raw.substr(pos, open - pos));
        const auto close = raw.find("</think>", open);
        if (close == std::string_view::npos) return out; // unterminated: drop the rest
        pos = close + 8;
    }
    out.append(raw.substr(pos));
    return out;
}

inline std::vector<std::string_view> split_lines(std::string_view s) {
    std::vector<std::string_view> lines;
    while (!s.empty()) {
        const auto nl = s.find('\n');
        lines.push_back(s.substr(0, nl));
        if (nl == std::string_view::npos) break;
        s.remove_prefix(nl + 1);
    }
    return lines;
}

/// Label after a `MATERIAL:` marker on this line, if any.
inline std::optional<std::string> marker_label(std::string_view line) {
    line = trim(line);
    while (!line.empty() && (line.front() == '*' || line.front() == '#' || line.front() == '-' ||
                             line.front() == '>' || line.front() == '`' || line.front() == ' '))
        line.remove_prefix(1);
    constexpr std::string_view kMarker = "material";
    if (line.size() < kMarker.size() || lower_ascii(line.substr(0, kMarker.size())) != kMarker) return std::nullopt;
    line.remove_prefix(kMarker.size());
    while (!line.empty() && (line.front() == '*' || line.front() == ' ')) line.remove_prefix(1);
    if (line.empty() || line.front() != ':') return std::nullopt;
    line.remove_prefix(1);
    auto strip = [](char c) { return c == '*' || c == '`' || c == '"' || c == '\'' || c == '.' || c == ' ' || c == '\t' || c == '\r'; };
    while (!line.empty() && strip(line.front())) line.remove_prefix(1);
    while (!line.empty() && strip(line.back())) line.remove_suffix(1);
    if (line.empty()) return std::nullopt;
    return std::string(line);
}

} // namespace detail

/// Canonical class of a free-text material name; `Other` when nothing matches.
inline MaterialClass classify_label(std::string_view label) {
    for (const auto& w : detail::words(label))
        if (auto c = detail::lookup_word(w)) return *c;
    return label.empty() ? MaterialClass::Unknown : MaterialClass::Other;
}

/// Never throws; unparseable input yields class Unknown.
inline MaterialVerdict parse_verdict(std::string_view raw) noexcept {
    MaterialVerdict v;
    v.mode = VerdictMode::LlmOnly;
    try {
        const auto text = detail::strip_think(raw);
        const auto lines = detail::split_lines(text);
        for (std::size_t i = lines.size(); i-- > 0;) {
            if (auto label = detail::marker_label(lines[i])) {
                v.label = *label;
                v.canonical_class = classify_label(*label);
                std::string rationale;
                for (std::size_t j = 0; j < i; ++j) rationale += std::string(lines[j]) + "\n";
                v.rationale = std::string(trim(rationale));
                return v;
            }
        }
        // No marker: look for exactly one material class in the final paragraph.
        std::string_view body = trim(text);
        const auto para = body.rfind("\n\n");
        const std::string_view last = para == std::string_view::npos ? body : trim(body.substr(para));
        std::optional<MaterialClass> found;
        std::string found_word;
        bool ambiguous = false;
        for (const auto& w : detail::words(last)) {
            if (auto c = detail::lookup_word(w)) {
                if (found && *found != *c) ambiguous = true;
                if (!found) {
                    found = c;
                    found_word = w;
                }
            }
        }
        v.rationale = std::string(body.substr(0, std::min<std::size_t>(body.size(), 4000)));
        if (found && !ambiguous) {
            v.label = found_word;
            v.canonical_class = *found;
        }
    } catch (...) {
        v.label.clear();
        v.canonical_class = MaterialClass::Unknown;
    }
    return v;
}

// --- rule table ---------------------------------------------------------------

/// Offline decision list. Thresholds are fixtures, overridable from a file.
struct RuleTable {
    double metal_gamma = kMetalLikeGamma;
    double band_eps_lo = 4.0, band_eps_hi = 9.0;
    double band_gamma_lo = 0.3, band_gamma_hi = 0.6;
    double dielectric_eps_lo = 3.5, dielectric_eps_hi = 9.0;
    double ceramic_split = 5.5;
    double plastic_eps_lo = 1.8, plastic_eps_hi = 3.5;
};

inline RuleTable rule_table_from_record(const KvRecord& r) {
    RuleTable t;
    t.metal_gamma = r.get_double_or("metal_gamma", t.metal_gamma);
    t.band_eps_lo = r.get_double_or("band_eps_lo", t.band_eps_lo);
    t.band_eps_hi = r.get_double_or("band_eps_hi", t.band_eps_hi);
    t.band_gamma_lo = r.get_double_or("band_gamma_lo", t.band_gamma_lo);
    t.band_gamma_hi = r.get_double_or("band_gamma_hi", t.band_gamma_hi);
    t.dielectric_eps_lo = r.get_double_or("dielectric_eps_lo", t.dielectric_eps_lo);
    t.dielectric_eps_hi = r.get_double_or("dielectric_eps_hi", t.dielectric_eps_hi);
    t.ceramic_split = r.get_double_or("ceramic_split", t.ceramic_split);
    t.plastic_eps_lo = r.get_double_or("plastic_eps_lo", t.plastic_eps_lo);
    t.plastic_eps_hi = r.get_double_or("plastic_eps_hi", t.plastic_eps_hi);
    return t;
}

inline MaterialVerdict rule_based_classify(const EMParameters& p, const RuleTable& t = {}) {
    MaterialVerdict v;
    v.mode = VerdictMode::RuleBased;
    const double eps = p.epsilon_r, g = p.gamma_f;
    auto in = [](double x, double lo, double hi) { return x >= lo && x < hi; };
    auto split = [&](std::string why) {
        v.canonical_class = eps >= t.ceramic_split ? MaterialClass::Ceramic : MaterialClass::Glass;
        v.rationale = std::move(why) + "; epsilon_r " + (eps >= t.ceramic_split ? ">= " : "< ") +
                      format_double(t.ceramic_split) + " selects " + std::string(to_string(v.canonical_class));
    };
    if (g >= t.metal_gamma || p.metal_like || p.gamma_clamped) {
        v.canonical_class = MaterialClass::Metal;
        v.rationale = "gamma_f " + format_double(g) + " at or above " + format_double(t.metal_gamma) +
                      " (or saturated): near-total reflection";
    } else if (in(eps, t.band_eps_lo, t.band_eps_hi) && in(g, t.band_gamma_lo, t.band_gamma_hi)) {
        split("epsilon_r in [" + format_double(t.band_eps_lo) + ", " + format_double(t.band_eps_hi) +
              ") with gamma_f in [" + format_double(t.band_gamma_lo) + ", " + format_double(t.band_gamma_hi) + ")");
    } else if (in(eps, t.dielectric_eps_lo, t.dielectric_eps_hi)) {
        split("epsilon_r in [" + format_double(t.dielectric_eps_lo) + ", " + format_double(t.dielectric_eps_hi) + ")");
    } else if (in(eps, t.plastic_eps_lo, t.plastic_eps_hi)) {
        v.canonical_class = MaterialClass::Plastic;
        v.rationale = "epsilon_r in [" + format_double(t.plastic_eps_lo) + ", " + format_double(t.plastic_eps_hi) +
                      "): low-loss polymer range";
    } else {
        v.canonical_class = MaterialClass::Other;
        v.rationale = "epsilon_r " + format_double(eps) + " outside every tabulated range";
    }
    v.label = std::string(to_string(v.canonical_class));
    return v;
}

// --- model access -------------------------------------------------------------

/// Anything that turns a prompt into raw model text.
class ChatClient {
public:
    virtual ~ChatClient() = default;
    virtual std::string complete(const Prompt& prompt) = 0;
};

/// Deterministic offline stand-in for a model: reads the parameter block back
/// out of the prompt and answers with the rule table's class.
class RuleStubClient final : public ChatClient {
public:
    explicit RuleStubClient(RuleTable rules = {}) : rules_(rules) {}

    std::string complete(const Prompt& prompt) override {
        EMParameters p;
        try {
            const auto blocks = parse_kv_blocks(prompt.parameter_block);
            if (blocks.empty()) return "No parameters supplied.";
            p = em_parameters_from_record(blocks.front());
        } catch (const Error&) {
            return "The parameter block could not be read.";
        }
        const auto v = rule_based_classify(p, rules_);
        std::string out = "Step 1: parameters received (" + std::to_string(prompt.context.size()) +
                          " context blocks).\nStep 2: " + v.rationale + ".\n";
        out += "MATERIAL: " + v.label + "\n";
        return out;
    }

private:
    RuleTable rules_;
};

/// Returns a fixed text; used to exercise parsing paths.
class FixedTextClient final : public ChatClient {
public:
    explicit FixedTextClient(std::string text) : text_(std::move(text)) {}
    std::string complete(const Prompt& prompt) override {
        last_prompt_ = prompt;
        return text_;
    }
    const std::optional<Prompt>& last_prompt() const { return last_prompt_; }

private:
    std::string text_;
    std::optional<Prompt> last_prompt_;
};

// --- identify -------------------------------------------------------------------

struct IdentifyOptions {
    bool with_rag = true;
    bool use_llm = true;
    std::size_t k = 4;
    bool fallback_to_rules = false; // use the rule table when the model call fails
    RuleTable rules;
};

inline std::vector<ContextBlock> retrieve_context(const EMParameters& params, const KnowledgeIndex& index,
                                                  const Embedder& embedder, std::size_t k) {
    std::vector<ContextBlock> out;
    for (const auto& hit : index.search_topk(retrieval_query(params), k, embedder))
        out.push_back({hit.chunk->doc_id, hit.chunk->seq, hit.score, hit.chunk->text});
    return out;
}

inline MaterialVerdict identify(const EMParameters& params, const KnowledgeIndex* index, const Embedder& embedder,
                                ChatClient* client, const IdentifyOptions& opt = {}) {
    if (!opt.use_llm) return rule_based_classify(params, opt.rules);
    if (!client) throw Error(ErrorKind::InvalidInput, "no model endpoint configured");

    std::vector<ContextBlock> context;
    if (opt.with_rag) {
        if (!index) throw Error(ErrorKind::InvalidInput, "retrieval requested but no knowledge index loaded");
        context = retrieve_context(params, *index, embedder, opt.k);
    }
    const auto prompt = assemble_prompt(params, context, opt.with_rag);
    std::string raw;
    try {
        raw = client->complete(prompt);
    } catch (const Error& e) {
        if (!opt.fallback_to_rules ||
            (e.kind() != ErrorKind::EndpointError && e.kind() != ErrorKind::EndpointUnreachable))
            throw;
        auto v = rule_based_classify(params, opt.rules);
        v.rationale += " (model endpoint failed: " + std::string(e.what()) + ")";
        return v;
    }
    auto v = parse_verdict(raw);
    v.mode = opt.with_rag ? VerdictMode::LlmRag : VerdictMode::LlmOnly;
    if (opt.with_rag)
        for (const auto& c : prompt.context)
            if (std::find(v.sources.begin(), v.sources.end(), c.doc_id) == v.sources.end()) v.sources.push_back(c.doc_id);
    return v;
}

// --- verdict record -------------------------------------------------------------

inline std::string escape_field(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (c == '\\') out += "\\\\";
        else if (c == '\n') out += "\\n";
        else if (c == '\r') continue;
        else out += c;
    }
    return out;
}

inline std::string unescape_field(std::string_view s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\\' && i + 1 < s.size()) {
            ++i;
            out += s[i] == 'n' ? '\n' : s[i];
        } else {
            out += s[i];
        }
    }
    return out;
}

inline KvRecord to_record(const MaterialVerdict& v) {
    KvRecord r;
    r.set("label", escape_field(v.label));
    r.set("canonical_class", std::string(to_string(v.canonical_class)));
    r.set("mode", std::string(to_string(v.mode)));
    std::string src;
    for (const auto& s : v.sources) src += (src.empty() ? "" : ",") + s;
    r.set("sources", src);
    r.set("rationale", escape_field(v.rationale));
    return r;
}

inline MaterialVerdict verdict_from_record(const KvRecord& r) {
    MaterialVerdict v;
    v.label = unescape_field(r.get("label"));
    const auto cls = material_class_from_string(r.get("canonical_class"));
    if (!cls) throw Error(ErrorKind::Format, "unknown canonical_class '" + r.get("canonical_class") + "'");
    v.canonical_class = *cls;
    const auto& mode = r.get("mode");
    if (mode == "llm+rag") v.mode = VerdictMode::LlmRag;
    else if (mode == "llm-only") v.mode = VerdictMode::LlmOnly;
    else if (mode == "rule-based") v.mode = VerdictMode::RuleBased;
    else throw Error(ErrorKind::Format, "unknown mode '" + mode + "'");
    std::string_view src = r.get("sources");
    while (!src.empty()) {
        const auto comma = src.find(',');
        if (auto item = trim(src.substr(0, comma)); !item.empty()) v.sources.emplace_back(item);
        if (comma == std::string_view::npos) break;
        src.remove_prefix(comma + 1);
    }
    v.rationale = unescape_field(r.get_or("rationale", ""));
    return v;
}

} // namespace radmat
