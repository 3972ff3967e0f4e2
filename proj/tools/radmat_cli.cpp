// radmat: radar material identification from the command line.

#include <CLI11.hpp>

#include "radmat/app.hpp"

using namespace radmat;

namespace {

struct EndpointFlags {
    std::string file;
    std::string url, model, key;
    double timeout_s = 0.0;
    int retries = -1;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--llm-url", url, "Chat endpoint base URL (http://host:port[/v1]) or stub://rules");
        cmd->add_option("--llm-model", model, "Model name sent to the endpoint");
        cmd->add_option("--llm-key", key, "Bearer token for the endpoint");
        cmd->add_option("--llm-timeout", timeout_s, "Request timeout in seconds");
        cmd->add_option("--llm-retries", retries, "Retries on network errors and 5xx/429");
        cmd->add_option("--endpoint-config", file, "key = value file with base_url, model, api_key, ...")
            ->check(CLI::ExistingFile);
    }

    // file < environment < flags
    EndpointConfig resolve() const {
        EndpointConfig cfg;
        if (!file.empty())
            for (const auto& b : parse_kv_blocks(read_text_file(file))) cfg = apply_record(cfg, b);
        cfg = apply_environment(cfg);
        if (!url.empty()) cfg.base_url = url;
        if (!model.empty()) cfg.model = model;
        if (!key.empty()) cfg.api_key = key;
        if (timeout_s > 0.0) cfg.timeout_s = timeout_s;
        if (retries >= 0) cfg.retries = retries;
        return cfg;
    }
};

std::vector<VerdictMode> parse_modes(const std::string& list) {
    std::vector<VerdictMode> out;
    std::string_view rest = list;
    while (!rest.empty()) {
        const auto comma = rest.find(',');
        const auto item = trim(rest.substr(0, comma));
        if (item == "rule-based") out.push_back(VerdictMode::RuleBased);
        else if (item == "llm-only") out.push_back(VerdictMode::LlmOnly);
        else if (item == "llm+rag") out.push_back(VerdictMode::LlmRag);
        else throw CLI::ValidationError("--modes", "unknown mode '" + std::string(item) + "'");
        if (comma == std::string_view::npos) break;
        rest.remove_prefix(comma + 1);
    }
    if (out.empty()) throw CLI::ValidationError("--modes", "no modes given");
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"radmat: FMCW radar material identification"};
    app.require_subcommand(1);

    AppContext ctx;
    std::string config_path;
    std::uint64_t seed = 0;
    app.add_option("--config", config_path, "Radar config file (key = value)")->check(CLI::ExistingFile);
    auto* seed_opt = app.add_option("--seed", seed, "Override the noise seed");
    app.add_flag("-v,--verbose", ctx.verbose, "Diagnostics on stderr");

    // simulate
    auto* sim = app.add_subcommand("simulate", "Synthesize a capture file from a scenario");
    std::string sim_scenario, sim_out;
    sim->add_option("scenario", sim_scenario, "Scenario file")->required()->check(CLI::ExistingFile);
    sim->add_option("-o,--out", sim_out, "Capture file to write")->required();

    // calibrate
    auto* calc = app.add_subcommand("calibrate", "Derive the calibration from a metal-sphere capture");
    std::string cal_capture, cal_out;
    double cal_diameter = 0.063;
    calc->add_option("capture", cal_capture, "Capture of the sphere")->required()->check(CLI::ExistingFile);
    calc->add_option("-d,--diameter", cal_diameter, "Sphere diameter in metres")->capture_default_str();
    calc->add_option("-o,--out", cal_out, "Calibration file to write")->required();

    // process
    auto* proc = app.add_subcommand("process", "Estimate EM parameters from a capture");
    std::string proc_capture, proc_cal, proc_out = "-";
    ProcessOptions popt;
    proc->add_option("capture", proc_capture, "Capture file")->required()->check(CLI::ExistingFile);
    proc->add_option("-c,--cal", proc_cal, "Calibration file")->required()->check(CLI::ExistingFile);
    proc->add_option("-o,--out", proc_out, "Parameter record file ('-' for stdout)")->capture_default_str();
    proc->add_flag("--all-targets", popt.all_targets, "One record per detection");
    proc->add_option("--export-rd", popt.export_rd, "Write the range-Doppler map (RMM1)");
    proc->add_option("--export-ra", popt.export_ra, "Write the range-angle map (RMM1)");

    // index
    auto* idx = app.add_subcommand("index", "Build a knowledge index from a directory");
    std::string idx_dir, idx_out;
    ChunkOptions chunking;
    idx->add_option("docs", idx_dir, "Directory of .md/.txt documents")->required()->check(CLI::ExistingDirectory);
    idx->add_option("-o,--out", idx_out, "Index file to write")->required();
    idx->add_option("--chunk-size", chunking.chunk_size, "Chunk size in bytes")->capture_default_str();
    idx->add_option("--overlap", chunking.overlap, "Overlap in bytes")->capture_default_str();

    // identify
    auto* ident = app.add_subcommand("identify", "Identify the material from a parameter record");
    std::string id_params;
    IdentifyCommandOptions iopt;
    bool no_rag = false, no_llm = false;
    EndpointFlags id_ep;
    ident->add_option("params", id_params, "Parameter record file")->required()->check(CLI::ExistingFile);
    ident->add_option("-i,--index", iopt.index_path, "Knowledge index file");
    ident->add_flag("--no-rag", no_rag, "Ask the model without retrieved context");
    ident->add_flag("--no-llm", no_llm, "Use the offline rule table only");
    ident->add_option("-k", iopt.identify.k, "Chunks to retrieve")->capture_default_str()->check(CLI::PositiveNumber);
    ident->add_flag("--fallback-rules", iopt.identify.fallback_to_rules, "Use the rule table if the endpoint fails");
    ident->add_option("-o,--out", iopt.out_path, "Verdict record file (default stdout)");
    id_ep.add_to(ident);

    // report
    auto* rep = app.add_subcommand("report", "Run the object suite under each mode");
    std::string rep_suite, rep_out, rep_modes = "rule-based,llm-only,llm+rag";
    ReportCommandOptions ropt;
    EndpointFlags rep_ep;
    rep->add_option("suite", rep_suite, "Object suite file")->required()->check(CLI::ExistingFile);
    rep->add_option("-o,--out", rep_out, "Also write the text report here");
    rep->add_option("--records", ropt.record_path, "Machine-readable record file");
    rep->add_option("--modes", rep_modes, "Comma list of rule-based, llm-only, llm+rag")->capture_default_str();
    rep->add_option("-i,--index", ropt.index_path, "Knowledge index file")->check(CLI::ExistingFile);
    rep->add_option("--knowledge", ropt.knowledge_dir, "Index this directory on the fly")
        ->check(CLI::ExistingDirectory);
    rep->add_option("-k", ropt.k, "Chunks to retrieve")->capture_default_str()->check(CLI::PositiveNumber);
    rep_ep.add_to(rep);

    try {
        app.parse(argc, argv);
        if (!config_path.empty()) ctx.config_path = config_path;
        if (*seed_opt) ctx.seed = seed;

        if (*sim) return cmd_simulate(ctx, sim_scenario, sim_out);
        if (*calc) return cmd_calibrate(ctx, cal_capture, cal_diameter, cal_out);
        if (*proc) return cmd_process(ctx, proc_capture, proc_cal, proc_out, popt);
        if (*idx) return cmd_index(ctx, idx_dir, idx_out, chunking);
        if (*ident) {
            iopt.identify.with_rag = !no_rag;
            iopt.identify.use_llm = !no_llm;
            try {
                if (!no_llm) iopt.endpoint = id_ep.resolve();
            } catch (const Error& e) {
                std::cerr << "radmat: " << e.what() << "\n";
                return kExitFailure;
            }
            return cmd_identify(ctx, id_params, iopt);
        }
        if (*rep) {
            ropt.modes = parse_modes(rep_modes);
            try {
                ropt.endpoint = rep_ep.resolve();
            } catch (const Error& e) {
                std::cerr << "radmat: " << e.what() << "\n";
                return kExitFailure;
            }
            return cmd_report(ctx, rep_suite, rep_out, ropt);
        }
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    }
    return kExitUsage;
}
