// crossfuse: reproducible reader-study simulation, fusion optimization
// and analysis pipelines.
//
// Exit codes: 0 ok, 2 config error, 3 data/infeasibility error, 4 I/O
// failure.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include <crossfuse/pipeline.hpp>

namespace fs = std::filesystem;
using crossfuse::pipeline::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitIo = 4;

int cmd_simulate(const std::string& config_path, const std::string& out_dir,
                 std::uint64_t seed) {
    crossfuse::pipeline::SimulateConfig cfg;
    std::string config_digest;
    if (!config_path.empty()) {
        try {
            auto j = crossfuse::pipeline::parse_json_file(config_path);
            cfg = crossfuse::pipeline::parse_simulate_config(j);
            config_digest = crossfuse::pipeline::file_digest(config_path);
        } catch (const crossfuse::Error& e) {
            std::cerr << "config error: " << e.what() << "\n";
            return kExitConfig;
        } catch (const std::exception& e) {
            std::cerr << "config error: " << e.what() << "\n";
            return kExitConfig;
        }
    }
    auto log = crossfuse::pipeline::run_simulate(cfg, out_dir, seed);
    std::cout << "wrote study: " << log.cases.size() << " cases, " << log.readers.size()
              << " readers, " << log.assessments.size() << " assessments -> " << out_dir << "\n";
    (void)config_digest;
    return kExitOk;
}

int cmd_ingest(const std::string& study_dir, const std::string& out_dir) {
    auto log = crossfuse::load_study_dir(study_dir);
    std::cout << "valid study: " << log.cases.size() << " cases, " << log.humans().size()
              << " human readers, " << log.model_outputs.size() << " model outputs, "
              << log.assessments.size() << " assessments\n";
    if (!out_dir.empty()) {
        crossfuse::save_study(log, out_dir);
        std::cout << "normalized copy -> " << out_dir << "\n";
    }
    return kExitOk;
}

int cmd_optimize(const std::string& study_dir, const std::string& config_path,
                 const std::string& out_path, std::size_t threads) {
    crossfuse::pipeline::OptimizeConfig cfg;
    std::string config_digest;
    if (!config_path.empty()) {
        try {
            auto j = crossfuse::pipeline::parse_json_file(config_path);
            cfg = crossfuse::pipeline::parse_optimize_config(j);
            config_digest = crossfuse::pipeline::file_digest(config_path);
        } catch (const crossfuse::Error& e) {
            std::cerr << "config error: " << e.what() << "\n";
            return kExitConfig;
        } catch (const std::exception& e) {
            std::cerr << "config error: " << e.what() << "\n";
            return kExitConfig;
        }
    }
    auto rep = crossfuse::pipeline::run_optimize(study_dir, cfg, out_path, threads, config_digest);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f (sd %.4f)", rep.mean_ba, rep.sd_ba);
    std::cout << "nested CV balanced accuracy: " << buf << " -> " << out_path << "\n";
    return kExitOk;
}

int cmd_analyze(const std::string& study_dir, const std::string& out_dir, std::uint64_t seed,
                const std::string& schedule_path) {
    std::optional<fs::path> schedule;
    if (!schedule_path.empty()) {
        try {
            // validate up front so schedule problems exit as config errors
            crossfuse::pipeline::parse_pay_schedule(
                crossfuse::pipeline::parse_json_file(schedule_path));
        } catch (const crossfuse::Error& e) {
            std::cerr << "config error: " << e.what() << "\n";
            return kExitConfig;
        }
        schedule = schedule_path;
    }
    auto res = crossfuse::pipeline::run_analyze(study_dir, out_dir, seed, schedule);
    std::cout << "reports -> " << out_dir << "\n";
    for (const auto& [section, msg] : res.section_errors)
        std::cout << "  section '" << section << "' skipped: " << msg << "\n";
    return kExitOk;
}

int cmd_report(const std::string& report_dir) {
    // condense the JSON reports into a human-readable index
    std::ostringstream md;
    md << "# Analysis report\n\n";
    for (const char* name : {"metrics.json", "agreement.json", "metacognition.json",
                             "economics.json"}) {
        fs::path p = fs::path(report_dir) / name;
        if (!fs::exists(p)) continue;
        auto j = crossfuse::pipeline::parse_json_file(p);
        md << "## " << name << "\n\n";
        if (j.contains("factorial"))
            for (auto& [cell, cj] : j["factorial"].items())
                if (cj.contains("metrics") && !cj["metrics"]["balanced_accuracy"].is_null())
                    md << "- " << cell << " balanced accuracy: "
                       << cj["metrics"]["balanced_accuracy"].dump() << "\n";
        if (j.contains("mean_kappa_unassisted"))
            md << "- mean kappa unassisted: " << j["mean_kappa_unassisted"].dump()
               << ", assisted: " << j["mean_kappa_assisted"].dump() << "\n";
        if (j.contains("quadrants"))
            md << "- ideal-quadrant occupancy (unassisted/assisted): "
               << j["quadrants"]["ideal_count"]["unassisted"].dump() << "/"
               << j["quadrants"]["ideal_count"]["assisted"].dump() << "\n";
        if (j.contains("median_leveraged_years"))
            md << "- median leveraged years: " << j["median_leveraged_years"].dump() << "\n";
        if (j.contains("errors") && !j["errors"].empty())
            for (auto& [k, v] : j["errors"].items())
                md << "- [skipped] " << k << ": " << v.get<std::string>() << "\n";
        md << "\n";
    }
    std::ofstream out(fs::path(report_dir) / "report.md", std::ios::binary);
    if (!out) throw crossfuse::Error("cannot write report.md");
    out << md.str();
    std::cout << "report -> " << (fs::path(report_dir) / "report.md").string() << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"crossfuse: reader-study simulation, fusion optimization and analytics"};
    app.require_subcommand(1);
    app.fallthrough();  // let global --seed/--threads/--out appear after the subcommand

    std::uint64_t seed = 0;
    std::size_t threads = 1;
    std::string out;
    app.add_option("--seed", seed, "base RNG seed")->capture_default_str();
    app.add_option("--threads", threads, "worker threads")->capture_default_str();
    app.add_option("--out", out, "output path/directory");

    std::string sim_config;
    auto* sim = app.add_subcommand("simulate", "generate a synthetic study-log bundle");
    sim->add_option("--config", sim_config, "simulate config JSON");

    std::string ingest_dir;
    auto* ing = app.add_subcommand("ingest", "load and validate a study directory");
    ing->add_option("study_dir", ingest_dir, "study directory")->required();

    std::string opt_dir, opt_config;
    auto* opt = app.add_subcommand("optimize", "nested-CV fusion hyperparameter search");
    opt->add_option("study_dir", opt_dir, "study directory")->required();
    opt->add_option("--config", opt_config, "fusion grid config JSON");

    std::string ana_dir, ana_schedule;
    auto* ana = app.add_subcommand("analyze", "full report set for a study directory");
    ana->add_option("study_dir", ana_dir, "study directory")->required();
    ana->add_option("--schedule", ana_schedule, "pay schedule JSON");

    std::string rep_dir;
    auto* rep = app.add_subcommand("report", "condense JSON reports into report.md");
    rep->add_option("report_dir", rep_dir, "directory holding the JSON reports")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (sim->parsed()) return cmd_simulate(sim_config, out.empty() ? "study" : out, seed);
        if (ing->parsed()) return cmd_ingest(ingest_dir, out);
        if (opt->parsed())
            return cmd_optimize(opt_dir, opt_config, out.empty() ? "cv_report.json" : out,
                                threads);
        if (ana->parsed()) return cmd_analyze(ana_dir, out.empty() ? "reports" : out, seed,
                                              ana_schedule);
        if (rep->parsed()) return cmd_report(rep_dir);
    } catch (const crossfuse::MalformedRow& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const crossfuse::Error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::ios_base::failure& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    }
    return kExitOk;
}
