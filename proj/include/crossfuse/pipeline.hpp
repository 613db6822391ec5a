#pragma once

// Orchestration layer behind the CLI: simulate / optimize / analyze
// runs with JSON reports, CSV curves, SVG plots, and embedded run
// manifests. Reports embed only reproducibility-relevant manifest
// fields (command, version, seeds, input digests); wall-clock
// timestamps and worker counts go to the run_manifest.json sidecar so
// report bytes stay identical across runs and thread counts.

#include <cctype>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "economics.hpp"
#include "errors.hpp"
#include "fusion.hpp"
#include "metacognition.hpp"
#include "metrics.hpp"
#include "sim.hpp"
#include "stats.hpp"
#include "study_data.hpp"
#include "svg.hpp"

namespace crossfuse::pipeline {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

inline constexpr const char* tool_version = "0.1.0";

// ---------------------------------------------------------------------------
// digests and manifests

inline std::string bytes_digest(const std::string& bytes) {
    // FNV-1a 64-bit
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline std::string file_digest(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), {});
    return bytes_digest(bytes);
}

struct RunManifest {
    std::string command;
    std::string version = tool_version;
    std::vector<std::uint64_t> seeds;
    std::string config_digest;                  // empty when no config file
    std::map<std::string, std::string> inputs;  // file name -> digest
};

inline json to_json(const RunManifest& m) {
    json j;
    j["command"] = m.command;
    j["version"] = m.version;
    j["seeds"] = m.seeds;
    j["config_digest"] = m.config_digest;
    j["inputs"] = json::object();
    for (const auto& [k, v] : m.inputs) j["inputs"][k] = v;
    return j;
}

// Sidecar with the non-reproducible run details.
inline void write_sidecar_manifest(const fs::path& out_dir, const RunManifest& m,
                                   std::size_t n_threads,
                                   std::chrono::system_clock::time_point start,
                                   std::chrono::system_clock::time_point end) {
    json j = to_json(m);
    j["n_threads"] = n_threads;
    j["start_unix_ms"] =
        std::chrono::duration_cast<std::chrono::milliseconds>(start.time_since_epoch()).count();
    j["end_unix_ms"] =
        std::chrono::duration_cast<std::chrono::milliseconds>(end.time_since_epoch()).count();
    std::ofstream out(out_dir / "run_manifest.json", std::ios::binary);
    if (!out) throw Error("cannot write " + (out_dir / "run_manifest.json").string());
    out << j.dump(2) << "\n";
}

// Serialize a real as a JSON number, or null when not finite (reports
// must never contain NaN/Inf).
inline json fin(double v) {
    if (!std::isfinite(v)) return nullptr;
    return v;
}

inline json opt_num(const std::optional<double>& v) { return v ? fin(*v) : json(nullptr); }

inline void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

inline json parse_json_text(const std::string& text, const std::string& origin) {
    try {
        return json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw MalformedRow("invalid JSON in " + origin + ": " + e.what(), line, col);
    }
}

inline json parse_json_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), {});
    return parse_json_text(text, path.string());
}

// ---------------------------------------------------------------------------
// config parsing

struct SimulateConfig {
    std::size_t n_cases = 1109;
    double prevalence = 0.5;
    std::size_t per_reader = 100;
    std::string preset = "paper_like";  // paper_like | skilled | noise | custom
    std::vector<AgentSpec> agents;      // used when preset == custom
    ModelSpec model;
};

inline AgentSpec parse_agent(const json& j) {
    AgentSpec a;
    a.reader_id = j.at("reader_id").get<std::string>();
    if (j.contains("years_experience")) a.years_experience = j["years_experience"].get<double>();
    if (j.contains("base_sensitivity")) a.base_sensitivity = j["base_sensitivity"].get<double>();
    if (j.contains("base_specificity")) a.base_specificity = j["base_specificity"].get<double>();
    if (j.contains("assisted_gain_slope"))
        a.assisted_gain_slope = j["assisted_gain_slope"].get<double>();
    if (j.contains("base_confidence")) a.base_confidence = j["base_confidence"].get<double>();
    if (j.contains("confidence_gain_correct"))
        a.confidence_gain_correct = j["confidence_gain_correct"].get<double>();
    if (j.contains("confidence_noise_sd"))
        a.confidence_noise_sd = j["confidence_noise_sd"].get<double>();
    if (j.contains("time_mu")) a.time_mu = j["time_mu"].get<double>();
    if (j.contains("time_sigma")) a.time_sigma = j["time_sigma"].get<double>();
    if (j.contains("assisted_time_scale"))
        a.assisted_time_scale = j["assisted_time_scale"].get<double>();
    a.validate();
    return a;
}

inline SimulateConfig parse_simulate_config(const json& j) {
    SimulateConfig c;
    if (j.contains("n_cases")) c.n_cases = j["n_cases"].get<std::size_t>();
    if (j.contains("prevalence")) c.prevalence = j["prevalence"].get<double>();
    if (j.contains("per_reader")) c.per_reader = j["per_reader"].get<std::size_t>();
    if (j.contains("preset")) c.preset = j["preset"].get<std::string>();
    if (j.contains("model")) {
        const auto& m = j["model"];
        if (m.contains("pos_alpha")) c.model.pos_alpha = m["pos_alpha"].get<double>();
        if (m.contains("pos_beta")) c.model.pos_beta = m["pos_beta"].get<double>();
        if (m.contains("neg_alpha")) c.model.neg_alpha = m["neg_alpha"].get<double>();
        if (m.contains("neg_beta")) c.model.neg_beta = m["neg_beta"].get<double>();
        if (m.contains("time_s")) c.model.time_s = m["time_s"].get<double>();
        c.model.validate();
    }
    if (c.preset == "custom") {
        if (!j.contains("agents") || !j["agents"].is_array() || j["agents"].empty())
            throw RangeViolation("preset 'custom' requires a nonempty 'agents' array");
        for (const auto& a : j["agents"]) c.agents.push_back(parse_agent(a));
    } else if (c.preset != "paper_like" && c.preset != "skilled" && c.preset != "noise") {
        throw RangeViolation("unknown preset '" + c.preset + "'");
    }
    if (c.prevalence <= 0.0 || c.prevalence > 1.0)
        throw RangeViolation("prevalence must lie in (0,1]");
    return c;
}

inline std::vector<AgentSpec> agents_of(const SimulateConfig& c) {
    if (c.preset == "custom") return c.agents;
    if (c.preset == "skilled") return skilled_agents();
    if (c.preset == "noise") return noise_agents();
    return paper_like_agents();
}

struct OptimizeConfig {
    std::vector<std::string> mode_set = {"always", "selective"};
    double w_min = 0.1, w_max = 0.8, w_step = 0.1;
    std::vector<double> h_set = {0.0, 0.05, 0.1};
    std::size_t n_outer = 5;
    std::size_t n_inner = 3;
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
};

inline OptimizeConfig parse_optimize_config(const json& j) {
    OptimizeConfig c;
    if (j.contains("mode_set")) c.mode_set = j["mode_set"].get<std::vector<std::string>>();
    if (j.contains("w_min")) c.w_min = j["w_min"].get<double>();
    if (j.contains("w_max")) c.w_max = j["w_max"].get<double>();
    if (j.contains("w_step")) c.w_step = j["w_step"].get<double>();
    if (j.contains("h_set")) c.h_set = j["h_set"].get<std::vector<double>>();
    if (j.contains("n_outer")) c.n_outer = j["n_outer"].get<std::size_t>();
    if (j.contains("n_inner")) c.n_inner = j["n_inner"].get<std::size_t>();
    if (j.contains("seeds")) c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    if (c.w_step <= 0) throw RangeViolation("w_step must be positive");
    if (c.n_outer < 2 || c.n_inner < 2) throw RangeViolation("n_outer/n_inner must be >= 2");
    if (c.seeds.empty()) throw RangeViolation("seeds must be nonempty");
    for (const auto& m : c.mode_set)
        if (m != "always" && m != "selective")
            throw RangeViolation("unknown fusion mode '" + m + "'");
    return c;
}

inline std::vector<FusionParams> grid_of(const OptimizeConfig& c) {
    std::vector<FusionParams> grid;
    bool always = false, selective = false;
    for (const auto& m : c.mode_set) (m == "always" ? always : selective) = true;
    for (double w = c.w_min; w <= c.w_max + 1e-9; w += c.w_step) {
        if (always) grid.push_back({FusionMode::always, w, 0.0});
        if (selective)
            for (double h : c.h_set) grid.push_back({FusionMode::selective, w, h});
    }
    if (grid.empty()) throw EmptyGrid("optimize config produced an empty grid");
    for (const auto& g : grid) g.validate();
    return grid;
}

inline PaySchedule parse_pay_schedule(const json& j) {
    PaySchedule s;
    if (j.contains("currency")) s.currency = j["currency"].get<std::string>();
    if (!j.contains("bands") || !j["bands"].is_array())
        throw RangeViolation("pay schedule requires a 'bands' array");
    for (const auto& b : j["bands"])
        s.bands.push_back({b.at("years_from").get<int>(), b.at("annual").get<double>()});
    s.validate();
    return s;
}

// ---------------------------------------------------------------------------
// simulate

inline std::map<std::string, std::string> study_digests(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const char* f : {"cases.csv", "readers.csv", "model_outputs.csv", "assessments.csv"})
        if (fs::exists(dir / f)) out[f] = file_digest(dir / f);
    return out;
}

inline StudyLog run_simulate(const SimulateConfig& cfg, const fs::path& out_dir,
                             std::uint64_t seed) {
    auto start = std::chrono::system_clock::now();
    auto cohort = generate_cohort(cfg.n_cases, cfg.prevalence, seed);
    StudyGenSettings settings;
    settings.per_reader = cfg.per_reader;
    auto log = generate_study(cohort, agents_of(cfg), cfg.model, seed, settings);
    fs::create_directories(out_dir);
    save_study(log, out_dir);

    RunManifest m;
    m.command = "simulate";
    m.seeds = {seed};
    m.inputs = study_digests(out_dir);  // digests of what was produced
    write_sidecar_manifest(out_dir, m, 1, start, std::chrono::system_clock::now());
    return log;
}

// ---------------------------------------------------------------------------
// optimize

inline json params_json(const FusionParams& p) {
    json j;
    j["mode"] = to_string(p.mode);
    j["human_weight"] = fin(p.human_weight);
    j["band_halfwidth"] = fin(p.band_halfwidth);
    j["key"] = p.key();
    return j;
}

inline NestedCvReport run_optimize(const fs::path& study_dir, const OptimizeConfig& cfg,
                                   const fs::path& out_path, std::size_t n_threads,
                                   const std::string& config_digest = "") {
    auto start = std::chrono::system_clock::now();
    auto log = load_study_dir(study_dir);
    auto grid = grid_of(cfg);
    NestedCvSettings settings;
    settings.n_outer = cfg.n_outer;
    settings.n_inner = cfg.n_inner;
    settings.seeds = cfg.seeds;
    settings.n_threads = n_threads;
    auto rep = nested_cv_optimize(log, grid, settings);

    RunManifest m;
    m.command = "optimize";
    m.seeds = cfg.seeds;
    m.config_digest = config_digest;
    m.inputs = study_digests(study_dir);

    json j;
    j["manifest"] = to_json(m);
    j["grid_size"] = grid.size();
    j["degenerate_grid"] = rep.degenerate_grid;
    j["mean_balanced_accuracy"] = fin(rep.mean_ba);
    j["sd_balanced_accuracy"] = fin(rep.sd_ba);
    j["selection_frequency"] = json::object();
    for (const auto& [k, v] : rep.selection_frequency) j["selection_frequency"][k] = v;
    j["seeds"] = json::array();
    for (const auto& sr : rep.seeds) {
        json sj;
        sj["seed"] = sr.seed;
        sj["mean_outer_balanced_accuracy"] = fin(sr.mean_outer_ba);
        sj["mean_model_alone_balanced_accuracy"] = fin(sr.mean_model_alone_ba);
        sj["folds"] = json::array();
        for (const auto& fr : sr.folds) {
            json fj;
            fj["fold"] = fr.fold;
            fj["params"] = params_json(fr.params);
            fj["outer_balanced_accuracy"] = fin(fr.outer_ba);
            fj["model_alone_balanced_accuracy"] = fin(fr.model_alone_ba);
            sj["folds"].push_back(std::move(fj));
        }
        j["seeds"].push_back(std::move(sj));
    }
    fs::create_directories(out_path.parent_path().empty() ? "." : out_path.parent_path());
    write_json(out_path, j);
    write_sidecar_manifest(out_path.parent_path().empty() ? "." : out_path.parent_path(), m,
                           n_threads, start, std::chrono::system_clock::now());
    return rep;
}

// ---------------------------------------------------------------------------
// analyze

struct AnalyzeResult {
    std::map<std::string, std::string> section_errors;  // section -> error message
    bool ok() const { return section_errors.empty(); }
};

namespace detail {

// Lenient load: a missing model_outputs.csv degrades to a study without
// model probabilities so human-arm sections still run.
struct LoadedStudy {
    StudyLog log;
    bool has_model_outputs = false;
};

inline LoadedStudy load_for_analyze(const fs::path& dir) {
    LoadedStudy out;
    if (fs::exists(dir / "model_outputs.csv")) {
        out.log = load_study_dir(dir);
        out.has_model_outputs = true;
        return out;
    }
    out.log.cases = crossfuse::detail::read_cases((dir / "cases.csv").string());
    out.log.readers = crossfuse::detail::read_readers((dir / "readers.csv").string());
    out.log.assessments = crossfuse::detail::read_assessments((dir / "assessments.csv").string());
    out.log.reindex();
    return out;
}

inline json metric_report_json(const MetricReport& r) {
    json j;
    json undefined = json::array();
    for (const auto& name : MetricReport::names()) {
        auto v = r.get(name);
        j[name] = opt_num(v);
        if (!v) undefined.push_back(name);
    }
    if (!undefined.empty()) j["undefined"] = undefined;
    return j;
}

inline json throughput_json(const ThroughputSummary& t) {
    json j;
    j["mean_seconds"] = fin(t.mean_seconds);
    j["sd_seconds"] = fin(t.sd_seconds);
    j["cases_per_hour"] = fin(t.cases_per_hour);
    j["cv"] = fin(t.cv);
    j["n"] = t.n;
    return j;
}

inline std::vector<double> times_of(const StudyLog& log, ReaderKind kind, Arm arm) {
    std::vector<double> out;
    for (const auto& a : log.assessments) {
        const ReaderProfile* r = log.find_reader(a.reader_id);
        if (r && r->kind == kind && a.arm == arm) out.push_back(a.response_time_s);
    }
    return out;
}

inline void write_csv_rows(const fs::path& path, const std::vector<std::string>& header,
                           const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    csv::write_row(out, header);
    for (const auto& r : rows) csv::write_row(out, r);
}

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

}  // namespace detail

inline AnalyzeResult run_analyze(const fs::path& study_dir, const fs::path& out_dir,
                                 std::uint64_t seed,
                                 const std::optional<fs::path>& schedule_path = std::nullopt) {
    auto start = std::chrono::system_clock::now();
    AnalyzeResult result;
    auto loaded = detail::load_for_analyze(study_dir);
    const StudyLog& log = loaded.log;

    fs::create_directories(out_dir / "curves");
    fs::create_directories(out_dir / "plots");

    RunManifest m;
    m.command = "analyze";
    m.seeds = {seed};
    m.inputs = study_digests(study_dir);

    std::optional<PaySchedule> schedule;
    if (schedule_path) {
        schedule = parse_pay_schedule(parse_json_file(*schedule_path));
        m.config_digest = file_digest(*schedule_path);
    }

    auto record = [&](const std::string& section, const std::exception& e, json& errors) {
        result.section_errors[section] = e.what();
        errors[section] = e.what();
    };

    // ---- metrics.json: 2x2 factorial (agent kind x support arm) --------
    {
        json j;
        j["manifest"] = to_json(m);
        json errors = json::object();
        j["factorial"] = json::object();
        std::map<std::string, double> cell_ba;
        for (ReaderKind kind : {ReaderKind::human, ReaderKind::model}) {
            for (Arm arm : {Arm::unassisted, Arm::assisted}) {
                std::string cell = std::string(to_string(kind)) + "_" + to_string(arm);
                try {
                    json cj;
                    if (kind == ReaderKind::human) {
                        auto s = reader_averaged_summary(log, arm, kind, 2000, seed);
                        cj["n_readers"] = s.n_readers;
                        cj["metrics"] = json::object();
                        for (const auto& name : MetricReport::names()) {
                            auto it = s.mean.find(name);
                            cj["metrics"][name] = it == s.mean.end() ? json(nullptr) : fin(it->second);
                        }
                        cj["ci"] = json::object();
                        for (const auto& [name, ci] : s.ci)
                            cj["ci"][name] = json::array({fin(ci.first), fin(ci.second)});
                        if (s.mean.count("balanced_accuracy"))
                            cell_ba[cell] = s.mean.at("balanced_accuracy");
                    } else {
                        auto sc = scored_cases_of(log, "model", arm);
                        if (sc.empty()) throw MissingModelOutput("no model assessments in arm");
                        std::vector<bool> p, t;
                        for (const auto& c : sc) {
                            p.push_back(c.prediction);
                            t.push_back(c.truth);
                        }
                        auto rep = classification_metrics(confusion(p, t));
                        cj["n_cases"] = sc.size();
                        cj["metrics"] = detail::metric_report_json(rep);
                        cj["ci"] = json::object();
                        for (const auto& name : MetricReport::names()) {
                            if (!rep.get(name)) continue;
                            auto ci = bootstrap_ci(sc, metric_fn(name), 2000, 0.95, seed);
                            cj["ci"][name] = json::array({fin(ci.lo), fin(ci.hi)});
                        }
                        if (rep.balanced_accuracy) cell_ba[cell] = *rep.balanced_accuracy;
                    }
                    auto times = detail::times_of(log, kind, arm);
                    if (!times.empty()) cj["throughput"] = detail::throughput_json(throughput_summary(times));
                    j["factorial"][cell] = std::move(cj);
                } catch (const Error& e) {
                    record("metrics." + cell, e, errors);
                }
            }
        }
        j["deltas"] = json::object();
        for (const char* kind : {"human", "model"}) {
            std::string un = std::string(kind) + "_unassisted", as = std::string(kind) + "_assisted";
            if (cell_ba.count(un) && cell_ba.count(as))
                j["deltas"][std::string(kind) + "_balanced_accuracy"] =
                    fin(cell_ba[as] - cell_ba[un]);
        }
        // fusion summary at the reference operating point
        try {
            if (!loaded.has_model_outputs)
                throw MissingModelOutput("model_outputs.csv is missing");
            FusionParams ref{FusionMode::always, 0.5, 0.0};
            auto outcomes = fuse_log(log, ref, HumanSource::unassisted_arm);
            std::vector<bool> p, t;
            for (const auto& o : outcomes) {
                p.push_back(o.decision);
                t.push_back(log.find_case(o.case_id)->ground_truth);
            }
            json fj;
            fj["params"] = params_json(ref);
            fj["n_pairs"] = outcomes.size();
            fj["metrics"] = detail::metric_report_json(classification_metrics(confusion(p, t)));
            j["fusion"] = std::move(fj);
        } catch (const Error& e) {
            record("fusion", e, errors);
        }
        j["errors"] = errors;
        write_json(out_dir / "metrics.json", j);
    }

    // ---- agreement.json ------------------------------------------------
    {
        json j;
        j["manifest"] = to_json(m);
        json errors = json::object();
        try {
            auto overlap = pairwise_overlap(log);
            // (case, reader, arm) -> prediction
            std::map<std::tuple<std::string, std::string, Arm>, bool> pred;
            for (const auto& a : log.assessments)
                pred[{a.case_id, a.reader_id, a.arm}] = a.prediction;
            json pairs = json::array();
            double sum_un = 0, sum_as = 0;
            std::size_t n_pairs = 0;
            std::vector<bool> pool_a0, pool_b0, pool_a1, pool_b1;
            const ReaderProfile* model = log.model_reader();
            for (const auto& [key, shared] : overlap) {
                const auto& [ra, rb] = key;
                if (shared.size() < 2) continue;
                std::vector<bool> a0, b0, a1, b1;
                bool complete = true;
                for (const auto& cid : shared) {
                    for (Arm arm : {Arm::unassisted, Arm::assisted}) {
                        auto ia = pred.find({cid, ra, arm});
                        auto ib = pred.find({cid, rb, arm});
                        if (ia == pred.end() || ib == pred.end()) {
                            complete = false;
                            break;
                        }
                        (arm == Arm::unassisted ? a0 : a1).push_back(ia->second);
                        (arm == Arm::unassisted ? b0 : b1).push_back(ib->second);
                    }
                    if (!complete) break;
                }
                if (!complete || a0.empty()) continue;
                double k0 = cohens_kappa(a0, b0);
                double k1 = cohens_kappa(a1, b1);
                json pj;
                pj["a"] = ra;
                pj["b"] = rb;
                pj["n_shared"] = a0.size();
                pj["kappa_unassisted"] = fin(k0);
                pj["kappa_assisted"] = fin(k1);
                pairs.push_back(std::move(pj));
                bool is_model_pair = model && (ra == model->reader_id || rb == model->reader_id);
                if (!is_model_pair) {
                    sum_un += k0;
                    sum_as += k1;
                    ++n_pairs;
                    pool_a0.insert(pool_a0.end(), a0.begin(), a0.end());
                    pool_b0.insert(pool_b0.end(), b0.begin(), b0.end());
                    pool_a1.insert(pool_a1.end(), a1.begin(), a1.end());
                    pool_b1.insert(pool_b1.end(), b1.begin(), b1.end());
                }
            }
            j["pairs"] = std::move(pairs);
            if (n_pairs > 0) {
                j["mean_kappa_unassisted"] = fin(sum_un / double(n_pairs));
                j["mean_kappa_assisted"] = fin(sum_as / double(n_pairs));
                auto diff = kappa_difference_test(pool_a0, pool_b0, pool_a1, pool_b1, 5000, seed);
                j["difference_test"] = {{"delta_kappa", fin(diff.delta_kappa)},
                                        {"p_value", fin(diff.p_value)}};
            } else {
                throw TooFewReaders("no human reader pairs with shared cases");
            }
        } catch (const Error& e) {
            record("agreement", e, errors);
        }
        j["errors"] = errors;
        write_json(out_dir / "agreement.json", j);
    }

    // ---- metacognition.json + calibration curves/plots ------------------
    {
        json j;
        j["manifest"] = to_json(m);
        json errors = json::object();
        std::vector<CalibrationSummary> summaries;
        try {
            summaries = calibration_summaries(log);
            json agents = json::array();
            for (const auto& s : summaries) {
                json sj;
                sj["agent_id"] = s.agent_id;
                sj["arm"] = to_string(s.arm);
                sj["self_awareness"] = fin(s.self_awareness);
                sj["calibration_difference"] = fin(s.calibration_difference);
                sj["confidence_bias"] = fin(s.confidence_bias);
                sj["n_cases"] = s.n_cases;
                agents.push_back(std::move(sj));
            }
            j["agents"] = std::move(agents);
        } catch (const Error& e) {
            record("metacognition.agents", e, errors);
        }

        j["pooled_fit"] = json::object();
        for (Arm arm : {Arm::unassisted, Arm::assisted}) {
            try {
                std::vector<ScoredReview> pooled;
                for (const auto* h : log.humans()) {
                    auto rs = scored_reviews_of(log, h->reader_id, arm);
                    pooled.insert(pooled.end(), rs.begin(), rs.end());
                }
                auto fit = pooled_calibration_fit(pooled);
                j["pooled_fit"][to_string(arm)] = {
                    {"slope", fin(fit.slope)},
                    {"intercept", fin(fit.intercept)},
                    {"mean_accuracy_deviation", fin(fit.mean_accuracy_deviation)},
                    {"n_bins", fit.n_bins}};

                // per-bin accuracy curve (CSV + later plotted)
                std::map<int, std::pair<std::size_t, std::size_t>> bins;
                for (const auto& r : pooled) {
                    int c = std::clamp(int(std::lround(r.confidence)), 1, 10);
                    bins[c].first++;
                    if (r.correct) bins[c].second++;
                }
                std::vector<std::vector<std::string>> rows;
                for (const auto& [c, nn] : bins)
                    rows.push_back({std::to_string(c), std::to_string(nn.first),
                                    detail::fmt(double(nn.second) / double(nn.first))});
                detail::write_csv_rows(
                    out_dir / "curves" / ("calibration_" + std::string(to_string(arm)) + ".csv"),
                    {"confidence_bin", "n", "accuracy"}, rows);
            } catch (const Error& e) {
                record("metacognition.pooled_fit." + std::string(to_string(arm)), e, errors);
            }
        }

        try {
            if (summaries.size() < 4) throw TooFewPoints("quadrant analysis needs >= 4 points");
            auto q = quadrant_analysis(summaries);
            json qj;
            qj["median_self_awareness"] = fin(q.median_self_awareness);
            qj["median_calibration_difference"] = fin(q.median_calibration_difference);
            qj["points"] = json::array();
            for (const auto& p : q.points)
                qj["points"].push_back({{"agent_id", p.agent_id},
                                        {"arm", to_string(p.arm)},
                                        {"self_awareness", fin(p.self_awareness)},
                                        {"calibration_difference", fin(p.calibration_difference)},
                                        {"quadrant", to_string(p.quadrant)}});
            qj["ideal_count"] = json::object();
            qj["total_count"] = json::object();
            for (Arm arm : {Arm::unassisted, Arm::assisted}) {
                qj["ideal_count"][to_string(arm)] =
                    q.ideal_count.count(arm) ? q.ideal_count.at(arm) : 0;
                qj["total_count"][to_string(arm)] =
                    q.total_count.count(arm) ? q.total_count.at(arm) : 0;
            }
            qj["fisher_p"] = fin(q.fisher.p_value);
            j["quadrants"] = std::move(qj);

            svg::Plot plot("Self-awareness vs calibration", "self-awareness",
                           "calibration difference");
            svg::Series un{"unassisted", "#1f77b4", true, {}, {}};
            svg::Series as{"assisted", "#d62728", true, {}, {}};
            for (const auto& p : q.points) {
                auto& s = p.arm == Arm::unassisted ? un : as;
                s.x.push_back(p.self_awareness);
                s.y.push_back(p.calibration_difference);
            }
            plot.add(std::move(un));
            plot.add(std::move(as));
            plot.save((out_dir / "plots" / "quadrants.svg").string());
        } catch (const Error& e) {
            record("metacognition.quadrants", e, errors);
        }

        // calibration plot: pooled bin accuracy per arm against the ideal
        try {
            svg::Plot plot("Pooled calibration", "confidence", "accuracy");
            plot.set_range(1, 10, 0, 1);
            svg::Series ideal{"ideal accuracy = confidence/10", "#999999", false, {}, {}};
            for (int c = 1; c <= 10; ++c) {
                ideal.x.push_back(c);
                ideal.y.push_back(c / 10.0);
            }
            plot.add(std::move(ideal));
            const char* colors[2] = {"#1f77b4", "#d62728"};
            int ci = 0;
            for (Arm arm : {Arm::unassisted, Arm::assisted}) {
                std::map<int, std::pair<std::size_t, std::size_t>> bins;
                for (const auto* h : log.humans())
                    for (const auto& r : scored_reviews_of(log, h->reader_id, arm)) {
                        int c = std::clamp(int(std::lround(r.confidence)), 1, 10);
                        bins[c].first++;
                        if (r.correct) bins[c].second++;
                    }
                svg::Series s{to_string(arm), colors[ci++], false, {}, {}};
                for (const auto& [c, nn] : bins) {
                    s.x.push_back(c);
                    s.y.push_back(double(nn.second) / double(nn.first));
                }
                plot.add(std::move(s));
            }
            plot.save((out_dir / "plots" / "calibration.svg").string());
        } catch (const Error& e) {
            record("metacognition.calibration_plot", e, errors);
        }
        j["errors"] = errors;
        write_json(out_dir / "metacognition.json", j);
    }

    // ---- economics.json ------------------------------------------------
    {
        json j;
        j["manifest"] = to_json(m);
        json errors = json::object();
        try {
            std::vector<double> years, acc_un, conf_un;
            std::vector<AgentSupportMetrics> supported;
            for (const auto* h : log.humans()) {
                if (!h->years_experience) continue;
                auto un = scored_cases_of(log, h->reader_id, Arm::unassisted);
                auto as = scored_cases_of(log, h->reader_id, Arm::assisted);
                if (un.empty() || as.empty()) continue;
                auto acc = [](const std::vector<ScoredCase>& cs) {
                    std::size_t c = 0;
                    for (const auto& s : cs)
                        if (s.prediction == s.truth) ++c;
                    return double(c) / double(cs.size());
                };
                auto mean_conf = [&](Arm arm) {
                    double s = 0;
                    std::size_t n = 0;
                    for (const auto* a : log.assessments_of(h->reader_id, arm)) {
                        s += a->confidence;
                        ++n;
                    }
                    return s / double(n);
                };
                years.push_back(*h->years_experience);
                acc_un.push_back(acc(un));
                conf_un.push_back(mean_conf(Arm::unassisted));
                supported.push_back(
                    {h->reader_id, *h->years_experience, acc(as), mean_conf(Arm::assisted)});
            }
            auto fit_acc = fit_ols(years, acc_un);
            auto fit_conf = fit_ols(years, conf_un);
            auto fit_json = [&](const RegressionFit& f) {
                return json{{"beta0", fin(f.beta0)}, {"beta1", fin(f.beta1)},
                            {"r2", fin(f.r2)},       {"p_slope", fin(f.p_slope)},
                            {"aic", fin(f.aic)},     {"n", f.n}};
            };
            j["fit_accuracy_vs_years"] = fit_json(fit_acc);
            j["fit_confidence_vs_years"] = fit_json(fit_conf);

            std::optional<ModelSupportMetrics> model_metrics;
            {
                auto un = scored_cases_of(log, "model", Arm::unassisted);
                auto as = scored_cases_of(log, "model", Arm::assisted);
                if (!un.empty() && !as.empty()) {
                    auto acc = [](const std::vector<ScoredCase>& cs) {
                        std::size_t c = 0;
                        for (const auto& s : cs)
                            if (s.prediction == s.truth) ++c;
                        return double(c) / double(cs.size());
                    };
                    auto mean_conf = [&](Arm arm) {
                        double s = 0;
                        std::size_t n = 0;
                        for (const auto* a : log.assessments_of("model", arm)) {
                            s += a->confidence;
                            ++n;
                        }
                        return s / double(n);
                    };
                    model_metrics = ModelSupportMetrics{acc(un), mean_conf(Arm::unassisted),
                                                        acc(as), mean_conf(Arm::assisted)};
                }
            }

            if (schedule) {
                auto rep = support_leverage(supported, fit_acc, fit_conf, *schedule, model_metrics);
                json agents = json::array();
                for (const auto& a : rep.agents)
                    agents.push_back({{"agent_id", a.agent_id},
                                      {"actual_years", fin(a.actual_years)},
                                      {"equivalent_years", fin(a.equivalent_years)},
                                      {"leveraged_years", fin(a.leveraged_years)},
                                      {"cumulative_value", fin(a.cumulative_value)},
                                      {"leveraged_value", fin(a.leveraged_value)},
                                      {"extrapolated", a.extrapolated}});
                j["agents"] = std::move(agents);
                j["median_leveraged_years"] = fin(rep.median_leveraged_years);
                j["iqr_leveraged_years"] = json::array(
                    {fin(rep.iqr_leveraged_years_lo), fin(rep.iqr_leveraged_years_hi)});
                j["median_leveraged_value"] = fin(rep.median_leveraged_value);
                j["iqr_leveraged_value"] = json::array(
                    {fin(rep.iqr_leveraged_value_lo), fin(rep.iqr_leveraged_value_hi)});
                j["currency"] = rep.currency;
                if (rep.model)
                    j["model"] = {{"base_years", fin(rep.model->base_years)},
                                  {"supported_years", fin(rep.model->supported_years)},
                                  {"leveraged_years", fin(rep.model->leveraged_years)},
                                  {"base_value", fin(rep.model->base_value)},
                                  {"supported_value", fin(rep.model->supported_value)},
                                  {"leveraged_value", fin(rep.model->leveraged_value)},
                                  {"extrapolated", rep.model->extrapolated}};
            } else {
                // no pay schedule supplied: emit leverage in years only
                double max_years = 0;
                for (double y : years) max_years = std::max(max_years, y);
                json agents = json::array();
                std::vector<double> lev;
                for (const auto& a : supported) {
                    auto eq = equivalent_experience(fit_acc, fit_conf, a.supported_accuracy,
                                                    a.supported_confidence, max_years);
                    lev.push_back(eq.years - a.actual_years);
                    agents.push_back({{"agent_id", a.agent_id},
                                      {"actual_years", fin(a.actual_years)},
                                      {"equivalent_years", fin(eq.years)},
                                      {"leveraged_years", fin(eq.years - a.actual_years)},
                                      {"cumulative_value", nullptr},
                                      {"leveraged_value", nullptr},
                                      {"extrapolated", eq.extrapolated}});
                }
                j["agents"] = std::move(agents);
                std::sort(lev.begin(), lev.end());
                if (!lev.empty()) {
                    auto q = [&](double p) {
                        double pos = p * double(lev.size() - 1);
                        std::size_t lo = std::size_t(pos);
                        std::size_t hi = std::min(lo + 1, lev.size() - 1);
                        return lev[lo] * (1 - (pos - double(lo))) + lev[hi] * (pos - double(lo));
                    };
                    j["median_leveraged_years"] = fin(q(0.5));
                    j["iqr_leveraged_years"] = json::array({fin(q(0.25)), fin(q(0.75))});
                }
                j["median_leveraged_value"] = nullptr;
                j["value_unavailable_reason"] = "no_pay_schedule";
                if (model_metrics) {
                    auto base = equivalent_experience(fit_acc, fit_conf,
                                                      model_metrics->base_accuracy,
                                                      model_metrics->base_confidence, max_years);
                    auto sup = equivalent_experience(fit_acc, fit_conf,
                                                     model_metrics->supported_accuracy,
                                                     model_metrics->supported_confidence,
                                                     max_years);
                    j["model"] = {{"base_years", fin(base.years)},
                                  {"supported_years", fin(sup.years)},
                                  {"leveraged_years", fin(sup.years - base.years)},
                                  {"base_value", nullptr},
                                  {"supported_value", nullptr},
                                  {"leveraged_value", nullptr},
                                  {"extrapolated", base.extrapolated || sup.extrapolated}};
                }
            }

            // experience-accuracy scatter with the fitted line
            svg::Plot plot("Experience vs unassisted accuracy", "years of experience", "accuracy");
            svg::Series pts{"readers", "#1f77b4", true, years, acc_un};
            plot.add(std::move(pts));
            if (!years.empty()) {
                double lo = *std::min_element(years.begin(), years.end());
                double hi = *std::max_element(years.begin(), years.end());
                svg::Series line{"fit", "#d62728", false,
                                 {lo, hi},
                                 {fit_acc.beta0 + fit_acc.beta1 * lo,
                                  fit_acc.beta0 + fit_acc.beta1 * hi}};
                plot.add(std::move(line));
            }
            plot.save((out_dir / "plots" / "experience_accuracy.svg").string());
        } catch (const Error& e) {
            record("economics", e, errors);
        }
        j["errors"] = errors;
        write_json(out_dir / "economics.json", j);
    }

    // ---- model curves ----------------------------------------------------
    {
        try {
            if (!loaded.has_model_outputs)
                throw MissingModelOutput("model_outputs.csv is missing");
            std::vector<double> scores;
            std::vector<bool> truths;
            for (const auto& mo : log.model_outputs) {
                scores.push_back(mo.p_model);
                truths.push_back(log.find_case(mo.case_id)->ground_truth);
            }
            auto rc = roc(scores, truths);
            auto pc = prc(scores, truths);
            std::vector<std::vector<std::string>> rrows, prows;
            for (std::size_t i = 0; i < rc.x.size(); ++i)
                rrows.push_back({detail::fmt(rc.threshold[i]), detail::fmt(rc.x[i]),
                                 detail::fmt(rc.y[i])});
            for (std::size_t i = 0; i < pc.x.size(); ++i)
                prows.push_back({detail::fmt(pc.threshold[i]), detail::fmt(pc.x[i]),
                                 detail::fmt(pc.y[i])});
            detail::write_csv_rows(out_dir / "curves" / "roc_model.csv",
                                   {"threshold", "fpr", "tpr"}, rrows);
            detail::write_csv_rows(out_dir / "curves" / "prc_model.csv",
                                   {"threshold", "recall", "precision"}, prows);

            svg::Plot rplot("Model ROC (AUROC " + detail::fmt(rc.area) + ")",
                            "false positive rate", "true positive rate");
            rplot.set_range(0, 1, 0, 1);
            rplot.add_diagonal();
            rplot.add({"model", "#1f77b4", false, rc.x, rc.y});
            rplot.save((out_dir / "plots" / "roc_model.svg").string());

            svg::Plot pplot("Model PRC (AP " + detail::fmt(pc.area) + ")", "recall", "precision");
            pplot.set_range(0, 1, 0, 1);
            pplot.add({"model", "#1f77b4", false, pc.x, pc.y});
            pplot.save((out_dir / "plots" / "prc_model.svg").string());
        } catch (const Error& e) {
            result.section_errors["curves.model"] = e.what();
        }
    }

    write_sidecar_manifest(out_dir, m, 1, start, std::chrono::system_clock::now());
    return result;
}

}  // namespace crossfuse::pipeline
