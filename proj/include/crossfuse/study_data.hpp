#pragma once

// Data model for multi-reader crossover study logs: CSV ingestion with
// validation, case allocation, overlap utilities.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "csv.hpp"
#include "errors.hpp"
#include "rng.hpp"

namespace crossfuse {

enum class Site { UK, USA, NL, SSA, SYNTH };
enum class Pathology {
    presurgical_glioma,
    postop_glioma,
    meningioma,
    metastasis,
    paediatric_glioma,
    synthetic
};
enum class ReaderKind { human, model };
enum class Arm { unassisted, assisted };
enum class Sex { M, F };

inline const char* to_string(Site s) {
    switch (s) {
        case Site::UK: return "UK";
        case Site::USA: return "USA";
        case Site::NL: return "NL";
        case Site::SSA: return "SSA";
        case Site::SYNTH: return "SYNTH";
    }
    return "?";
}
inline const char* to_string(Pathology p) {
    switch (p) {
        case Pathology::presurgical_glioma: return "presurgical_glioma";
        case Pathology::postop_glioma: return "postop_glioma";
        case Pathology::meningioma: return "meningioma";
        case Pathology::metastasis: return "metastasis";
        case Pathology::paediatric_glioma: return "paediatric_glioma";
        case Pathology::synthetic: return "synthetic";
    }
    return "?";
}
inline const char* to_string(ReaderKind k) { return k == ReaderKind::human ? "human" : "model"; }
inline const char* to_string(Arm a) { return a == Arm::unassisted ? "unassisted" : "assisted"; }
inline const char* to_string(Sex s) { return s == Sex::M ? "M" : "F"; }

struct CaseRecord {
    std::string case_id;
    Site site = Site::SYNTH;
    Pathology pathology = Pathology::synthetic;
    bool ground_truth = false;
    std::optional<double> lesion_volume_cm3;
    std::optional<double> age_years;
    std::optional<Sex> sex;
};

struct ReaderProfile {
    std::string reader_id;
    ReaderKind kind = ReaderKind::human;
    std::optional<double> years_experience;  // humans only
};

struct Assessment {
    std::string reader_id;
    std::string case_id;
    Arm arm = Arm::unassisted;
    bool prediction = false;
    double confidence = 1.0;  // Likert 1..10
    std::optional<double> image_quality;
    double response_time_s = 1.0;
};

struct ModelCaseOutput {
    std::string case_id;
    double p_model = 0.5;
    std::optional<double> dice_vs_truth;
};

struct StudyLog {
    std::vector<CaseRecord> cases;
    std::vector<ReaderProfile> readers;
    std::vector<ModelCaseOutput> model_outputs;
    std::vector<Assessment> assessments;
    std::uint64_t seed = 0;

    const CaseRecord* find_case(const std::string& id) const {
        auto it = case_index_.find(id);
        return it == case_index_.end() ? nullptr : &cases[it->second];
    }
    const ModelCaseOutput* find_model_output(const std::string& id) const {
        auto it = model_index_.find(id);
        return it == model_index_.end() ? nullptr : &model_outputs[it->second];
    }
    const ReaderProfile* find_reader(const std::string& id) const {
        auto it = reader_index_.find(id);
        return it == reader_index_.end() ? nullptr : &readers[it->second];
    }

    std::vector<const ReaderProfile*> humans() const {
        std::vector<const ReaderProfile*> out;
        for (const auto& r : readers)
            if (r.kind == ReaderKind::human) out.push_back(&r);
        return out;
    }
    const ReaderProfile* model_reader() const {
        for (const auto& r : readers)
            if (r.kind == ReaderKind::model) return &r;
        return nullptr;
    }

    std::vector<const Assessment*> assessments_of(const std::string& reader_id, Arm arm) const {
        std::vector<const Assessment*> out;
        for (const auto& a : assessments)
            if (a.reader_id == reader_id && a.arm == arm) out.push_back(&a);
        return out;
    }

    // case ids a reader reviewed (union over arms), sorted
    std::vector<std::string> case_set_of(const std::string& reader_id) const {
        std::set<std::string> ids;
        for (const auto& a : assessments)
            if (a.reader_id == reader_id) ids.insert(a.case_id);
        return {ids.begin(), ids.end()};
    }

    void reindex() {
        case_index_.clear();
        model_index_.clear();
        reader_index_.clear();
        for (std::size_t i = 0; i < cases.size(); ++i) case_index_[cases[i].case_id] = i;
        for (std::size_t i = 0; i < model_outputs.size(); ++i)
            model_index_[model_outputs[i].case_id] = i;
        for (std::size_t i = 0; i < readers.size(); ++i) reader_index_[readers[i].reader_id] = i;
    }

private:
    std::unordered_map<std::string, std::size_t> case_index_;
    std::unordered_map<std::string, std::size_t> model_index_;
    std::unordered_map<std::string, std::size_t> reader_index_;
};

// ---------------------------------------------------------------------------
// parsing helpers

namespace detail {

inline double parse_real(const std::string& s, std::size_t line, std::size_t col) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw MalformedRow("not a number: '" + s + "'", line, col);
    }
}

inline bool parse_bool01(const std::string& s, std::size_t line, std::size_t col) {
    if (s == "0") return false;
    if (s == "1") return true;
    throw MalformedRow("expected 0/1, got '" + s + "'", line, col);
}

inline Site parse_site(const std::string& s, std::size_t line, std::size_t col) {
    for (Site v : {Site::UK, Site::USA, Site::NL, Site::SSA, Site::SYNTH})
        if (s == to_string(v)) return v;
    throw MalformedRow("unknown site '" + s + "'", line, col);
}

inline Pathology parse_pathology(const std::string& s, std::size_t line, std::size_t col) {
    for (Pathology v :
         {Pathology::presurgical_glioma, Pathology::postop_glioma, Pathology::meningioma,
          Pathology::metastasis, Pathology::paediatric_glioma, Pathology::synthetic})
        if (s == to_string(v)) return v;
    throw MalformedRow("unknown pathology '" + s + "'", line, col);
}

inline Arm parse_arm(const std::string& s, std::size_t line, std::size_t col) {
    if (s == "unassisted") return Arm::unassisted;
    if (s == "assisted") return Arm::assisted;
    throw MalformedRow("unknown arm '" + s + "'", line, col);
}

inline ReaderKind parse_kind(const std::string& s, std::size_t line, std::size_t col) {
    if (s == "human") return ReaderKind::human;
    if (s == "model") return ReaderKind::model;
    throw MalformedRow("unknown reader kind '" + s + "'", line, col);
}

inline void expect_header(const csv::Row& row, const std::vector<std::string>& want,
                          const std::string& file) {
    if (row.fields != want) throw MalformedRow("unexpected header in " + file, row.line, 1);
}

inline void expect_width(const csv::Row& row, std::size_t want) {
    if (row.fields.size() != want)
        throw MalformedRow("expected " + std::to_string(want) + " fields, got " +
                               std::to_string(row.fields.size()),
                           row.line, row.fields.size() + 1);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// validation

inline void validate_study(const StudyLog& log) {
    {
        std::unordered_set<std::string> seen;
        for (const auto& c : log.cases) {
            if (!seen.insert(c.case_id).second)
                throw DuplicateKey("duplicate case_id '" + c.case_id + "'");
            if (c.lesion_volume_cm3 && *c.lesion_volume_cm3 < 0)
                throw RangeViolation("lesion_volume_cm3 < 0 for case " + c.case_id);
            if (c.age_years && *c.age_years < 0)
                throw RangeViolation("age_years < 0 for case " + c.case_id);
        }
    }
    {
        std::unordered_set<std::string> seen;
        int models = 0;
        for (const auto& r : log.readers) {
            if (!seen.insert(r.reader_id).second)
                throw DuplicateKey("duplicate reader_id '" + r.reader_id + "'");
            if (r.kind == ReaderKind::model) ++models;
            if ((r.kind == ReaderKind::human) != r.years_experience.has_value())
                throw RangeViolation("years_experience must be present iff kind=human (reader " +
                                     r.reader_id + ")");
            if (r.years_experience && *r.years_experience < 0)
                throw RangeViolation("years_experience < 0 for reader " + r.reader_id);
        }
        if (models != 1)
            throw RangeViolation("exactly one model reader required, found " +
                                 std::to_string(models));
    }
    {
        std::unordered_set<std::string> seen;
        for (const auto& m : log.model_outputs) {
            if (!seen.insert(m.case_id).second)
                throw DuplicateKey("duplicate model output for case '" + m.case_id + "'");
            if (m.p_model < 0.0 || m.p_model > 1.0)
                throw RangeViolation("p_model outside [0,1] for case " + m.case_id);
            if (m.dice_vs_truth && (*m.dice_vs_truth < 0.0 || *m.dice_vs_truth > 1.0))
                throw RangeViolation("dice_vs_truth outside [0,1] for case " + m.case_id);
            if (!log.find_case(m.case_id))
                throw DanglingReference("model output references unknown case '" + m.case_id + "'");
        }
    }
    std::set<std::tuple<std::string, std::string, Arm>> keys;
    std::map<std::string, std::set<std::string>> human_cases_by_arm[2];
    for (const auto& a : log.assessments) {
        const ReaderProfile* r = log.find_reader(a.reader_id);
        if (!r) throw DanglingReference("assessment references unknown reader '" + a.reader_id + "'");
        if (!log.find_case(a.case_id))
            throw DanglingReference("assessment references unknown case '" + a.case_id + "'");
        if (!keys.insert({a.reader_id, a.case_id, a.arm}).second)
            throw DuplicateKey("duplicate assessment (" + a.reader_id + ", " + a.case_id + ", " +
                               to_string(a.arm) + ")");
        if (a.confidence < 1.0 || a.confidence > 10.0)
            throw RangeViolation("confidence outside [1,10] for (" + a.reader_id + ", " +
                                 a.case_id + ")");
        if (a.image_quality && (*a.image_quality < 1.0 || *a.image_quality > 10.0))
            throw RangeViolation("image_quality outside [1,10] for (" + a.reader_id + ", " +
                                 a.case_id + ")");
        if (!(a.response_time_s > 0.0))
            throw RangeViolation("response_time_s must be positive for (" + a.reader_id + ", " +
                                 a.case_id + ")");
        if (r->kind == ReaderKind::human) {
            human_cases_by_arm[static_cast<int>(a.arm)][a.reader_id].insert(a.case_id);
            if (!log.find_model_output(a.case_id))
                throw DanglingReference("human-reviewed case '" + a.case_id +
                                        "' has no model output");
        }
    }
    // crossover: equal case sets across arms per human
    for (const auto& [rid, unassisted] : human_cases_by_arm[0]) {
        auto it = human_cases_by_arm[1].find(rid);
        const std::set<std::string> empty;
        const auto& assisted = it == human_cases_by_arm[1].end() ? empty : it->second;
        if (unassisted != assisted)
            throw RangeViolation("reader " + rid + " has unequal case sets across arms");
    }
    for (const auto& [rid, assisted] : human_cases_by_arm[1])
        if (!human_cases_by_arm[0].count(rid))
            throw RangeViolation("reader " + rid + " has unequal case sets across arms");
}

// ---------------------------------------------------------------------------
// load / save

namespace detail {

inline std::vector<CaseRecord> read_cases(const std::string& path) {
    auto rows = csv::parse_file(path);
    if (rows.empty()) throw MalformedRow("empty file " + path, 1, 1);
    expect_header(rows[0],
                  {"case_id", "site", "pathology", "ground_truth", "lesion_volume_cm3",
                   "age_years", "sex"},
                  path);
    std::vector<CaseRecord> out;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        expect_width(r, 7);
        CaseRecord c;
        c.case_id = r.fields[0];
        c.site = parse_site(r.fields[1], r.line, 2);
        c.pathology = parse_pathology(r.fields[2], r.line, 3);
        c.ground_truth = parse_bool01(r.fields[3], r.line, 4);
        if (!r.fields[4].empty()) c.lesion_volume_cm3 = parse_real(r.fields[4], r.line, 5);
        if (!r.fields[5].empty()) c.age_years = parse_real(r.fields[5], r.line, 6);
        if (!r.fields[6].empty()) {
            if (r.fields[6] == "M") c.sex = Sex::M;
            else if (r.fields[6] == "F") c.sex = Sex::F;
            else throw MalformedRow("unknown sex '" + r.fields[6] + "'", r.line, 7);
        }
        out.push_back(std::move(c));
    }
    return out;
}

inline std::vector<ReaderProfile> read_readers(const std::string& path) {
    auto rows = csv::parse_file(path);
    if (rows.empty()) throw MalformedRow("empty file " + path, 1, 1);
    expect_header(rows[0], {"reader_id", "kind", "years_experience"}, path);
    std::vector<ReaderProfile> out;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        expect_width(r, 3);
        ReaderProfile p;
        p.reader_id = r.fields[0];
        p.kind = parse_kind(r.fields[1], r.line, 2);
        if (!r.fields[2].empty()) p.years_experience = parse_real(r.fields[2], r.line, 3);
        out.push_back(std::move(p));
    }
    return out;
}

inline std::vector<ModelCaseOutput> read_model_outputs(const std::string& path) {
    auto rows = csv::parse_file(path);
    if (rows.empty()) throw MalformedRow("empty file " + path, 1, 1);
    expect_header(rows[0], {"case_id", "p_model", "dice_vs_truth"}, path);
    std::vector<ModelCaseOutput> out;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        expect_width(r, 3);
        ModelCaseOutput m;
        m.case_id = r.fields[0];
        m.p_model = parse_real(r.fields[1], r.line, 2);
        if (!r.fields[2].empty()) m.dice_vs_truth = parse_real(r.fields[2], r.line, 3);
        out.push_back(std::move(m));
    }
    return out;
}

inline std::vector<Assessment> read_assessments(const std::string& path) {
    auto rows = csv::parse_file(path);
    if (rows.empty()) throw MalformedRow("empty file " + path, 1, 1);
    expect_header(rows[0],
                  {"reader_id", "case_id", "arm", "prediction", "confidence", "image_quality",
                   "response_time_s"},
                  path);
    std::vector<Assessment> out;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        expect_width(r, 7);
        Assessment a;
        a.reader_id = r.fields[0];
        a.case_id = r.fields[1];
        a.arm = parse_arm(r.fields[2], r.line, 3);
        a.prediction = parse_bool01(r.fields[3], r.line, 4);
        a.confidence = parse_real(r.fields[4], r.line, 5);
        if (!r.fields[5].empty()) a.image_quality = parse_real(r.fields[5], r.line, 6);
        a.response_time_s = parse_real(r.fields[6], r.line, 7);
        out.push_back(std::move(a));
    }
    return out;
}

}  // namespace detail

inline StudyLog load_study(const std::string& cases_path, const std::string& assessments_path,
                           const std::string& model_outputs_path, const std::string& readers_path) {
    StudyLog log;
    log.cases = detail::read_cases(cases_path);
    log.readers = detail::read_readers(readers_path);
    log.model_outputs = detail::read_model_outputs(model_outputs_path);
    log.assessments = detail::read_assessments(assessments_path);
    log.reindex();
    validate_study(log);
    return log;
}

namespace detail {

inline std::string fmt_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}
inline std::string fmt_opt(const std::optional<double>& v) {
    return v ? fmt_real(*v) : std::string();
}

}  // namespace detail

inline void save_study(const StudyLog& log, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "cases.csv", std::ios::binary);
        csv::write_row(out, {"case_id", "site", "pathology", "ground_truth", "lesion_volume_cm3",
                             "age_years", "sex"});
        for (const auto& c : log.cases)
            csv::write_row(out, {c.case_id, to_string(c.site), to_string(c.pathology),
                                 c.ground_truth ? "1" : "0", detail::fmt_opt(c.lesion_volume_cm3),
                                 detail::fmt_opt(c.age_years),
                                 c.sex ? to_string(*c.sex) : std::string()});
    }
    {
        std::ofstream out(dir / "readers.csv", std::ios::binary);
        csv::write_row(out, {"reader_id", "kind", "years_experience"});
        for (const auto& r : log.readers)
            csv::write_row(out, {r.reader_id, to_string(r.kind), detail::fmt_opt(r.years_experience)});
    }
    {
        std::ofstream out(dir / "model_outputs.csv", std::ios::binary);
        csv::write_row(out, {"case_id", "p_model", "dice_vs_truth"});
        for (const auto& m : log.model_outputs)
            csv::write_row(out, {m.case_id, detail::fmt_real(m.p_model),
                                 detail::fmt_opt(m.dice_vs_truth)});
    }
    {
        std::ofstream out(dir / "assessments.csv", std::ios::binary);
        csv::write_row(out, {"reader_id", "case_id", "arm", "prediction", "confidence",
                             "image_quality", "response_time_s"});
        for (const auto& a : log.assessments)
            csv::write_row(out, {a.reader_id, a.case_id, to_string(a.arm),
                                 a.prediction ? "1" : "0", detail::fmt_real(a.confidence),
                                 detail::fmt_opt(a.image_quality),
                                 detail::fmt_real(a.response_time_s)});
    }
}

inline StudyLog load_study_dir(const std::filesystem::path& dir) {
    return load_study((dir / "cases.csv").string(), (dir / "assessments.csv").string(),
                      (dir / "model_outputs.csv").string(), (dir / "readers.csv").string());
}

// ---------------------------------------------------------------------------
// study-design utilities

// Each reader draws per_reader cases, exactly half enhancing, without
// replacement within a reader and independently (with replacement) across
// readers. Deterministic given rng_seed.
inline std::vector<std::vector<std::string>> assign_cases(const std::vector<CaseRecord>& pool,
                                                          std::size_t n_readers,
                                                          std::size_t per_reader,
                                                          std::uint64_t rng_seed) {
    if (n_readers == 0 || per_reader == 0) throw RangeViolation("n_readers/per_reader must be positive");
    if (per_reader % 2 != 0) throw OddAllocation("per_reader must be even, got " +
                                                 std::to_string(per_reader));
    std::vector<std::string> pos, neg;
    for (const auto& c : pool) (c.ground_truth ? pos : neg).push_back(c.case_id);
    const std::size_t half = per_reader / 2;
    if (pos.size() < half)
        throw InsufficientPool("only " + std::to_string(pos.size()) + " enhancing cases, need " +
                               std::to_string(half));
    if (neg.size() < half)
        throw InsufficientPool("only " + std::to_string(neg.size()) + " nonenhancing cases, need " +
                               std::to_string(half));

    std::vector<std::vector<std::string>> out(n_readers);
    for (std::size_t r = 0; r < n_readers; ++r) {
        Rng rng(mix_seed(rng_seed, 0xA551671ULL, r));
        std::vector<std::string> picked;
        for (auto idx : rng.sample_without_replacement(pos.size(), half))
            picked.push_back(pos[idx]);
        for (auto idx : rng.sample_without_replacement(neg.size(), half))
            picked.push_back(neg[idx]);
        rng.shuffle(picked);
        out[r] = std::move(picked);
    }
    return out;
}

// Shared-case sets per reader pair. Human pairs intersect their case sets;
// the model pairs with each human over that human's full set.
inline std::map<std::pair<std::string, std::string>, std::set<std::string>> pairwise_overlap(
    const StudyLog& log) {
    std::map<std::string, std::set<std::string>> sets;
    for (const auto* h : log.humans()) {
        auto v = log.case_set_of(h->reader_id);
        sets[h->reader_id] = {v.begin(), v.end()};
    }
    std::map<std::pair<std::string, std::string>, std::set<std::string>> out;
    for (auto i = sets.begin(); i != sets.end(); ++i)
        for (auto j = std::next(i); j != sets.end(); ++j) {
            std::set<std::string> inter;
            std::set_intersection(i->second.begin(), i->second.end(), j->second.begin(),
                                  j->second.end(), std::inserter(inter, inter.begin()));
            out[{i->first, j->first}] = std::move(inter);
        }
    if (const ReaderProfile* m = log.model_reader())
        for (const auto& [rid, s] : sets) out[{rid, m->reader_id}] = s;
    return out;
}

inline bool detection_from_dice(double dice) {
    if (dice < 0.0 || dice > 1.0)
        throw RangeViolation("dice outside [0,1]: " + std::to_string(dice));
    return dice > 0.3;
}

}  // namespace crossfuse
