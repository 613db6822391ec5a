#include <doctest.h>

#include <crossfuse/sim.hpp>
#include <crossfuse/study_data.hpp>

#include "helpers.hpp"

using namespace crossfuse;

TEST_CASE("load_study accepts a minimal valid bundle") {
    auto log = cf_test::tiny_study("load_ok");
    CHECK(log.cases.size() == 2);
    CHECK(log.readers.size() == 2);
    CHECK(log.assessments.size() == 4);
    CHECK(log.find_case("c1")->ground_truth);
    CHECK(log.find_model_output("c2")->p_model == doctest::Approx(0.2));
    CHECK(log.find_reader("r1")->years_experience == doctest::Approx(8));
}

TEST_CASE("load_study rejects out-of-range confidence") {
    auto dir = cf_test::tiny_study_dir("load_conf");
    cf_test::write_file(dir / "assessments.csv",
                        "reader_id,case_id,arm,prediction,confidence,image_quality,response_time_s\n"
                        "r1,c1,unassisted,1,11,7,41.5\n"
                        "r1,c1,assisted,1,9,7,28.0\n");
    CHECK_THROWS_AS(load_study_dir(dir), RangeViolation);
}

TEST_CASE("load_study rejects dangling case reference") {
    auto dir = cf_test::tiny_study_dir("load_dangling");
    cf_test::write_file(dir / "assessments.csv",
                        "reader_id,case_id,arm,prediction,confidence,image_quality,response_time_s\n"
                        "r1,X9,unassisted,1,8,7,41.5\n"
                        "r1,X9,assisted,1,9,7,28.0\n");
    CHECK_THROWS_AS(load_study_dir(dir), DanglingReference);
}

TEST_CASE("load_study rejects duplicate assessment keys") {
    auto dir = cf_test::tiny_study_dir("load_dup");
    cf_test::write_file(dir / "assessments.csv",
                        "reader_id,case_id,arm,prediction,confidence,image_quality,response_time_s\n"
                        "r1,c1,unassisted,1,8,7,41.5\n"
                        "r1,c1,unassisted,0,3,7,12.0\n");
    CHECK_THROWS_AS(load_study_dir(dir), DuplicateKey);
}

TEST_CASE("load_study enforces equal case sets across arms") {
    auto dir = cf_test::tiny_study_dir("load_crossover");
    cf_test::write_file(dir / "assessments.csv",
                        "reader_id,case_id,arm,prediction,confidence,image_quality,response_time_s\n"
                        "r1,c1,unassisted,1,8,7,41.5\n"
                        "r1,c2,assisted,0,7,8,21.0\n");
    CHECK_THROWS_AS(load_study_dir(dir), RangeViolation);
}

TEST_CASE("malformed numeric field reports line and column") {
    auto dir = cf_test::tiny_study_dir("load_malformed");
    cf_test::write_file(dir / "model_outputs.csv",
                        "case_id,p_model,dice_vs_truth\n"
                        "c1,zebra,\n"
                        "c2,0.2,\n");
    try {
        load_study_dir(dir);
        FAIL("expected MalformedRow");
    } catch (const MalformedRow& e) {
        CHECK(e.line == 2);
        CHECK(e.column == 2);
    }
}

TEST_CASE("save/load round-trip preserves all records") {
    auto log = cf_test::tiny_study("roundtrip_a");
    auto dir = cf_test::temp_dir("roundtrip_b");
    save_study(log, dir);
    auto log2 = load_study_dir(dir);
    REQUIRE(log2.cases.size() == log.cases.size());
    REQUIRE(log2.assessments.size() == log.assessments.size());
    for (std::size_t i = 0; i < log.cases.size(); ++i) {
        CHECK(log2.cases[i].case_id == log.cases[i].case_id);
        CHECK(log2.cases[i].ground_truth == log.cases[i].ground_truth);
        CHECK(log2.cases[i].lesion_volume_cm3 == log.cases[i].lesion_volume_cm3);
        CHECK(log2.cases[i].sex == log.cases[i].sex);
    }
    for (std::size_t i = 0; i < log.assessments.size(); ++i) {
        CHECK(log2.assessments[i].reader_id == log.assessments[i].reader_id);
        CHECK(log2.assessments[i].confidence == log.assessments[i].confidence);
        CHECK(log2.assessments[i].response_time_s == log.assessments[i].response_time_s);
    }
    // second save is byte-identical
    auto dir2 = cf_test::temp_dir("roundtrip_c");
    save_study(log2, dir2);
    for (const char* f : {"cases.csv", "readers.csv", "model_outputs.csv", "assessments.csv"}) {
        std::ifstream a(dir / f, std::ios::binary), b(dir2 / f, std::ios::binary);
        std::string sa((std::istreambuf_iterator<char>(a)), {});
        std::string sb((std::istreambuf_iterator<char>(b)), {});
        CHECK(sa == sb);
    }
}

TEST_CASE("csv quoting survives commas and embedded quotes") {
    auto dir = cf_test::tiny_study_dir("csv_quotes");
    cf_test::write_file(dir / "cases.csv",
                        "case_id,site,pathology,ground_truth,lesion_volume_cm3,age_years,sex\n"
                        "\"c,1\",UK,presurgical_glioma,1,,,\n"
                        "\"c\"\"2\",SYNTH,synthetic,0,,,\n");
    cf_test::write_file(dir / "model_outputs.csv",
                        "case_id,p_model,dice_vs_truth\n"
                        "\"c,1\",0.9,\n"
                        "\"c\"\"2\",0.2,\n");
    cf_test::write_file(dir / "assessments.csv",
                        "reader_id,case_id,arm,prediction,confidence,image_quality,response_time_s\n"
                        "r1,\"c,1\",unassisted,1,8,,41.5\n"
                        "r1,\"c,1\",assisted,1,9,,28.0\n");
    auto log = load_study_dir(dir);
    CHECK(log.cases[0].case_id == "c,1");
    CHECK(log.cases[1].case_id == "c\"2");
    auto out = cf_test::temp_dir("csv_quotes_out");
    save_study(log, out);
    auto log2 = load_study_dir(out);
    CHECK(log2.cases[0].case_id == "c,1");
    CHECK(log2.cases[1].case_id == "c\"2");
}

TEST_CASE("assign_cases balances strata and is deterministic") {
    auto pool = generate_cohort(1109, 0.5, 7);
    auto lists = assign_cases(pool, 11, 100, 42);
    REQUIRE(lists.size() == 11);
    std::map<std::string, bool> truth;
    for (const auto& c : pool) truth[c.case_id] = c.ground_truth;
    for (const auto& l : lists) {
        CHECK(l.size() == 100);
        std::size_t pos = 0;
        std::set<std::string> uniq(l.begin(), l.end());
        CHECK(uniq.size() == 100);  // without replacement within a reader
        for (const auto& id : l)
            if (truth.at(id)) ++pos;
        CHECK(pos == 50);
    }
    auto lists2 = assign_cases(pool, 11, 100, 42);
    CHECK(lists == lists2);
    auto lists3 = assign_cases(pool, 11, 100, 43);
    CHECK(lists != lists3);
}

TEST_CASE("assign_cases forced allocation and error paths") {
    std::vector<CaseRecord> pool(2);
    pool[0].case_id = "p";
    pool[0].ground_truth = true;
    pool[1].case_id = "n";
    pool[1].ground_truth = false;
    auto lists = assign_cases(pool, 1, 2, 0);
    REQUIRE(lists.size() == 1);
    std::set<std::string> got(lists[0].begin(), lists[0].end());
    CHECK(got == std::set<std::string>{"p", "n"});

    CHECK_THROWS_AS(assign_cases(pool, 1, 3, 0), OddAllocation);

    std::vector<CaseRecord> short_pool;
    for (int i = 0; i < 40; ++i) {
        CaseRecord c;
        c.case_id = "p" + std::to_string(i);
        c.ground_truth = true;
        short_pool.push_back(c);
    }
    for (int i = 0; i < 100; ++i) {
        CaseRecord c;
        c.case_id = "n" + std::to_string(i);
        c.ground_truth = false;
        short_pool.push_back(c);
    }
    CHECK_THROWS_AS(assign_cases(short_pool, 1, 100, 0), InsufficientPool);
}

TEST_CASE("pairwise_overlap identity, disjoint, and paper-scale design") {
    // identical lists -> full overlap; disjoint -> zero
    auto dir = cf_test::tiny_study_dir("overlap");
    cf_test::write_file(dir / "readers.csv",
                        "reader_id,kind,years_experience\n"
                        "r1,human,8\nr2,human,12\nmodel,model,\n");
    cf_test::write_file(dir / "assessments.csv",
                        "reader_id,case_id,arm,prediction,confidence,image_quality,response_time_s\n"
                        "r1,c1,unassisted,1,8,,41.5\nr1,c1,assisted,1,9,,28.0\n"
                        "r2,c1,unassisted,1,8,,41.5\nr2,c1,assisted,1,9,,28.0\n");
    auto log = load_study_dir(dir);
    auto ov = pairwise_overlap(log);
    CHECK(ov.at({"r1", "r2"}).size() == 1);
    CHECK(ov.at({"r1", "model"}).size() == 1);

    // paper-scale: 11 readers x 100 cases from a 564-case pool
    auto pool = generate_cohort(564, 0.5, 11);
    auto lists = assign_cases(pool, 11, 100, 20240501);
    std::size_t min_overlap = SIZE_MAX, max_overlap = 0;
    for (std::size_t i = 0; i < lists.size(); ++i)
        for (std::size_t j = i + 1; j < lists.size(); ++j) {
            std::set<std::string> a(lists[i].begin(), lists[i].end());
            std::size_t shared = 0;
            for (const auto& id : lists[j])
                if (a.count(id)) ++shared;
            min_overlap = std::min(min_overlap, shared);
            max_overlap = std::max(max_overlap, shared);
        }
    CHECK(min_overlap >= 1);
    CHECK(max_overlap <= 100);
}

TEST_CASE("detection_from_dice threshold is strict") {
    CHECK(detection_from_dice(0.31));
    CHECK_FALSE(detection_from_dice(0.3));
    CHECK_FALSE(detection_from_dice(0.0));
    CHECK(detection_from_dice(1.0));
    CHECK_THROWS_AS(detection_from_dice(-0.1), RangeViolation);
    CHECK_THROWS_AS(detection_from_dice(1.1), RangeViolation);
    // monotone nondecreasing
    bool prev = false;
    for (double d = 0.0; d <= 1.0; d += 0.01) {
        bool v = detection_from_dice(d);
        CHECK(v >= prev);
        prev = v;
    }
}
