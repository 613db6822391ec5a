#pragma once

// Shared fixtures for the test suites.

#include <filesystem>
#include <fstream>
#include <string>

#include <crossfuse/study_data.hpp>

namespace cf_test {

inline std::filesystem::path temp_dir(const std::string& tag) {
    auto p = std::filesystem::temp_directory_path() / ("crossfuse_test_" + tag);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

// 2 cases, 1 human reader + model, 4 assessments (both arms for each case)
inline std::filesystem::path tiny_study_dir(const std::string& tag) {
    auto dir = temp_dir(tag);
    write_file(dir / "cases.csv",
               "case_id,site,pathology,ground_truth,lesion_volume_cm3,age_years,sex\n"
               "c1,UK,presurgical_glioma,1,4.2,61,M\n"
               "c2,SYNTH,synthetic,0,,,\n");
    write_file(dir / "readers.csv",
               "reader_id,kind,years_experience\n"
               "r1,human,8\n"
               "model,model,\n");
    write_file(dir / "model_outputs.csv",
               "case_id,p_model,dice_vs_truth\n"
               "c1,0.9,0.65\n"
               "c2,0.2,0\n");
    write_file(dir / "assessments.csv",
               "reader_id,case_id,arm,prediction,confidence,image_quality,response_time_s\n"
               "r1,c1,unassisted,1,8,7,41.5\n"
               "r1,c2,unassisted,0,6,8,33.0\n"
               "r1,c1,assisted,1,9,7,28.0\n"
               "r1,c2,assisted,0,7,8,21.0\n");
    return dir;
}

inline crossfuse::StudyLog tiny_study(const std::string& tag) {
    return crossfuse::load_study_dir(tiny_study_dir(tag));
}

}  // namespace cf_test
