#pragma once

#include "qabench/corpus.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace qabench::test {

inline std::filesystem::path data_path(const std::string& name)
{
    return std::filesystem::path(QABENCH_TEST_DATA_DIR) / name;
}

inline std::filesystem::path shipped_path(const std::string& name)
{
    return std::filesystem::path(QABENCH_DATA_DIR_FOR_TESTS) / name;
}

inline std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name)
{
    auto dir = std::filesystem::temp_directory_path() / ("qabench-test-" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline Corpus small_corpus(std::size_t n = 3)
{
    Corpus c;
    for (std::size_t i = 0; i < n; ++i) {
        c.documents.push_back({"d" + std::to_string(i + 1),
                               "The spike protein binds the ACE2 receptor. Fever and dry cough were common in "
                               "elderly patients. The incubation period was about five days in document " +
                                   std::to_string(i + 1) + ".",
                               {},
                               false});
    }
    return c;
}

} // namespace qabench::test
