#pragma once

#include <string_view>

namespace qabench::embedded {

// Copies of the files under data/, compiled in so the binaries work
// without the source tree.
extern const std::string_view general_purpose_config;
extern const std::string_view generation_prompt;
extern const std::string_view judge_prompt;

} // namespace qabench::embedded
