#pragma once

#include "qabench/config.hpp"
#include "qabench/rng.hpp"

#include <span>
#include <string>
#include <vector>

namespace qabench {

struct CategoryPick {
    std::string categorization;
    Category category;

    bool operator==(const CategoryPick&) const = default;
};

/// One category per categorization, in config order.
struct CategoryDraw {
    std::vector<CategoryPick> user_picks;
    std::vector<CategoryPick> question_picks;

    bool empty() const noexcept { return user_picks.empty() && question_picks.empty(); }
    bool operator==(const CategoryDraw&) const = default;
};

/// Index of the category selected by `u` in [0,1) under the cumulative
/// distribution of `categories`. The last category absorbs rounding slack.
std::size_t select_category(std::span<const Category> categories, double u);

/// Consumes exactly one uniform per categorization: user categorizations
/// first, then question categorizations, each in config order.
CategoryDraw draw_categories(const GenerationConfig& cfg, Rng& rng);

} // namespace qabench
