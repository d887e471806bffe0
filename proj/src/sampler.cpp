#include "qabench/sampler.hpp"

namespace qabench {

std::size_t select_category(std::span<const Category> categories, double u)
{
    double cumulative = 0.0;
    for (std::size_t i = 0; i + 1 < categories.size(); ++i) {
        cumulative += categories[i].probability;
        if (u < cumulative)
            return i;
    }
    return categories.empty() ? 0 : categories.size() - 1;
}

CategoryDraw draw_categories(const GenerationConfig& cfg, Rng& rng)
{
    CategoryDraw draw;
    auto pick = [&](const std::vector<Categorization>& list, std::vector<CategoryPick>& out) {
        out.reserve(list.size());
        for (const auto& c : list)
            out.push_back({c.name, c.categories[select_category(c.categories, rng.uniform01())]});
    };
    pick(cfg.user_categorizations, draw.user_picks);
    pick(cfg.question_categorizations, draw.question_picks);
    return draw;
}

} // namespace qabench
