#pragma once

#include "qabench/corpus.hpp"
#include "qabench/sampler.hpp"

#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace qabench {

/// Values available to a TextTemplate.
///
/// `{{name}}` substitutes values[name]. `{{#name}}...{{/name}}` renders its
/// body once when lists[name] is non-empty or flags[name] is true.
/// `{{#each}}...{{/each}}` repeats its body for every item of the innermost
/// enclosing list section, with `{{description}}` bound to the item.
struct TemplateContext {
    std::map<std::string, std::string> values;
    std::map<std::string, std::vector<std::string>> lists;
    std::map<std::string, bool> flags;
};

class TextTemplate {
public:
    /// Throws ParseError on unbalanced or malformed tags.
    static TextTemplate parse(std::string_view source);
    static TextTemplate load(const std::filesystem::path& path);

    /// Single pass: substituted values are never re-scanned for tags.
    /// Throws Error on names missing from the context.
    std::string render(const TemplateContext& ctx) const;

    struct Node;

private:
    std::shared_ptr<const std::vector<Node>> nodes_;
};

const TextTemplate& default_generation_template();
const TextTemplate& default_judge_template();

struct PromptInstance {
    std::string text;
    int num_questions = 0;
    std::string document_id;
    CategoryDraw draw;
};

/// Fills the generation template. Only category descriptions reach the
/// prompt; a side with no picks loses its whole characteristics section.
PromptInstance render_prompt(const CategoryDraw& draw, const Document& doc, int k,
                             const TextTemplate& tmpl = default_generation_template());

/// Context shared by the generation and judge templates.
TemplateContext draw_context(const CategoryDraw& draw);

} // namespace qabench
