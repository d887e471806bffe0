#include "qabench/prompt.hpp"

#include "embedded_data.hpp"
#include "qabench/error.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace qabench {

struct TextTemplate::Node {
    enum class Kind { text, variable, section, each } kind = Kind::text;
    std::string text;  // literal text, or the tag name
    std::vector<Node> children;
};

namespace {

using Node = TextTemplate::Node;

std::vector<Node> parse_nodes(std::string_view src, std::size_t& pos, const std::string& closing)
{
    std::vector<Node> out;
    while (pos < src.size()) {
        const auto open = src.find("{{", pos);
        if (open == std::string_view::npos) {
            out.push_back({Node::Kind::text, std::string(src.substr(pos)), {}});
            pos = src.size();
            break;
        }
        if (open > pos)
            out.push_back({Node::Kind::text, std::string(src.substr(pos, open - pos)), {}});
        const auto close = src.find("}}", open + 2);
        if (close == std::string_view::npos)
            throw ParseError(fmt::format("template: unterminated tag at byte {}", open), open);
        const std::string_view tag = src.substr(open + 2, close - open - 2);
        pos = close + 2;
        if (tag.empty())
            throw ParseError(fmt::format("template: empty tag at byte {}", open), open);

        if (tag.front() == '/') {
            if (tag.substr(1) != closing)
                throw ParseError(fmt::format("template: unexpected closing tag {{{{{}}}}} at byte {}", tag, open), open);
            return out;
        }
        if (tag.front() == '#') {
            const std::string name(tag.substr(1));
            if (name.empty())
                throw ParseError(fmt::format("template: unnamed section at byte {}", open), open);
            Node n{name == "each" ? Node::Kind::each : Node::Kind::section, name, {}};
            n.children = parse_nodes(src, pos, name);
            out.push_back(std::move(n));
            continue;
        }
        if (tag == "each")
            throw ParseError(fmt::format("template: {{{{each}}}} must be opened with '#' (byte {})", open), open);
        out.push_back({Node::Kind::variable, std::string(tag), {}});
    }
    if (!closing.empty())
        throw ParseError(fmt::format("template: section \"{}\" is never closed", closing), src.size());
    return out;
}

struct RenderState {
    const TemplateContext& ctx;
    const std::vector<std::string>* list = nullptr;
    const std::string* item = nullptr;
};

void render_nodes(const std::vector<Node>& nodes, RenderState state, std::string& out)
{
    for (const auto& n : nodes) {
        switch (n.kind) {
        case Node::Kind::text:
            out += n.text;
            break;
        case Node::Kind::variable:
            if (n.text == "description" && state.item) {
                out += *state.item;
            }
            else if (auto it = state.ctx.values.find(n.text); it != state.ctx.values.end()) {
                out += it->second;
            }
            else {
                throw Error(fmt::format("template: no value for {{{{{}}}}}", n.text));
            }
            break;
        case Node::Kind::section:
            if (auto it = state.ctx.lists.find(n.text); it != state.ctx.lists.end()) {
                if (!it->second.empty()) {
                    RenderState inner = state;
                    inner.list = &it->second;
                    render_nodes(n.children, inner, out);
                }
            }
            else if (auto f = state.ctx.flags.find(n.text); f != state.ctx.flags.end()) {
                if (f->second)
                    render_nodes(n.children, state, out);
            }
            else {
                throw Error(fmt::format("template: unknown section \"{}\"", n.text));
            }
            break;
        case Node::Kind::each:
            if (!state.list)
                throw Error("template: {{#each}} outside a list section");
            for (const auto& item : *state.list) {
                RenderState inner = state;
                inner.item = &item;
                render_nodes(n.children, inner, out);
            }
            break;
        }
    }
}

} // namespace

TextTemplate TextTemplate::parse(std::string_view source)
{
    std::size_t pos = 0;
    TextTemplate t;
    t.nodes_ = std::make_shared<const std::vector<Node>>(parse_nodes(source, pos, ""));
    return t;
}

TextTemplate TextTemplate::load(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError(fmt::format("cannot read template {}", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

std::string TextTemplate::render(const TemplateContext& ctx) const
{
    std::string out;
    if (nodes_)
        render_nodes(*nodes_, RenderState{ctx}, out);
    return out;
}

const TextTemplate& default_generation_template()
{
    static const TextTemplate t = TextTemplate::parse(embedded::generation_prompt);
    return t;
}

const TextTemplate& default_judge_template()
{
    static const TextTemplate t = TextTemplate::parse(embedded::judge_prompt);
    return t;
}

TemplateContext draw_context(const CategoryDraw& draw)
{
    TemplateContext ctx;
    auto& users = ctx.lists["user_characteristics"];
    for (const auto& p : draw.user_picks)
        users.push_back(p.category.description);
    auto& questions = ctx.lists["question_characteristics"];
    for (const auto& p : draw.question_picks)
        questions.push_back(p.category.description);
    ctx.flags["any_characteristics"] = !draw.empty();
    return ctx;
}

PromptInstance render_prompt(const CategoryDraw& draw, const Document& doc, int k, const TextTemplate& tmpl)
{
    if (k < 1)
        throw Error(fmt::format("render_prompt: k must be at least 1, got {}", k));
    auto ctx = draw_context(draw);
    ctx.values["num_questions"] = std::to_string(k);
    ctx.values["document"] = doc.text;
    return PromptInstance{tmpl.render(ctx), k, doc.id, draw};
}

} // namespace qabench
