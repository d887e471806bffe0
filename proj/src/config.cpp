#include "qabench/config.hpp"

#include "embedded_data.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace qabench {

namespace {

using json = nlohmann::json;

std::string trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r\n\f\v");
    if (first == std::string_view::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r\n\f\v");
    return std::string(s.substr(first, last - first + 1));
}

std::string format_probability(double p)
{
    return fmt::format("{:.10g}", p);
}

class Parser {
public:
    std::vector<Diagnostic> diagnostics;

    void error(std::string path, std::string message)
    {
        diagnostics.push_back({Severity::error, std::move(path), std::move(message)});
    }

    bool check_keys(const json& obj, const std::string& path, std::initializer_list<std::string_view> allowed)
    {
        bool ok = true;
        for (const auto& [key, value] : obj.items()) {
            bool known = false;
            for (auto a : allowed)
                known = known || key == a;
            if (!known) {
                error(path.empty() ? key : path + "." + key, fmt::format("unknown field \"{}\"", key));
                ok = false;
            }
        }
        return ok;
    }

    std::optional<std::string> string_field(const json& obj, const std::string& path, const char* key)
    {
        auto it = obj.find(key);
        const std::string here = path + "." + key;
        if (it == obj.end()) {
            error(here, fmt::format("missing required field \"{}\"", key));
            return std::nullopt;
        }
        if (!it->is_string()) {
            error(here, "expected a string");
            return std::nullopt;
        }
        return it->get<std::string>();
    }

    Categorization categorization(const json& j, const std::string& path, CategorizationKind kind)
    {
        Categorization out;
        out.kind = kind;
        if (!j.is_object()) {
            error(path, "expected an object");
            return out;
        }
        check_keys(j, path, {"name", "kind", "categories"});
        if (auto name = string_field(j, path, "name"))
            out.name = *name;
        if (auto it = j.find("kind"); it != j.end()) {
            if (!it->is_string() || it->get<std::string>() != to_string(kind))
                error(path + ".kind", fmt::format("kind must be \"{}\" in this list", to_string(kind)));
        }
        auto cats = j.find("categories");
        if (cats == j.end() || !cats->is_array()) {
            error(path + ".categories", "expected an array of categories");
            return out;
        }

        std::vector<bool> specified;
        for (std::size_t i = 0; i < cats->size(); ++i) {
            const json& c = (*cats)[i];
            const std::string cpath = fmt::format("{}.categories[{}]", path, i);
            Category cat;
            bool has_probability = false;
            if (!c.is_object()) {
                error(cpath, "expected an object");
            }
            else {
                check_keys(c, cpath, {"name", "probability", "description"});
                if (auto name = string_field(c, cpath, "name"))
                    cat.name = *name;
                if (auto d = string_field(c, cpath, "description"))
                    cat.description = *d;
                if (auto p = c.find("probability"); p != c.end()) {
                    if (!p->is_number())
                        error(cpath + ".probability", "expected a number");
                    else {
                        cat.probability = p->get<double>();
                        has_probability = true;
                    }
                }
            }
            out.categories.push_back(std::move(cat));
            specified.push_back(has_probability);
        }
        fill_probabilities(out, specified, path);
        return out;
    }

    void fill_probabilities(Categorization& c, const std::vector<bool>& specified, const std::string& path)
    {
        double sum = 0.0;
        std::size_t missing = 0;
        for (std::size_t i = 0; i < c.categories.size(); ++i) {
            if (specified[i])
                sum += c.categories[i].probability;
            else
                ++missing;
        }
        if (missing == 0)
            return;
        const double residual = 1.0 - sum;
        if (residual <= kProbabilityTolerance) {
            error(path, fmt::format("categorization \"{}\": specified probabilities sum to {}, leaving no mass for {} "
                                    "unspecified categor{}",
                                    c.name, format_probability(sum), missing, missing == 1 ? "y" : "ies"));
            return;
        }
        for (std::size_t i = 0; i < c.categories.size(); ++i)
            if (!specified[i])
                c.categories[i].probability = residual / static_cast<double>(missing);
    }

    void categorization_list(const json& root, const char* key, CategorizationKind kind,
                             std::vector<Categorization>& out)
    {
        auto it = root.find(key);
        if (it == root.end())
            return;
        if (!it->is_array()) {
            error(key, "expected an array of categorizations");
            return;
        }
        for (std::size_t i = 0; i < it->size(); ++i)
            out.push_back(categorization((*it)[i], fmt::format("{}[{}]", key, i), kind));
    }
};

void throw_if_errors(const std::vector<Diagnostic>& diags)
{
    for (const auto& d : diags)
        if (d.severity == Severity::error)
            throw ConfigError(diags);
}

} // namespace

std::string_view to_string(CategorizationKind kind)
{
    return kind == CategorizationKind::user ? "user" : "question";
}

std::string format_diagnostic(const Diagnostic& d)
{
    return fmt::format("{}: {}: {}", d.severity == Severity::error ? "error" : "warning",
                       d.path.empty() ? "<root>" : d.path, d.message);
}

ConfigError::ConfigError(std::vector<Diagnostic> diagnostics)
    : Error([&] {
          std::string msg = "invalid configuration";
          for (const auto& d : diagnostics)
              msg += "\n  " + format_diagnostic(d);
          return msg;
      }()),
      diagnostics_(std::move(diagnostics))
{
}

GenerationConfig parse_config(std::string_view raw)
{
    json root;
    try {
        root = json::parse(raw.begin(), raw.end());
    }
    catch (const json::parse_error& e) {
        throw ParseError(fmt::format("config: malformed JSON at byte {}: {}", e.byte, e.what()), e.byte);
    }

    Parser p;
    GenerationConfig cfg;
    if (!root.is_object()) {
        p.error("", "top level must be a JSON object");
        throw ConfigError(p.diagnostics);
    }
    p.check_keys(root, "", {"user_categorizations", "question_categorizations", "num_candidates", "seed"});
    p.categorization_list(root, "user_categorizations", CategorizationKind::user, cfg.user_categorizations);
    p.categorization_list(root, "question_categorizations", CategorizationKind::question,
                          cfg.question_categorizations);
    if (auto it = root.find("num_candidates"); it != root.end()) {
        if (!it->is_number_integer())
            p.error("num_candidates", "expected an integer");
        else
            cfg.num_candidates = it->get<int>();
    }
    if (auto it = root.find("seed"); it != root.end()) {
        if (!it->is_number_integer())
            p.error("seed", "expected an integer");
        else if (it->is_number_unsigned())
            cfg.seed = it->get<std::uint64_t>();
        else
            cfg.seed = static_cast<std::uint64_t>(it->get<std::int64_t>());
    }
    throw_if_errors(p.diagnostics);

    auto diags = validate_config(cfg);
    throw_if_errors(diags);
    return cfg;
}

GenerationConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError(fmt::format("cannot read config file {}", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string serialize_config(const GenerationConfig& cfg)
{
    auto lists = [](const std::vector<Categorization>& cs) {
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (const auto& c : cs) {
            nlohmann::ordered_json cats = nlohmann::ordered_json::array();
            for (const auto& cat : c.categories)
                cats.push_back({{"name", cat.name}, {"probability", cat.probability}, {"description", cat.description}});
            arr.push_back({{"name", c.name}, {"categories", std::move(cats)}});
        }
        return arr;
    };
    nlohmann::ordered_json j;
    j["user_categorizations"] = lists(cfg.user_categorizations);
    j["question_categorizations"] = lists(cfg.question_categorizations);
    j["num_candidates"] = cfg.num_candidates;
    if (cfg.seed)
        j["seed"] = *cfg.seed;
    return j.dump(2) + "\n";
}

std::vector<Diagnostic> validate_config(const GenerationConfig& cfg)
{
    std::vector<Diagnostic> out;
    auto error = [&](std::string path, std::string msg) {
        out.push_back({Severity::error, std::move(path), std::move(msg)});
    };

    if (cfg.num_candidates < 1)
        error("num_candidates", fmt::format("must be at least 1, got {}", cfg.num_candidates));

    std::set<std::string> categorization_names;
    auto check_list = [&](const std::vector<Categorization>& list, const char* key, CategorizationKind kind) {
        for (std::size_t i = 0; i < list.size(); ++i) {
            const auto& c = list[i];
            const std::string path = fmt::format("{}[{}]", key, i);
            if (c.kind != kind)
                error(path + ".kind", fmt::format("kind must be \"{}\" in this list", to_string(kind)));
            if (trim(c.name).empty())
                error(path + ".name", "categorization name must not be empty");
            else if (!categorization_names.insert(c.name).second)
                error(path + ".name", fmt::format("duplicate categorization name \"{}\"", c.name));
            if (c.categories.empty()) {
                error(path + ".categories", fmt::format("categorization \"{}\" has no categories", c.name));
                continue;
            }

            std::set<std::string> names;
            double sum = 0.0;
            bool all_valid = true;
            for (std::size_t j = 0; j < c.categories.size(); ++j) {
                const auto& cat = c.categories[j];
                const std::string cpath = fmt::format("{}.categories[{}]", path, j);
                if (trim(cat.name).empty())
                    error(cpath + ".name", "category name must not be empty");
                else if (!names.insert(cat.name).second)
                    error(cpath + ".name", fmt::format("duplicate category name \"{}\" in \"{}\"", cat.name, c.name));
                if (trim(cat.description).empty())
                    error(cpath + ".description", "description must not be empty");
                if (!(cat.probability > 0.0 && cat.probability <= 1.0)) {
                    error(cpath + ".probability",
                          fmt::format("probability must be in (0, 1], got {}", format_probability(cat.probability)));
                    all_valid = false;
                }
                sum += cat.probability;
            }
            if (all_valid && std::abs(sum - 1.0) > kProbabilityTolerance)
                error(path, fmt::format("categorization \"{}\": probabilities sum to {}", c.name, format_probability(sum)));
        }
    };
    check_list(cfg.user_categorizations, "user_categorizations", CategorizationKind::user);
    check_list(cfg.question_categorizations, "question_categorizations", CategorizationKind::question);
    return out;
}

GenerationConfig default_general_purpose_config()
{
    static const GenerationConfig cfg = parse_config(embedded::general_purpose_config);
    return cfg;
}

std::size_t joint_question_space(const GenerationConfig& cfg)
{
    std::size_t n = 1;
    for (const auto& c : cfg.question_categorizations)
        n *= c.categories.size();
    return n;
}

} // namespace qabench
