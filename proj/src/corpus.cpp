#include "qabench/corpus.hpp"

#include "qabench/digest.hpp"
#include "qabench/error.hpp"
#include "qabench/textproc.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace qabench {

namespace {

bool blank(std::string_view s)
{
    return s.find_first_not_of(" \t\r\n\f\v") == std::string_view::npos;
}

bool is_ascii_space(char c)
{
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError(fmt::format("cannot read {}", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

const Document* Corpus::find(std::string_view id) const
{
    if (!index_.empty()) {
        auto it = index_.find(id);
        return it == index_.end() ? nullptr : &documents[it->second];
    }
    auto it = std::find_if(documents.begin(), documents.end(), [&](const Document& d) { return d.id == id; });
    return it == documents.end() ? nullptr : &*it;
}

void Corpus::build_index()
{
    index_.clear();
    for (std::size_t i = 0; i < documents.size(); ++i)
        index_.emplace(documents[i].id, i);
}

std::string truncate_to_budget(std::string_view text, std::size_t budget, bool& truncated)
{
    truncated = false;
    std::size_t cps = 0, cut = 0, last_space = std::string_view::npos;
    for (std::size_t i = 0; i < text.size();) {
        if (cps == budget) {
            cut = i;
            truncated = true;
            break;
        }
        if (is_ascii_space(text[i]))
            last_space = i;
        i += utf8::sequence_length(static_cast<unsigned char>(text[i]));
        ++cps;
    }
    if (!truncated)
        return std::string(text);
    if (last_space != std::string_view::npos && last_space > 0)
        cut = last_space;
    return std::string(text.substr(0, cut));
}

Corpus parse_corpus_jsonl(std::string_view contents, const CorpusOptions& options)
{
    Corpus corpus;
    std::set<std::string> seen;
    std::size_t line_no = 0, pos = 0;
    while (pos < contents.size()) {
        auto nl = contents.find('\n', pos);
        if (nl == std::string_view::npos)
            nl = contents.size();
        const std::string_view line = contents.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (blank(line))
            continue;

        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        }
        catch (const nlohmann::json::parse_error& e) {
            throw ParseError(fmt::format("corpus line {}: malformed JSON: {}", line_no, e.what()), line_no);
        }
        if (!j.is_object())
            throw ParseError(fmt::format("corpus line {}: expected a JSON object", line_no), line_no);
        for (const char* key : {"id", "text"}) {
            auto it = j.find(key);
            if (it == j.end() || !it->is_string())
                throw ParseError(fmt::format("corpus line {}: missing string field \"{}\"", line_no, key), line_no);
        }
        Document doc;
        doc.id = j["id"].get<std::string>();
        if (doc.id.empty())
            throw ParseError(fmt::format("corpus line {}: empty id", line_no), line_no);
        const auto text = j["text"].get<std::string>();
        if (blank(text))
            throw ParseError(fmt::format("corpus line {}: document \"{}\" has empty text", line_no, doc.id), line_no);
        if (!seen.insert(doc.id).second)
            throw ParseError(fmt::format("corpus line {}: duplicate id \"{}\"", line_no, doc.id), line_no);
        doc.text = truncate_to_budget(text, options.char_budget, doc.truncated);
        if (auto md = j.find("metadata"); md != j.end()) {
            if (!md->is_object())
                throw ParseError(fmt::format("corpus line {}: metadata must be an object", line_no), line_no);
            for (const auto& [k, v] : md->items()) {
                if (!v.is_string())
                    throw ParseError(fmt::format("corpus line {}: metadata value \"{}\" must be a string", line_no, k),
                                     line_no);
                doc.metadata.emplace(k, v.get<std::string>());
            }
        }
        corpus.documents.push_back(std::move(doc));
    }
    if (corpus.documents.empty())
        throw ParseError("corpus is empty");
    corpus.build_index();
    return corpus;
}

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format, const CorpusOptions& options)
{
    if (format == CorpusFormat::jsonl)
        return parse_corpus_jsonl(read_file(path), options);

    if (!std::filesystem::is_directory(path))
        throw IoError(fmt::format("{} is not a directory", path.string()));
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(path))
        if (entry.is_regular_file())
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());

    Corpus corpus;
    for (const auto& f : files) {
        const auto text = read_file(f);
        if (blank(text))
            continue;
        Document doc;
        doc.id = std::filesystem::relative(f, path).generic_string();
        doc.text = truncate_to_budget(text, options.char_budget, doc.truncated);
        corpus.documents.push_back(std::move(doc));
    }
    if (corpus.documents.empty())
        throw ParseError(fmt::format("corpus directory {} has no non-empty files", path.string()));
    corpus.build_index();
    return corpus;
}

std::string corpus_digest(const Corpus& corpus)
{
    Sha256 h;
    for (const auto& d : corpus.documents) {
        h.update(d.id);
        h.update(std::string_view("\0", 1));
        h.update(d.text);
        h.update(std::string_view("\0", 1));
    }
    return h.hex_digest();
}

std::vector<std::string> make_sampling_plan(const Corpus& corpus, const SamplingMode& mode, Rng& rng)
{
    if (corpus.documents.empty())
        throw Error("sampling plan: corpus is empty");
    std::vector<std::string> plan;
    if (const auto* u = std::get_if<UniformSampling>(&mode)) {
        if (u->total < 1)
            throw Error("sampling plan: uniform total must be at least 1");
        plan.reserve(u->total);
        for (std::size_t i = 0; i < u->total; ++i)
            plan.push_back(corpus.documents[static_cast<std::size_t>(rng.below(corpus.size()))].id);
        return plan;
    }

    const auto& per = std::get<PerDocumentSampling>(mode);
    std::size_t total = 0;
    for (const auto& [id, n] : per.counts) {
        if (!corpus.find(id))
            throw Error(fmt::format("sampling plan: unknown document id \"{}\"", id));
        total += n;
    }
    if (total < 1)
        throw Error("sampling plan: per-document counts sum to 0");
    plan.reserve(total);
    for (const auto& d : corpus.documents)
        if (auto it = per.counts.find(d.id); it != per.counts.end())
            plan.insert(plan.end(), it->second, d.id);
    rng.shuffle(plan);
    return plan;
}

std::vector<std::string> make_sampling_plan(const Corpus& corpus, const SamplingMode& mode, std::uint64_t seed)
{
    Rng rng(seed);
    return make_sampling_plan(corpus, mode, rng);
}

} // namespace qabench
