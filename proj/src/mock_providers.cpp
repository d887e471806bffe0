#include "qabench/providers.hpp"

#include "qabench/rng.hpp"
#include "qabench/textproc.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace qabench {

namespace {

using json = nlohmann::json;

int rough_token_count(std::string_view text)
{
    return static_cast<int>((text.size() + 3) / 4);
}

std::string between(std::string_view text, std::string_view open, std::string_view close)
{
    const auto a = text.find(open);
    if (a == std::string_view::npos)
        return {};
    const auto start = a + open.size();
    const auto b = close.empty() ? std::string_view::npos : text.find(close, start);
    return std::string(text.substr(start, b == std::string_view::npos ? std::string_view::npos : b - start));
}

std::vector<std::string> bullet_lines(std::string_view prompt, std::string_view marker)
{
    std::vector<std::string> out;
    std::size_t pos = 0;
    while ((pos = prompt.find(marker, pos)) != std::string_view::npos) {
        pos += marker.size();
        auto nl = prompt.find('\n', pos);
        out.push_back(utf8::lower(prompt.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos)));
        if (nl == std::string_view::npos)
            break;
    }
    return out;
}

int requested_count(std::string_view prompt)
{
    const auto at = prompt.find("generate ");
    if (at == std::string_view::npos)
        return 3;
    std::size_t i = at + 9;
    int n = 0;
    bool any = false;
    while (i < prompt.size() && std::isdigit(static_cast<unsigned char>(prompt[i]))) {
        n = n * 10 + (prompt[i] - '0');
        any = true;
        ++i;
    }
    return any && n > 0 ? std::min(n, 50) : 3;
}

const std::set<std::string>& stopwords()
{
    static const std::set<std::string> s = {
        "about", "above", "after", "again", "also", "among", "because", "been", "before", "being", "below",
        "between", "both", "could", "does", "doing", "during", "each", "either", "from", "further", "have",
        "having", "here", "into", "itself", "just", "more", "most", "much", "only", "other", "over", "same",
        "should", "some", "such", "than", "that", "their", "them", "then", "there", "these", "they", "this",
        "those", "through", "under", "until", "very", "were", "what", "when", "where", "which", "while",
        "with", "within", "would", "your", "will", "shall", "upon", "were", "many", "several", "however",
    };
    return s;
}

std::vector<std::string> split_sentences(const std::string& doc)
{
    std::vector<std::string> out;
    std::string cur;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const char c = doc[i];
        cur += c == '\n' ? ' ' : c;
        const bool end = (c == '.' || c == '?' || c == '!') && (i + 1 == doc.size() || doc[i + 1] == ' ' || doc[i + 1] == '\n');
        if (end) {
            auto first = cur.find_first_not_of(' ');
            if (first != std::string::npos && cur.size() - first > 12)
                out.push_back(cur.substr(first));
            cur.clear();
        }
    }
    auto first = cur.find_first_not_of(' ');
    if (first != std::string::npos && cur.size() - first > 12)
        out.push_back(cur.substr(first));
    return out;
}

struct DocumentView {
    std::vector<std::string> sentences;
    std::vector<std::string> terms; // lowercased content words, first-seen order
};

DocumentView view_of(const std::string& doc)
{
    DocumentView v;
    v.sentences = split_sentences(doc);
    std::set<std::string> seen;
    for (const auto& tok : tokenize(doc).tokens) {
        if (tok.size() < 4 || tok.size() > 24 || stopwords().count(tok))
            continue;
        if (!std::all_of(tok.begin(), tok.end(), [](unsigned char c) { return std::isalpha(c) || c == '-'; }))
            continue;
        if (seen.insert(tok).second)
            v.terms.push_back(tok);
    }
    if (v.terms.empty())
        v.terms = {"this topic", "the subject", "the situation"};
    return v;
}

enum class Factuality { unspecified, factoid, open };
enum class Style { plain, concise, verbose, short_query, long_query };

struct Shape {
    Factuality factuality = Factuality::unspecified;
    Style style = Style::plain;
    bool premise = false;
    bool distant = false;
    bool expert = false;
    bool novice = false;
};

bool has(const std::string& s, std::string_view needle) { return s.find(needle) != std::string::npos; }

Shape shape_of(const std::vector<std::string>& users, const std::vector<std::string>& questions)
{
    Shape s;
    for (const auto& u : users) {
        if (has(u, "deep understanding") || has(u, "specialized") || has(u, "doctor") || has(u, "researcher") ||
            has(u, "authority"))
            s.expert = true;
        if (has(u, "no understanding") || has(u, "regular") || has(u, "patient"))
            s.novice = true;
    }
    for (const auto& q : questions) {
        if (has(q, "concise piece of information") || has(q, "short fact") || has(q, "specific"))
            s.factuality = Factuality::factoid;
        if (has(q, "detailed") || has(q, "exploratory") || has(q, "advice") || has(q, "recommendation"))
            s.factuality = Factuality::open;
        if (has(q, "short premise"))
            s.premise = true;
        if (has(q, "typed web query"))
            s.style = has(q, "less than 7") ? Style::short_query : Style::long_query;
        else if (has(q, "less than 10 words"))
            s.style = Style::concise;
        else if (has(q, "relatively long") || has(q, "more than 9"))
            s.style = Style::verbose;
        if (has(q, "completely different"))
            s.distant = true;
    }
    return s;
}

template <std::size_t N>
const char* pick(Rng& rng, const std::array<const char*, N>& pool)
{
    return pool[rng.below(N)];
}

const std::array<const char*, 24> kDistantTerms = {
    "this illness", "the germ", "the outbreak", "the treatment", "the sickness", "the lab work",
    "this condition", "the bug", "the shot", "the test", "the spread", "the cure",
    "the body", "the clinic", "the study", "the patients", "the infection", "the medicine",
    "the numbers", "the warning signs", "the recovery", "the risk", "the doctors", "the research",
};

const std::array<const char*, 12> kExpertTerms = {
    "mechanism", "pathogenesis", "efficacy", "cohort", "incidence", "transmission dynamics",
    "clinical course", "prognosis", "etiology", "specificity", "morbidity", "dosage",
};

const std::array<const char*, 10> kPremises = {
    "I work as a nurse in a small rural clinic.", "My father was diagnosed last month.",
    "I am writing a short report for my community group.", "I run a diagnostics lab.",
    "We are planning to travel abroad next spring.", "I have a weakened immune system.",
    "I teach biology at a high school.", "My children keep getting sick this winter.",
    "I read a news story about this yesterday.", "Our hospital is updating its guidelines.",
};

const std::array<const char*, 8> kQueryPremises = {
    "pregnant", "elderly parent", "travel", "nurse", "asthma", "teacher", "child", "immunocompromised",
};

const std::array<const char*, 10> kQueryWords = {
    "symptoms", "risk", "treatment", "cause", "2020", "statistics", "guidelines", "outcomes", "study", "cases",
};

const std::array<const char*, 12> kFactoidFrames = {
    "When was {0} first reported?",   "How many {0} cases were recorded?", "Who first described {0}?",
    "Which {1} is linked to {0}?",    "What year did {0} appear?",         "Where was {0} first found?",
    "What is the role of {0} in {1}?", "How long does {0} last?",          "What percentage of {1} involve {0}?",
    "Which group studied {0}?",       "What causes {0}?",                  "What is {0} made of?",
};

const std::array<const char*, 12> kOpenFrames = {
    "Why does {0} affect {1}?",           "How does {0} change {1}?",
    "What factors make {0} worse?",       "In what ways could {0} shape {1}?",
    "Could {0} explain {1}?",             "How should I think about {0} and {1}?",
    "What should people know about {0}?", "Is it true that {0} influences {1}?",
    "What can be done about {0}?",        "How do experts weigh {0} against {1}?",
    "What would help me understand {0}?", "Should I worry about {0} given {1}?",
};

const std::array<const char*, 8> kVerboseTails = {
    " and what does that mean for {2} in everyday life?",
    " given everything that is currently known about {2} and related issues?",
    " especially for someone who is dealing with {2} right now and needs guidance?",
    " and how does this compare with what we already understood about {2} before?",
    " considering the many different ways {2} can show up in practice?",
    " and is there anything practical that I could do about {2} myself?",
    " when you also take into account the long history of {2} in this area?",
    " if we look closely at how {2} develops over a longer period of time?",
};

std::string strip_question_mark(std::string s)
{
    while (!s.empty() && (s.back() == '?' || s.back() == ' '))
        s.pop_back();
    return s;
}

std::string capitalize(std::string s)
{
    if (!s.empty() && s[0] >= 'a' && s[0] <= 'z')
        s[0] = static_cast<char>(s[0] - 'a' + 'A');
    return s;
}

std::string term_for(Rng& rng, const DocumentView& doc, const Shape& shape, std::size_t slot)
{
    if (shape.distant)
        return pick(rng, kDistantTerms);
    if (shape.expert && slot == 1 && rng.below(2) == 0)
        return pick(rng, kExpertTerms);
    return doc.terms[rng.below(doc.terms.size())];
}

std::string make_question(Rng& rng, const DocumentView& doc, const Shape& shape)
{
    const std::string t0 = term_for(rng, doc, shape, 0);
    const std::string t1 = term_for(rng, doc, shape, 1);
    const std::string t2 = term_for(rng, doc, shape, 2);

    if (shape.style == Style::short_query || shape.style == Style::long_query) {
        std::vector<std::string> words;
        if (shape.premise)
            words.emplace_back(pick(rng, kQueryPremises));
        words.push_back(t0);
        words.emplace_back(pick(rng, kQueryWords));
        if (shape.style == Style::long_query) {
            words.push_back(t1);
            words.emplace_back(pick(rng, kQueryWords));
            words.push_back(t2);
            words.emplace_back(shape.factuality == Factuality::open ? "how to" : "facts");
            if (shape.expert)
                words.emplace_back(pick(rng, kExpertTerms));
        }
        std::string q;
        for (const auto& w : words) {
            if (!q.empty())
                q += ' ';
            q += w;
        }
        return q;
    }

    Factuality f = shape.factuality;
    if (f == Factuality::unspecified)
        f = rng.below(2) == 0 ? Factuality::factoid : Factuality::open;
    const char* frame = f == Factuality::factoid ? pick(rng, kFactoidFrames) : pick(rng, kOpenFrames);
    std::string q = fmt::format(fmt::runtime(frame), t0, t1, t2);
    if (shape.style == Style::verbose)
        q = strip_question_mark(q) + fmt::format(fmt::runtime(pick(rng, kVerboseTails)), t0, t1, t2);
    if (shape.novice && !shape.expert && rng.below(3) == 0)
        q = "In simple terms, " + std::string(1, static_cast<char>(std::tolower(q[0]))) + q.substr(1);
    if (shape.premise)
        q = std::string(pick(rng, kPremises)) + " " + q;
    return capitalize(q);
}

std::string answer_for(Rng& rng, const DocumentView& doc, const std::string& question)
{
    if (doc.sentences.empty())
        return "The document does not say.";
    const auto q = utf8::lower(question);
    for (const auto& s : doc.sentences) {
        const auto ls = utf8::lower(s);
        for (const auto& term : doc.terms)
            if (q.find(term) != std::string::npos && ls.find(term) != std::string::npos)
                return s;
    }
    return doc.sentences[rng.below(doc.sentences.size())];
}

std::vector<std::string> conditioned_lines(Rng& rng, std::string_view prompt)
{
    const int k = requested_count(prompt);
    const auto doc = view_of(between(prompt, "following document:\n", "\n### "));
    const auto shape = shape_of(bullet_lines(prompt, "- They must be "), bullet_lines(prompt, "- It must be "));
    std::vector<std::string> lines;
    for (int i = 0; i < k; ++i) {
        const auto q = make_question(rng, doc, shape);
        lines.push_back(json{{"question", q}, {"answer", answer_for(rng, doc, q)}}.dump());
    }
    return lines;
}

const std::array<const char*, 8> kTemplatedNouns = {
    "symptoms", "causes", "effects", "findings", "risks", "challenges", "benefits", "treatments",
};

std::vector<std::string> templated_lines(Rng& rng, std::string_view prompt)
{
    const int k = requested_count(prompt);
    const auto doc = view_of(between(prompt, "following document:\n", "\n### "));
    std::vector<std::string> lines;
    for (int i = 0; i < k; ++i) {
        const auto q = fmt::format("What are the main {} of {}?", pick(rng, kTemplatedNouns),
                                   doc.terms[rng.below(doc.terms.size())]);
        lines.push_back(json{{"question", q}, {"answer", answer_for(rng, doc, q)}}.dump());
    }
    return lines;
}

std::string join_lines(const std::vector<std::string>& lines)
{
    std::string out;
    for (const auto& l : lines) {
        out += l;
        out += '\n';
    }
    return out;
}

} // namespace

MockPersona parse_mock_persona(std::string_view name)
{
    if (name == "category_conditioned" || name == "conditioned")
        return MockPersona::category_conditioned;
    if (name == "templated")
        return MockPersona::templated;
    if (name == "chatty")
        return MockPersona::chatty;
    if (name == "refusing")
        return MockPersona::refusing;
    throw Error(fmt::format("unknown mock persona \"{}\" (expected category_conditioned, templated, chatty or refusing)",
                            name));
}

std::string_view to_string(MockPersona persona)
{
    switch (persona) {
    case MockPersona::category_conditioned: return "category_conditioned";
    case MockPersona::templated: return "templated";
    case MockPersona::chatty: return "chatty";
    case MockPersona::refusing: return "refusing";
    }
    return "unknown";
}

std::string MockChatProvider::identifier() const
{
    return fmt::format("mock:{}", to_string(persona_));
}

ChatResponse MockChatProvider::complete(const ChatRequest& request)
{
    std::uint64_t h = fnv1a64(request.prompt);
    h = mix_seed(h, seed_);
    h = mix_seed(h, request.seed.value_or(0));
    Rng rng(h);

    ChatResponse out;
    switch (persona_) {
    case MockPersona::category_conditioned:
        out.text = join_lines(conditioned_lines(rng, request.prompt));
        break;
    case MockPersona::templated:
        out.text = join_lines(templated_lines(rng, request.prompt));
        break;
    case MockPersona::chatty:
        out.text = "Sure! Here are the questions you asked for:\n```json\n" +
                   join_lines(conditioned_lines(rng, request.prompt)) + "```\nLet me know if you need more.";
        break;
    case MockPersona::refusing:
        out.text = "I cannot help with that.";
        break;
    }
    out.prompt_tokens = rough_token_count(request.prompt);
    out.completion_tokens = std::min(request.max_tokens, rough_token_count(out.text));
    return out;
}

// ----------------------------------------------------------------- judge

MockJudgePolicy parse_mock_judge_policy(std::string_view name)
{
    if (name == "all_yes" || name == "yes")
        return MockJudgePolicy::all_yes;
    if (name == "all_no" || name == "no")
        return MockJudgePolicy::all_no;
    if (name == "faithfulness_aware" || name == "aware")
        return MockJudgePolicy::faithfulness_aware;
    if (name == "garbled")
        return MockJudgePolicy::garbled;
    throw Error(fmt::format("unknown mock judge policy \"{}\" (expected all_yes, all_no, faithfulness_aware or garbled)",
                            name));
}

std::string_view to_string(MockJudgePolicy policy)
{
    switch (policy) {
    case MockJudgePolicy::all_yes: return "all_yes";
    case MockJudgePolicy::all_no: return "all_no";
    case MockJudgePolicy::faithfulness_aware: return "faithfulness_aware";
    case MockJudgePolicy::garbled: return "garbled";
    }
    return "unknown";
}

std::string MockJudgeProvider::identifier() const
{
    return fmt::format("mock-judge:{}", to_string(policy_));
}

namespace {

bool mentions_document(const std::string& question)
{
    const auto q = utf8::lower(question);
    for (std::string_view cue : {"document", "the text", "this text", "author", "passage", "article", "as stated",
                                 "according to the", "mentioned above"})
        if (q.find(cue) != std::string::npos)
            return true;
    return false;
}

bool grounded(const std::string& answer, const std::string& document)
{
    const auto doc_tokens = tokenize(document).tokens;
    const std::set<std::string> vocab(doc_tokens.begin(), doc_tokens.end());
    std::size_t content = 0, found = 0;
    for (const auto& tok : tokenize(answer).tokens) {
        if (tok.size() < 4 || stopwords().count(tok))
            continue;
        ++content;
        found += vocab.count(tok);
    }
    return content > 0 && static_cast<double>(found) >= 0.6 * static_cast<double>(content);
}

} // namespace

ChatResponse MockJudgeProvider::complete(const ChatRequest& request)
{
    const std::string_view prompt = request.prompt;
    const bool wants_category = prompt.find("category_adherent") != std::string_view::npos;
    ChatResponse out;
    out.prompt_tokens = rough_token_count(prompt);

    if (policy_ == MockJudgePolicy::garbled) {
        out.text = "Looks fine to me overall, the question seems reasonable.";
        out.completion_tokens = rough_token_count(out.text);
        return out;
    }

    bool context_free = true, adherent = true, faithful = true;
    if (policy_ == MockJudgePolicy::all_no) {
        context_free = adherent = faithful = false;
    }
    else if (policy_ == MockJudgePolicy::faithfulness_aware) {
        const auto document = between(prompt, "### Document:\n", "\n\n### Question:");
        const auto question = between(prompt, "### Question:\n", "\n\n### Answer:");
        const auto answer = between(prompt, "### Answer:\n", "\n\n");
        context_free = !mentions_document(question);
        faithful = grounded(answer, document);
    }

    json verdict = json::object();
    verdict["context_free"] = context_free;
    if (wants_category)
        verdict["category_adherent"] = adherent;
    verdict["faithful"] = faithful;
    out.text = verdict.dump();
    out.completion_tokens = rough_token_count(out.text);
    return out;
}

} // namespace qabench
