#include "qabench/textproc.hpp"

#include "qabench/error.hpp"

#include <algorithm>
#include <array>

namespace qabench {

namespace utf8 {

std::size_t sequence_length(unsigned char lead) noexcept
{
    if (lead < 0x80)
        return 1;
    if ((lead >> 5) == 0x6)
        return 2;
    if ((lead >> 4) == 0xe)
        return 3;
    if ((lead >> 3) == 0x1e)
        return 4;
    return 1;
}

std::size_t count_code_points(std::string_view s) noexcept
{
    std::size_t n = 0;
    for (std::size_t i = 0; i < s.size(); i += sequence_length(static_cast<unsigned char>(s[i])))
        ++n;
    return n;
}

std::string_view first_code_point(std::string_view s) noexcept
{
    if (s.empty())
        return s;
    return s.substr(0, std::min(s.size(), sequence_length(static_cast<unsigned char>(s[0]))));
}

std::string_view last_code_points(std::string_view s, std::size_t n) noexcept
{
    std::size_t begin = s.size();
    while (n > 0 && begin > 0) {
        --begin;
        while (begin > 0 && (static_cast<unsigned char>(s[begin]) & 0xc0) == 0x80)
            --begin;
        --n;
    }
    return s.substr(begin);
}

std::string ascii_lower(std::string_view s)
{
    std::string out(s);
    for (char& c : out)
        if (c >= 'A' && c <= 'Z')
            c = static_cast<char>(c - 'A' + 'a');
    return out;
}

} // namespace utf8

namespace {

char32_t decode(std::string_view s, std::size_t& i)
{
    const auto lead = static_cast<unsigned char>(s[i]);
    const std::size_t len = utf8::sequence_length(lead);
    if (len == 1 || i + len > s.size()) {
        ++i;
        return lead;
    }
    char32_t cp = lead & (0x7f >> len);
    for (std::size_t k = 1; k < len; ++k)
        cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3f);
    i += len;
    return cp;
}

void encode(char32_t cp, std::string& out)
{
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    }
    else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xc0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    }
    else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xe0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    }
    else {
        out.push_back(static_cast<char>(0xf0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3f)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    }
}

char32_t to_lower(char32_t cp)
{
    if (cp >= 'A' && cp <= 'Z')
        return cp + 32;
    if ((cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) || (cp >= 0x391 && cp <= 0x3AB && cp != 0x3A2) ||
        (cp >= 0x410 && cp <= 0x42F))
        return cp + 32;
    if (cp >= 0x400 && cp <= 0x40F)
        return cp + 80;
    return cp;
}

std::string lower(std::string_view s)
{
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size();)
        encode(to_lower(decode(s, i)), out);
    return out;
}

bool is_space(char32_t cp)
{
    return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == '\f' || cp == '\v' || cp == 0xA0 ||
           cp == 0x2009 || cp == 0x200A || cp == 0x202F || cp == 0x3000;
}

bool is_punct(char32_t cp)
{
    if (cp < 0x80)
        return (cp >= 0x21 && cp <= 0x2f) || (cp >= 0x3a && cp <= 0x40) || (cp >= 0x5b && cp <= 0x60) ||
               (cp >= 0x7b && cp <= 0x7e);
    switch (cp) {
    case 0xA1: case 0xAB: case 0xB7: case 0xBB: case 0xBF:
    case 0x2010: case 0x2011: case 0x2012: case 0x2013: case 0x2014: case 0x2015:
    case 0x2018: case 0x2019: case 0x201A: case 0x201C: case 0x201D: case 0x201E:
    case 0x2022: case 0x2026: case 0x2039: case 0x203A:
        return true;
    default:
        return false;
    }
}

struct CodePoint {
    char32_t cp;
    std::size_t begin, end;  // byte range
};

std::vector<CodePoint> code_points(std::string_view s)
{
    std::vector<CodePoint> out;
    for (std::size_t i = 0; i < s.size();) {
        const std::size_t begin = i;
        const char32_t cp = decode(s, i);
        out.push_back({cp, begin, i});
    }
    return out;
}

bool is_abbreviation(std::string_view word)
{
    // "U.S." / "e.g.": letters and dots only, with an inner dot.
    if (word.size() < 3 || word.back() != '.')
        return false;
    if (word.substr(0, word.size() - 1).find('.') == std::string_view::npos)
        return false;
    return std::all_of(word.begin(), word.end(), [](char c) {
        return c == '.' || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
    });
}

void push(TokenSequence& seq, std::string_view surface)
{
    if (surface.empty())
        return;
    seq.surface.emplace_back(surface);
    seq.tokens.push_back(lower(surface));
}

/// Splits a punctuation-free-at-the-edges word into stem + clitic.
void push_word(TokenSequence& seq, std::string_view word)
{
    static constexpr std::array<std::string_view, 6> clitics = {"s", "re", "ve", "ll", "d", "m"};
    const std::string low = lower(word);

    if (low.size() > 3 && low.ends_with("n't")) {
        push(seq, word.substr(0, word.size() - 3));
        push(seq, word.substr(word.size() - 3));
        return;
    }
    // Locate the last apostrophe (ASCII or U+2019).
    std::size_t apos = std::string_view::npos, apos_len = 0;
    if (auto p = word.rfind('\''); p != std::string_view::npos)
        apos = p, apos_len = 1;
    if (auto p = word.rfind("\xE2\x80\x99"); p != std::string_view::npos && (apos == std::string_view::npos || p > apos))
        apos = p, apos_len = 3;
    if (apos != std::string_view::npos && apos > 0) {
        const std::string tail = lower(word.substr(apos + apos_len));
        for (auto c : clitics) {
            if (tail == c) {
                push(seq, word.substr(0, apos));
                push(seq, word.substr(apos));
                return;
            }
        }
    }
    push(seq, word);
}

void tokenize_chunk(TokenSequence& seq, std::string_view chunk)
{
    const auto cps = code_points(chunk);
    std::size_t lo = 0, hi = cps.size();

    auto dots_run = [&](std::size_t from, int dir, std::size_t limit) {
        std::size_t n = 0;
        for (std::size_t k = from; n < limit && cps[k].cp == '.'; k = dir > 0 ? k + 1 : k - 1) {
            ++n;
            if ((dir < 0 && k == 0) || (dir > 0 && k + 1 >= cps.size()))
                break;
        }
        return n;
    };

    std::vector<std::string_view> leading;
    while (lo < hi && is_punct(cps[lo].cp)) {
        std::size_t n = cps[lo].cp == '.' ? dots_run(lo, +1, hi - lo) : 1;
        if (n < 3)
            n = 1;
        leading.push_back(chunk.substr(cps[lo].begin, cps[lo + n - 1].end - cps[lo].begin));
        lo += n;
    }
    std::vector<std::string_view> trailing;
    while (hi > lo && is_punct(cps[hi - 1].cp)) {
        if (cps[hi - 1].cp == '.') {
            std::size_t n = dots_run(hi - 1, -1, hi - lo);
            if (n >= 3) {
                trailing.push_back(chunk.substr(cps[hi - n].begin, cps[hi - 1].end - cps[hi - n].begin));
                hi -= n;
                continue;
            }
            const std::string_view rest = chunk.substr(cps[lo].begin, cps[hi - 1].end - cps[lo].begin);
            if (is_abbreviation(rest))
                break;
        }
        trailing.push_back(chunk.substr(cps[hi - 1].begin, cps[hi - 1].end - cps[hi - 1].begin));
        --hi;
    }

    for (auto p : leading)
        push(seq, p);
    if (lo < hi)
        push_word(seq, chunk.substr(cps[lo].begin, cps[hi - 1].end - cps[lo].begin));
    for (auto it = trailing.rbegin(); it != trailing.rend(); ++it)
        push(seq, *it);
}

} // namespace

std::string utf8::lower(std::string_view s)
{
    return qabench::lower(s);
}

TokenSequence tokenize(std::string_view text)
{
    TokenSequence seq;
    seq.source = std::string(text);
    std::size_t i = 0, chunk_begin = std::string_view::npos;
    while (i < text.size()) {
        const std::size_t at = i;
        const char32_t cp = decode(text, i);
        if (is_space(cp)) {
            if (chunk_begin != std::string_view::npos) {
                tokenize_chunk(seq, text.substr(chunk_begin, at - chunk_begin));
                chunk_begin = std::string_view::npos;
            }
        }
        else if (chunk_begin == std::string_view::npos) {
            chunk_begin = at;
        }
    }
    if (chunk_begin != std::string_view::npos)
        tokenize_chunk(seq, text.substr(chunk_begin));
    return seq;
}

std::vector<NGram> ngrams(const TokenSequence& seq, std::size_t n)
{
    std::vector<NGram> out;
    if (n == 0 || seq.tokens.size() < n)
        return out;
    out.reserve(seq.tokens.size() - n + 1);
    for (std::size_t i = 0; i + n <= seq.tokens.size(); ++i)
        out.emplace_back(seq.tokens.begin() + static_cast<std::ptrdiff_t>(i),
                         seq.tokens.begin() + static_cast<std::ptrdiff_t>(i + n));
    return out;
}

std::string PosTemplate::to_string() const
{
    std::string out;
    for (const auto& t : tags) {
        if (!out.empty())
            out.push_back(' ');
        out += t;
    }
    return out;
}

PosTemplate template_of(const PosSequence& seq)
{
    if (seq.tags.empty())
        throw Error("template_of: empty tag sequence");
    const auto n = std::min(kTemplateLength, seq.tags.size());
    return PosTemplate{{seq.tags.begin(), seq.tags.begin() + static_cast<std::ptrdiff_t>(n)}};
}

bool is_ptb_tag(std::string_view tag)
{
    static constexpr std::array<std::string_view, 51> tags = {
        "#",   "$",    "''",  ",",   "-LRB-", "-RRB-", ".",   ":",    "CC",  "CD",  "DT",  "EX",  "FW",
        "IN",  "JJ",   "JJR", "JJS", "LS",    "MD",    "NN",  "NNP",  "NNPS", "NNS", "PDT", "POS", "PRP",
        "PRP$", "RB",  "RBR", "RBS", "RP",    "SYM",   "TO",  "UH",   "VB",  "VBD", "VBG", "VBN", "VBP",
        "VBZ", "WDT",  "WP",  "WP$", "WRB",   "``",    "ADD", "AFX",  "HYPH", "NFP", "XX",  "_SP"};
    return std::find(tags.begin(), tags.end(), tag) != tags.end();
}

} // namespace qabench
