#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace qabench {

struct TokenSequence {
    std::vector<std::string> tokens;   // lowercased, for n-gram counting
    std::vector<std::string> surface;  // original case, for tagging
    std::string source;

    std::size_t size() const noexcept { return tokens.size(); }
    bool empty() const noexcept { return tokens.empty(); }
};

/// Whitespace split, then leading/trailing punctuation split off one mark at
/// a time ("..." stays whole). Clitics 's 're 've 'll 'd 'm and n't become
/// their own tokens; inner hyphens and other apostrophes stay in the word.
TokenSequence tokenize(std::string_view text);

using NGram = std::vector<std::string>;

/// All contiguous windows of length n, in order (a multiset).
std::vector<NGram> ngrams(const TokenSequence& seq, std::size_t n);

struct PosSequence {
    std::vector<std::string> tags;

    std::size_t size() const noexcept { return tags.size(); }
    bool operator==(const PosSequence&) const = default;
};

inline constexpr std::size_t kTemplateLength = 5;

/// Leading part-of-speech tags of a question.
struct PosTemplate {
    std::vector<std::string> tags;

    std::string to_string() const;  // space separated
    auto operator<=>(const PosTemplate&) const = default;
};

/// First min(5, |seq|) tags; throws Error on an empty sequence.
PosTemplate template_of(const PosSequence& seq);

bool is_ptb_tag(std::string_view tag);

// UTF-8 helpers shared by tokenizer, tagger and corpus truncation.
namespace utf8 {

/// Byte length of the code point starting at s[i] (1 on invalid lead bytes).
std::size_t sequence_length(unsigned char lead) noexcept;
std::size_t count_code_points(std::string_view s) noexcept;
/// Last n code points (whole string when shorter).
std::string_view last_code_points(std::string_view s, std::size_t n) noexcept;
std::string_view first_code_point(std::string_view s) noexcept;
std::string ascii_lower(std::string_view s);
/// Lowercases ASCII, Latin-1, Greek and basic Cyrillic letters.
std::string lower(std::string_view s);

} // namespace utf8

} // namespace qabench
