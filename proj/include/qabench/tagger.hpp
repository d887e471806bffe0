#pragma once

#include "qabench/textproc.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace qabench {

class Tagger {
public:
    virtual ~Tagger() = default;
    /// One PosSequence per input, |tags| == |tokens|.
    virtual std::vector<PosSequence> tag_batch(std::span<const TokenSequence> sentences) const = 0;
    virtual std::string identifier() const = 0;

    PosSequence tag(const TokenSequence& sentence) const;
};

/// Penn Treebank spelling of a surface token: brackets become -LRB-/-RRB-,
/// straight double quotes become `` or '' depending on position.
std::string ptb_token(std::string_view surface, bool sentence_initial_side);

/// Averaged-perceptron weights: a tag dictionary for unambiguous frequent
/// words plus per-feature class weights in milli-units.
class PerceptronModel {
public:
    static constexpr std::uint32_t kFormatVersion = 1;

    static PerceptronModel load(const std::filesystem::path& path);
    static PerceptronModel deserialize(std::string_view bytes);
    std::string serialize() const;
    void save(const std::filesystem::path& path) const;

    const std::vector<std::string>& classes() const noexcept { return classes_; }
    std::size_t feature_count() const noexcept { return features_.size(); }

    /// Greedy left-to-right tagging of PTB-spelled tokens.
    std::vector<std::string> tag_words(std::span<const std::string> words) const;

    struct Weight {
        std::uint8_t cls;
        std::int32_t milli;
    };

private:
    friend class PerceptronTrainer;

    int predict(std::span<const std::string> features) const;

    std::vector<std::string> classes_;
    std::unordered_map<std::string, std::uint8_t> tagdict_;
    std::unordered_map<std::string, std::vector<Weight>> features_;
};

/// The fourteen context features of token i. `context` is the normalized
/// sentence padded with two start and two end markers.
std::vector<std::string> perceptron_features(std::size_t i, std::string_view word,
                                             std::span<const std::string> context,
                                             std::string_view prev, std::string_view prev2);

/// Word normalization applied to context slots (!HYPHEN, !YEAR, !DIGITS, lowercase).
std::string normalize_word(std::string_view word);

struct TaggedSentence {
    std::vector<std::string> words;
    std::vector<std::string> tags;
};

/// Reads "word<TAB>tag" lines with blank lines between sentences.
std::vector<TaggedSentence> read_tagged_corpus(const std::filesystem::path& path);
std::vector<TaggedSentence> parse_tagged_corpus(std::string_view contents);

class PerceptronTrainer {
public:
    struct Options {
        int iterations = 5;
        std::uint64_t seed = 0;
        std::size_t tagdict_min_count = 20;
        double tagdict_min_ratio = 0.97;
    };

    static PerceptronModel train(std::vector<TaggedSentence> sentences, const Options& options);
};

/// Fraction of tokens whose predicted tag equals the gold tag.
double tagging_accuracy(const PerceptronModel& model, std::span<const TaggedSentence> gold);

class PerceptronTagger final : public Tagger {
public:
    explicit PerceptronTagger(std::shared_ptr<const PerceptronModel> model) : model_(std::move(model)) {}

    /// Loads the bundled weights (QABENCH_DATA_DIR or the compiled-in data path).
    static PerceptronTagger builtin();
    static std::filesystem::path builtin_weights_path();

    std::vector<PosSequence> tag_batch(std::span<const TokenSequence> sentences) const override;
    std::vector<PosSequence> tag_batch_serial(std::span<const TokenSequence> sentences) const;
    std::string identifier() const override { return "builtin-perceptron-v1"; }
    const PerceptronModel& model() const noexcept { return *model_; }

private:
    std::shared_ptr<const PerceptronModel> model_;
};

/// Runs `command` through the shell once per batch. Input: one sentence
/// per line, tokens tab-separated. Output: one line of tab-separated tags
/// per input line.
class ExternalTagger final : public Tagger {
public:
    explicit ExternalTagger(std::string command) : command_(std::move(command)) {}

    std::vector<PosSequence> tag_batch(std::span<const TokenSequence> sentences) const override;
    std::string identifier() const override { return "external:" + command_; }

private:
    std::string command_;
};

PosSequence pos_tag(std::string_view text, const Tagger& tagger);

} // namespace qabench
