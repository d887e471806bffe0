#pragma once

#include "qabench/error.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace qabench {

enum class CategorizationKind { user, question };

std::string_view to_string(CategorizationKind kind);

struct Category {
    std::string name;
    double probability = 0.0;
    std::string description;

    bool operator==(const Category&) const = default;
};

/// A set of mutually exclusive categories with a probability distribution.
struct Categorization {
    std::string name;
    CategorizationKind kind = CategorizationKind::question;
    std::vector<Category> categories;

    bool operator==(const Categorization&) const = default;
};

struct GenerationConfig {
    std::vector<Categorization> user_categorizations;
    std::vector<Categorization> question_categorizations;
    int num_candidates = 3;
    std::optional<std::uint64_t> seed;

    /// No categorizations at all: every prompt differs only by its document.
    bool is_vanilla() const noexcept
    {
        return user_categorizations.empty() && question_categorizations.empty();
    }

    bool operator==(const GenerationConfig&) const = default;
};

inline constexpr double kProbabilityTolerance = 1e-6;

enum class Severity { error, warning };

struct Diagnostic {
    Severity severity = Severity::error;
    std::string path;    // e.g. "question_categorizations[1].categories[0].description"
    std::string message;
};

std::string format_diagnostic(const Diagnostic& d);

/// Raised by parse_config when the document is well-formed JSON but
/// describes an invalid configuration.
class ConfigError : public Error {
public:
    explicit ConfigError(std::vector<Diagnostic> diagnostics);
    const std::vector<Diagnostic>& diagnostics() const noexcept { return diagnostics_; }

private:
    std::vector<Diagnostic> diagnostics_;
};

/// Parses and validates a configuration document.
///
/// Categories may omit "probability"; the mass left over by the specified
/// categories of the same categorization is split evenly among them.
/// Unknown keys are rejected. Malformed JSON raises ParseError with the byte
/// offset; schema or invariant violations raise ConfigError.
GenerationConfig parse_config(std::string_view raw);
GenerationConfig load_config(const std::filesystem::path& path);

/// Pretty-printed JSON with every probability written explicitly.
std::string serialize_config(const GenerationConfig& cfg);

/// Empty iff every invariant holds.
std::vector<Diagnostic> validate_config(const GenerationConfig& cfg);

/// Four general-purpose question categorizations (factuality, premise,
/// phrasing, linguistic variation) and the expert/novice user
/// categorization, uniform within each.
GenerationConfig default_general_purpose_config();

/// Number of joint question-category combinations.
std::size_t joint_question_space(const GenerationConfig& cfg);

} // namespace qabench
