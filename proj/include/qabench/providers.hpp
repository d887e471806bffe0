#pragma once

#include "qabench/error.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace qabench {

// ---------------------------------------------------------------- errors

class ProviderError : public Error {
public:
    ProviderError(const std::string& what, int status = 0, std::string body_excerpt = {})
        : Error(what), status_(status), body_excerpt_(std::move(body_excerpt)) {}

    int status() const noexcept { return status_; }
    const std::string& body_excerpt() const noexcept { return body_excerpt_; }
    bool is_auth_failure() const noexcept { return status_ == 401 || status_ == 403; }

private:
    int status_;
    std::string body_excerpt_;
};

class TimeoutError : public ProviderError {
public:
    using ProviderError::ProviderError;
};

// ------------------------------------------------------------------ chat

inline constexpr double kDefaultTemperature = 1.0;
inline constexpr int kDefaultMaxTokens = 1024;

struct ChatRequest {
    std::string prompt;
    double temperature = kDefaultTemperature;
    int max_tokens = kDefaultMaxTokens;
    std::string model;
    /// Forwarded to backends that accept a sampling seed; mocks mix it into
    /// their output hash.
    std::optional<std::uint64_t> seed;
};

struct ChatResponse {
    std::string text;
    double latency_ms = 0.0;
    int prompt_tokens = 0;
    int completion_tokens = 0;
    int attempts = 1;
};

class ChatProvider {
public:
    virtual ~ChatProvider() = default;
    /// Thread-safe.
    virtual ChatResponse complete(const ChatRequest& request) = 0;
    virtual std::string identifier() const = 0;
};

// ------------------------------------------------------------- embeddings

struct EmbeddingVector {
    std::vector<double> values;
    std::size_t dimension() const noexcept { return values.size(); }
};

class Embedder {
public:
    virtual ~Embedder() = default;
    /// One vector per input, same order, uniform dimension.
    virtual std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) = 0;
    virtual std::string identifier() const = 0;
};

/// Checks the embed_batch post-conditions; throws ProviderError on violation.
void check_embeddings(std::span<const std::string> texts, std::span<const EmbeddingVector> vectors);

// ---------------------------------------------------------------- transport

struct HttpResponse {
    int status = 0;
    std::string body;
};

/// Network-level failure (connection refused, read timeout). Retryable.
class TransportError : public Error {
public:
    using Error::Error;
};

class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    virtual HttpResponse post_json(const std::string& path, const std::string& body,
                                   std::chrono::milliseconds timeout) = 0;
};

/// cpp-httplib backed transport. `base_url` is scheme://host[:port][/prefix].
std::shared_ptr<HttpTransport> make_http_transport(const std::string& base_url, std::string api_key);

struct HttpProviderOptions {
    std::string model;
    std::chrono::milliseconds timeout{60000};
    int retries = 3;
    std::chrono::milliseconds backoff_initial{500};
    int max_concurrency = 4;
    std::size_t embed_batch_size = 64;
    /// Replaced in tests to avoid real sleeps.
    std::function<void(std::chrono::milliseconds)> sleep;
};

/// Sends `body` to `path`, retrying transport errors, 429 and 5xx with
/// exponential backoff. Bounded by `permits`.
HttpResponse post_with_retry(HttpTransport& transport, const std::string& path, const std::string& body,
                             const HttpProviderOptions& options, std::counting_semaphore<>& permits,
                             int& attempts);

/// OpenAI-compatible /chat/completions client.
class OpenAiChatProvider final : public ChatProvider {
public:
    OpenAiChatProvider(std::shared_ptr<HttpTransport> transport, HttpProviderOptions options);
    ChatResponse complete(const ChatRequest& request) override;
    std::string identifier() const override { return "openai:" + options_.model; }

private:
    std::shared_ptr<HttpTransport> transport_;
    HttpProviderOptions options_;
    std::counting_semaphore<> permits_;
};

/// OpenAI-compatible /embeddings client; batches internally.
class OpenAiEmbedder final : public Embedder {
public:
    OpenAiEmbedder(std::shared_ptr<HttpTransport> transport, HttpProviderOptions options);
    std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) override;
    std::string identifier() const override { return "openai:" + options_.model; }

private:
    std::shared_ptr<HttpTransport> transport_;
    HttpProviderOptions options_;
    std::counting_semaphore<> permits_;
};

/// Vectors looked up by exact text from a JSONL file of
/// {"text": str, "vector": [floats]} lines.
class PrecomputedEmbedder final : public Embedder {
public:
    static PrecomputedEmbedder load(const std::filesystem::path& path);
    static PrecomputedEmbedder parse(std::string_view jsonl);

    std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) override;
    std::string identifier() const override { return "file"; }
    std::size_t size() const noexcept { return table_.size(); }

private:
    std::unordered_map<std::string, EmbeddingVector> table_;
};

/// Deterministic bag-of-tokens projection: every lowercased token is hashed
/// to a signed unit in a fixed-width vector, then the sum is L2-normalized.
class HashEmbedder final : public Embedder {
public:
    static constexpr std::size_t kDimension = 64;

    explicit HashEmbedder(std::uint64_t seed = 0) : seed_(seed) {}
    std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) override;
    EmbeddingVector embed(const std::string& text) const;
    std::string identifier() const override { return "mock-hash64"; }

private:
    std::uint64_t seed_;
};

// ------------------------------------------------------------------ mocks

/// Generator behaviours for offline runs.
enum class MockPersona {
    /// Reads the characteristics bullets and shapes each question to them.
    category_conditioned,
    /// Always "What are the main ..." questions, whatever the prompt says.
    templated,
    /// Wraps valid lines in chatty prose and a code fence.
    chatty,
    /// Never produces a parsable line.
    refusing,
};

MockPersona parse_mock_persona(std::string_view name);
std::string_view to_string(MockPersona persona);

/// Output is a pure function of (prompt, request seed, provider seed).
class MockChatProvider final : public ChatProvider {
public:
    explicit MockChatProvider(MockPersona persona = MockPersona::category_conditioned, std::uint64_t seed = 0)
        : persona_(persona), seed_(seed) {}

    ChatResponse complete(const ChatRequest& request) override;
    std::string identifier() const override;

private:
    MockPersona persona_;
    std::uint64_t seed_;
};

enum class MockJudgePolicy {
    all_yes,
    all_no,
    /// Fails questions that mention the document and answers not grounded in it.
    faithfulness_aware,
    /// Prose instead of JSON.
    garbled,
};

MockJudgePolicy parse_mock_judge_policy(std::string_view name);
std::string_view to_string(MockJudgePolicy policy);

/// Answers judge prompts with only the fields the prompt requests.
class MockJudgeProvider final : public ChatProvider {
public:
    explicit MockJudgeProvider(MockJudgePolicy policy = MockJudgePolicy::all_yes) : policy_(policy) {}

    ChatResponse complete(const ChatRequest& request) override;
    std::string identifier() const override;

private:
    MockJudgePolicy policy_;
};

} // namespace qabench
