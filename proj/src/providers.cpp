#include "qabench/providers.hpp"

#include "qabench/rng.hpp"
#include "qabench/textproc.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

namespace qabench {

namespace {

using json = nlohmann::json;

std::string excerpt(std::string_view body, std::size_t max = 300)
{
    if (body.size() <= max)
        return std::string(body);
    return std::string(body.substr(0, max)) + "...";
}

class Permit {
public:
    explicit Permit(std::counting_semaphore<>& s) : s_(s) { s_.acquire(); }
    ~Permit() { s_.release(); }
    Permit(const Permit&) = delete;
    Permit& operator=(const Permit&) = delete;

private:
    std::counting_semaphore<>& s_;
};

class HttplibTransport final : public HttpTransport {
public:
    HttplibTransport(std::string base_url, std::string api_key) : api_key_(std::move(api_key))
    {
        // Split scheme://host[:port] from an optional path prefix.
        const auto scheme_end = base_url.find("://");
        const auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
        const auto slash = base_url.find('/', host_start);
        origin_ = slash == std::string::npos ? base_url : base_url.substr(0, slash);
        prefix_ = slash == std::string::npos ? "" : base_url.substr(slash);
        while (!prefix_.empty() && prefix_.back() == '/')
            prefix_.pop_back();
    }

    HttpResponse post_json(const std::string& path, const std::string& body, std::chrono::milliseconds timeout) override
    {
        httplib::Client cli(origin_);
        const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
        const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
        cli.set_connection_timeout(secs.count(), static_cast<time_t>(usecs.count()));
        cli.set_read_timeout(secs.count(), static_cast<time_t>(usecs.count()));
        cli.set_write_timeout(secs.count(), static_cast<time_t>(usecs.count()));
        httplib::Headers headers;
        if (!api_key_.empty())
            headers.emplace("Authorization", "Bearer " + api_key_);
        auto res = cli.Post(prefix_ + path, headers, body, "application/json");
        if (!res)
            throw TransportError(fmt::format("{}{}: {}", origin_, prefix_ + path, httplib::to_string(res.error())));
        return {res->status, res->body};
    }

private:
    std::string origin_;
    std::string prefix_;
    std::string api_key_;
};

} // namespace

std::shared_ptr<HttpTransport> make_http_transport(const std::string& base_url, std::string api_key)
{
    return std::make_shared<HttplibTransport>(base_url, std::move(api_key));
}

HttpResponse post_with_retry(HttpTransport& transport, const std::string& path, const std::string& body,
                             const HttpProviderOptions& options, std::counting_semaphore<>& permits, int& attempts)
{
    auto backoff = [&](int attempt) {
        const auto delay = options.backoff_initial * (1LL << std::min(attempt, 16));
        if (options.sleep)
            options.sleep(delay);
        else
            std::this_thread::sleep_for(delay);
    };

    attempts = 0;
    for (int attempt = 0;; ++attempt) {
        ++attempts;
        HttpResponse res;
        try {
            Permit permit(permits);
            res = transport.post_json(path, body, options.timeout);
        }
        catch (const TransportError& e) {
            if (attempt < options.retries) {
                backoff(attempt);
                continue;
            }
            throw TimeoutError(fmt::format("{}: no response after {} attempt(s): {}", path, attempts, e.what()));
        }
        if (res.status >= 200 && res.status < 300)
            return res;
        const bool transient = res.status == 408 || res.status == 429 || res.status >= 500;
        if (transient && attempt < options.retries) {
            backoff(attempt);
            continue;
        }
        throw ProviderError(fmt::format("{}: HTTP {} after {} attempt(s): {}", path, res.status, attempts,
                                        excerpt(res.body)),
                            res.status, excerpt(res.body));
    }
}

// ----------------------------------------------------------------- chat

OpenAiChatProvider::OpenAiChatProvider(std::shared_ptr<HttpTransport> transport, HttpProviderOptions options)
    : transport_(std::move(transport)), options_(std::move(options)), permits_(std::max(1, options_.max_concurrency))
{
}

ChatResponse OpenAiChatProvider::complete(const ChatRequest& request)
{
    if (request.max_tokens < 1)
        throw ProviderError("chat request: max_tokens must be at least 1");
    json body = {
        {"model", request.model.empty() ? options_.model : request.model},
        {"messages", json::array({{{"role", "user"}, {"content", request.prompt}}})},
        {"temperature", request.temperature},
        {"max_tokens", request.max_tokens},
    };
    if (request.seed)
        body["seed"] = *request.seed;

    const auto start = std::chrono::steady_clock::now();
    ChatResponse out;
    const auto res = post_with_retry(*transport_, "/chat/completions", body.dump(), options_, permits_, out.attempts);
    out.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

    try {
        const auto j = json::parse(res.body);
        out.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
        if (auto u = j.find("usage"); u != j.end() && u->is_object()) {
            out.prompt_tokens = u->value("prompt_tokens", 0);
            out.completion_tokens = u->value("completion_tokens", 0);
        }
    }
    catch (const json::exception& e) {
        throw ProviderError(fmt::format("/chat/completions: unexpected response shape: {}", e.what()), res.status,
                            excerpt(res.body));
    }
    return out;
}

// ------------------------------------------------------------ embeddings

void check_embeddings(std::span<const std::string> texts, std::span<const EmbeddingVector> vectors)
{
    if (texts.size() != vectors.size())
        throw ProviderError(fmt::format("embedder returned {} vectors for {} texts", vectors.size(), texts.size()));
    if (vectors.empty())
        return;
    const auto dim = vectors.front().dimension();
    if (dim == 0)
        throw ProviderError("embedder returned an empty vector");
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        if (vectors[i].dimension() != dim)
            throw ProviderError(fmt::format("embedding dimension mismatch: vector {} has {} values, expected {}", i,
                                            vectors[i].dimension(), dim));
        for (double v : vectors[i].values)
            if (!std::isfinite(v))
                throw ProviderError(fmt::format("embedding {} contains a non-finite value", i));
    }
}

OpenAiEmbedder::OpenAiEmbedder(std::shared_ptr<HttpTransport> transport, HttpProviderOptions options)
    : transport_(std::move(transport)), options_(std::move(options)), permits_(std::max(1, options_.max_concurrency))
{
}

std::vector<EmbeddingVector> OpenAiEmbedder::embed_batch(std::span<const std::string> texts)
{
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    const std::size_t batch = std::max<std::size_t>(1, options_.embed_batch_size);
    for (std::size_t begin = 0; begin < texts.size(); begin += batch) {
        const auto chunk = texts.subspan(begin, std::min(batch, texts.size() - begin));
        json body = {{"model", options_.model}, {"input", json(std::vector<std::string>(chunk.begin(), chunk.end()))}};
        int attempts = 0;
        const auto res = post_with_retry(*transport_, "/embeddings", body.dump(), options_, permits_, attempts);
        try {
            const auto j = json::parse(res.body);
            const auto& data = j.at("data");
            std::vector<EmbeddingVector> part(chunk.size());
            for (std::size_t i = 0; i < data.size(); ++i) {
                const auto idx = data[i].contains("index") ? data[i]["index"].get<std::size_t>() : i;
                if (idx >= part.size())
                    throw ProviderError("/embeddings: index out of range");
                part[idx].values = data[i].at("embedding").get<std::vector<double>>();
            }
            if (data.size() != chunk.size())
                throw ProviderError(
                    fmt::format("/embeddings: {} vectors for {} inputs", data.size(), chunk.size()));
            for (auto& v : part)
                out.push_back(std::move(v));
        }
        catch (const json::exception& e) {
            throw ProviderError(fmt::format("/embeddings: unexpected response shape: {}", e.what()), res.status,
                                excerpt(res.body));
        }
    }
    check_embeddings(texts, out);
    return out;
}

PrecomputedEmbedder PrecomputedEmbedder::parse(std::string_view jsonl)
{
    PrecomputedEmbedder e;
    std::size_t pos = 0, line_no = 0;
    while (pos < jsonl.size()) {
        auto nl = jsonl.find('\n', pos);
        if (nl == std::string_view::npos)
            nl = jsonl.size();
        const auto line = jsonl.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos)
            continue;
        try {
            const auto j = json::parse(line);
            EmbeddingVector v{j.at("vector").get<std::vector<double>>()};
            e.table_.insert_or_assign(j.at("text").get<std::string>(), std::move(v));
        }
        catch (const json::exception& ex) {
            throw ParseError(fmt::format("embeddings file line {}: {}", line_no, ex.what()), line_no);
        }
    }
    return e;
}

PrecomputedEmbedder PrecomputedEmbedder::load(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError(fmt::format("cannot read embeddings file {}", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

std::vector<EmbeddingVector> PrecomputedEmbedder::embed_batch(std::span<const std::string> texts)
{
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
        auto it = table_.find(t);
        if (it == table_.end())
            throw ProviderError(fmt::format("embeddings file has no vector for text: \"{}\"", excerpt(t, 120)));
        out.push_back(it->second);
    }
    check_embeddings(texts, out);
    return out;
}

EmbeddingVector HashEmbedder::embed(const std::string& text) const
{
    EmbeddingVector v{std::vector<double>(kDimension, 0.0)};
    const std::uint64_t basis = mix_seed(seed_, std::string_view("hash-embedder"));
    auto tokens = tokenize(text).tokens;
    if (tokens.empty())
        tokens.push_back(text);
    for (const auto& tok : tokens) {
        const auto h = fnv1a64(tok, basis);
        v.values[h % kDimension] += (h >> 63) ? 1.0 : -1.0;
    }
    double norm = 0.0;
    for (double x : v.values)
        norm += x * x;
    if (norm == 0.0) {
        v.values[fnv1a64(text, basis) % kDimension] = 1.0;
        norm = 1.0;
    }
    norm = std::sqrt(norm);
    for (double& x : v.values)
        x /= norm;
    return v;
}

std::vector<EmbeddingVector> HashEmbedder::embed_batch(std::span<const std::string> texts)
{
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
        if (t.empty())
            throw ProviderError("embed_batch: empty text");
        out.push_back(embed(t));
    }
    return out;
}

} // namespace qabench
