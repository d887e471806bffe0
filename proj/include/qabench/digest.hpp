#pragma once

#include <memory>
#include <string>
#include <string_view>

namespace qabench {

inline constexpr std::string_view kDigestAlgorithm = "sha256";

/// Incremental SHA-256 (OpenSSL EVP).
class Sha256 {
public:
    Sha256();
    ~Sha256();
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    Sha256& update(std::string_view bytes);
    /// Lowercase hex digest. The object cannot be updated afterwards.
    std::string hex_digest();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

std::string sha256_hex(std::string_view bytes);

} // namespace qabench
