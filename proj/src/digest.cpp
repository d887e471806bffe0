#include "qabench/digest.hpp"

#include "qabench/error.hpp"

#include <openssl/evp.h>

namespace qabench {

struct Sha256::Impl {
    EVP_MD_CTX* ctx = nullptr;
    bool finished = false;
};

Sha256::Sha256() : impl_(std::make_unique<Impl>())
{
    impl_->ctx = EVP_MD_CTX_new();
    if (!impl_->ctx || EVP_DigestInit_ex(impl_->ctx, EVP_sha256(), nullptr) != 1)
        throw Error("sha256: cannot initialise digest context");
}

Sha256::~Sha256()
{
    if (impl_ && impl_->ctx)
        EVP_MD_CTX_free(impl_->ctx);
}

Sha256& Sha256::update(std::string_view bytes)
{
    if (impl_->finished)
        throw Error("sha256: update after digest");
    if (!bytes.empty() && EVP_DigestUpdate(impl_->ctx, bytes.data(), bytes.size()) != 1)
        throw Error("sha256: update failed");
    return *this;
}

std::string Sha256::hex_digest()
{
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (impl_->finished || EVP_DigestFinal_ex(impl_->ctx, md, &len) != 1)
        throw Error("sha256: finalisation failed");
    impl_->finished = true;
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 0xf]);
    }
    return out;
}

std::string sha256_hex(std::string_view bytes)
{
    Sha256 h;
    h.update(bytes);
    return h.hex_digest();
}

} // namespace qabench
