#include "lptd/sha256.hpp"

#include <openssl/evp.h>

#include <stdexcept>
#include <string>

namespace lptd {

HashVal sha256(const uint8_t* data, size_t len) {
    HashVal out{};
    unsigned int out_len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx, data, len) != 1 || EVP_DigestFinal_ex(ctx, out.data(), &out_len) != 1) {
        EVP_MD_CTX_free(ctx);
        throw std::runtime_error("sha256: EVP failure");
    }
    EVP_MD_CTX_free(ctx);
    return out;
}

HashVal sha256(const std::vector<uint8_t>& data) { return sha256(data.data(), data.size()); }

std::string hash_hex(const HashVal& h) {
    static const char* digits = "0123456789abcdef";
    std::string s;
    s.reserve(64);
    for (uint8_t c : h) {
        s.push_back(digits[c >> 4]);
        s.push_back(digits[c & 0xf]);
    }
    return s;
}

}  // namespace lptd
