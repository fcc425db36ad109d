#pragma once

#include <openssl/evp.h>

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <memory>
#include <span>
#include <string>
#include <string_view>

#include "prompt_siege/core/error.hpp"

namespace prompt_siege {

using Sha256Digest = std::array<std::uint8_t, 32>;

// Incremental SHA-256 on top of OpenSSL's EVP interface.
class Sha256 {
public:
    Sha256() : ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free) {
        if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) {
            throw Error("sha256: digest init failed");
        }
    }

    Sha256& update(const void* data, std::size_t size) {
        if (size != 0 && EVP_DigestUpdate(ctx_.get(), data, size) != 1) {
            throw Error("sha256: digest update failed");
        }
        return *this;
    }

    Sha256& update(std::string_view s) { return update(s.data(), s.size()); }

    Sha256& update_u64(std::uint64_t v) {
        std::array<std::uint8_t, 8> le{};
        for (int i = 0; i < 8; ++i) le[i] = static_cast<std::uint8_t>(v >> (8 * i));
        return update(le.data(), le.size());
    }

    Sha256& update_f64(double v) { return update_u64(std::bit_cast<std::uint64_t>(v)); }

    Sha256Digest finish() {
        Sha256Digest out{};
        unsigned int len = 0;
        if (EVP_DigestFinal_ex(ctx_.get(), out.data(), &len) != 1 || len != out.size()) {
            throw Error("sha256: digest final failed");
        }
        return out;
    }

private:
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

inline Sha256Digest sha256(std::string_view s) { return Sha256{}.update(s).finish(); }

inline std::string to_hex(std::span<const std::uint8_t> bytes) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (auto b : bytes) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0x0f]);
    }
    return out;
}

inline std::string sha256_hex(std::string_view s) { return to_hex(sha256(s)); }

// Reads the digest as a big-endian 256-bit integer and keeps the low 64 bits.
inline std::uint64_t low64(const Sha256Digest& d) {
    std::uint64_t v = 0;
    for (std::size_t i = 24; i < 32; ++i) v = (v << 8) | d[i];
    return v;
}

}  // namespace prompt_siege
