#pragma once

#include <openssl/evp.h>

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "camel/errors.hpp"

namespace camel {

using Digest = std::array<std::uint8_t, 32>;

/// SHA-256 over domain_tag || payload. The tag is prepended for domain
/// separation.
inline Digest hash_digest(std::span<const std::uint8_t> domain_tag,
                          std::span<const std::uint8_t> payload) {
  Digest out{};
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx) throw Error("EVP_MD_CTX_new failed");
  unsigned int len = 0;
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) == 1 &&
                  (domain_tag.empty() ||
                   EVP_DigestUpdate(ctx, domain_tag.data(), domain_tag.size()) == 1) &&
                  (payload.empty() ||
                   EVP_DigestUpdate(ctx, payload.data(), payload.size()) == 1) &&
                  EVP_DigestFinal_ex(ctx, out.data(), &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok || len != out.size()) throw Error("SHA-256 failed");
  return out;
}

inline Digest hash_digest(std::string_view domain_tag, std::span<const std::uint8_t> payload) {
  return hash_digest(
      std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(domain_tag.data()),
                                    domain_tag.size()),
      payload);
}

inline std::string hex(std::span<const std::uint8_t> bytes) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  s.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    s.push_back(digits[b >> 4]);
    s.push_back(digits[b & 0xf]);
  }
  return s;
}

}  // namespace camel
