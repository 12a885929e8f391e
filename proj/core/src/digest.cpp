// Copyright (c) the hybridmesh authors.
// SPDX-License-Identifier: Apache-2.0
#include "hybridmesh/digest.hpp"

#include <openssl/evp.h>

#include <array>
#include <stdexcept>

namespace hybridmesh {

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> raw{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), raw.data(), &len, EVP_sha256(),
                 nullptr) != 1) {
    throw std::runtime_error("sha256: EVP_Digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[raw[i] >> 4]);
    out.push_back(kHex[raw[i] & 0x0f]);
  }
  return out;
}

std::string object_id_for(std::string_view content) {
  return std::string(kDigestAlgorithm) + ":" + sha256_hex(content);
}

}  // namespace hybridmesh
