// Copyright (c) the hybridmesh authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>

namespace hybridmesh {

/// Hex-encoded SHA-256 of the given bytes.
std::string sha256_hex(std::string_view bytes);

/// Content address for stored objects: "sha256:" + hex digest. The algorithm
/// prefix travels with every id, so manifests stay self-describing.
std::string object_id_for(std::string_view content);

inline constexpr const char* kDigestAlgorithm = "sha256";

}  // namespace hybridmesh
