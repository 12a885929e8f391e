// Copyright (c) the hybridmesh authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace hybridmesh {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace hybridmesh
