// Copyright the clinsim contributors. Licensed under the terms of the Apache 2.0 license.
// See LICENSE in the project root.
#pragma once

namespace clinsim {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace clinsim
