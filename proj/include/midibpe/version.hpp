// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The midibpe Authors

#pragma once

namespace midibpe {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace midibpe
