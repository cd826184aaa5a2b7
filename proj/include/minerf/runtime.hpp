// Copyright 2026 The minerf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace minerf {

/// Keeps large temporaries on the heap instead of fresh mmap pages. The
/// batched passes allocate many multi-megabyte matrices per step and are
/// otherwise dominated by page faults. Call once at startup.
void tune_allocator();

}  // namespace minerf
