// Copyright 2026 The snerg-cpp Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>

namespace snerg {

/// Worker count: SNERG_THREADS when set to a positive integer, otherwise the
/// hardware concurrency.
int worker_count();

/// Calls body(i) for every i in [begin, end) across worker_count() threads.
/// Indices are handed out in chunks of `grain`; body must not depend on the
/// thread it runs on. The first exception thrown by any body is rethrown.
void parallel_for(std::size_t begin, std::size_t end, const std::function<void(std::size_t)>& body,
                  std::size_t grain = 1);

} // namespace snerg
