#pragma once

#include <cstddef>
#include <functional>
#include <span>

namespace warpflow {

/// Number of worker threads used by per-node loops. Defaults to 1.
/// Results never depend on this value: work is split into independent
/// index ranges and every reduction uses a fixed pairwise order.
int workers();
void set_workers(int count);

/// Runs body(begin, end) over a partition of [0, count).
void parallel_for(std::size_t count,
                  const std::function<void(std::size_t, std::size_t)>& body);

/// Deterministic pairwise (cascade) summation.
double pairwise_sum(std::span<const double> values);

}  // namespace warpflow
