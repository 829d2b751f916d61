#include "warpflow/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace warpflow {
namespace {

std::atomic<int> g_workers{1};

double pairwise_sum_impl(const double* data, std::size_t count) {
  if (count <= 16) {
    double s = 0.0;
    for (std::size_t i = 0; i < count; ++i) s += data[i];
    return s;
  }
  const std::size_t half = count / 2;
  return pairwise_sum_impl(data, half) + pairwise_sum_impl(data + half, count - half);
}

}  // namespace

int workers() { return g_workers.load(); }

void set_workers(int count) { g_workers.store(std::max(1, count)); }

void parallel_for(std::size_t count,
                  const std::function<void(std::size_t, std::size_t)>& body) {
  const auto nw = static_cast<std::size_t>(workers());
  if (nw <= 1 || count < 2 * nw) {
    body(0, count);
    return;
  }
  const std::size_t chunk = (count + nw - 1) / nw;
  // One slot per chunk so the reported error does not depend on timing.
  std::vector<std::exception_ptr> errors(nw);
  {
    std::vector<std::jthread> pool;
    pool.reserve(nw - 1);
    for (std::size_t w = 1; w < nw; ++w) {
      const std::size_t b = w * chunk;
      const std::size_t e = std::min(count, b + chunk);
      if (b >= e) break;
      pool.emplace_back([&body, &errors, w, b, e] {
        try {
          body(b, e);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    try {
      body(0, std::min(count, chunk));
    } catch (...) {
      errors[0] = std::current_exception();
    }
  }
  for (auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
}

double pairwise_sum(std::span<const double> values) {
  return pairwise_sum_impl(values.data(), values.size());
}

}  // namespace warpflow
