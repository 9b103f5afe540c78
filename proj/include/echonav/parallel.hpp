#ifndef ECHONAV_PARALLEL_HPP_
#define ECHONAV_PARALLEL_HPP_

#include <algorithm>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace echonav {

/// Runs `fn(begin, end)` over [0, n) in up to `jobs` contiguous chunks on
/// separate threads; the first exception is rethrown after all join.
inline void parallel_chunks(std::size_t n, int jobs, const std::function<void(std::size_t, std::size_t)>& fn) {
  const std::size_t k = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), 1,
                                                 std::max<std::size_t>(n, 1));
  if (k == 1) {
    fn(0, n);
    return;
  }
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(k);
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t b = n * j / k, e = n * (j + 1) / k;
    threads.emplace_back([&, j, b, e] {
      try {
        fn(b, e);
      } catch (...) {
        errors[j] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace echonav

#endif  // ECHONAV_PARALLEL_HPP_
