#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace wtlab::app {

inline std::size_t resolve_workers(std::size_t requested, std::size_t jobs) {
  std::size_t n = requested ? requested : std::max(1u, std::thread::hardware_concurrency());
  return std::max<std::size_t>(1, std::min(n, jobs));
}

// Runs fn(i) for i in [0, n) on a bounded pool. Returns one error message per
// job (empty when it succeeded), indexed like the jobs.
inline std::vector<std::optional<std::string>> parallel_for(
    std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  std::vector<std::optional<std::string>> errors(n);
  std::atomic<std::size_t> next{0};
  auto run = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        fn(i);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const std::size_t k = resolve_workers(workers, n);
  if (k <= 1) {
    run();
    return errors;
  }
  std::vector<std::jthread> threads;
  threads.reserve(k);
  for (std::size_t t = 0; t < k; ++t) threads.emplace_back(run);
  threads.clear();  // joins
  return errors;
}

}  // namespace wtlab::app
