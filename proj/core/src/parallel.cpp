#include "dixon/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace dixon {

unsigned configured_threads() {
  if (const char* env = std::getenv("DIXON_THREADS"); env != nullptr && *env != '\0') {
    try {
      const long n = std::stol(env);
      return n <= 0 ? 0U : static_cast<unsigned>(n);
    } catch (const std::exception&) {
      return 0U;
    }
  }
  return std::max(1U, std::thread::hardware_concurrency());
}

bool strict_deterministic_mode() { return configured_threads() == 0; }

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const unsigned threads = configured_threads();
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const auto count = static_cast<std::size_t>(threads) < n ? threads : static_cast<unsigned>(n);
  pool.reserve(count);
  for (unsigned t = 0; t < count; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace dixon
