#pragma once

#include <cstdint>

namespace tiger::nn {

/// Counts multiply-accumulates executed by convolution and matrix-product
/// kernels on the current thread while the counter is alive. Nested
/// counters forward their totals to the enclosing one on destruction.
class MacCounter {
 public:
  MacCounter();
  ~MacCounter();
  MacCounter(const MacCounter&) = delete;
  MacCounter& operator=(const MacCounter&) = delete;

  std::uint64_t count() const { return count_; }

  /// Called by kernels; a no-op when no counter is active.
  static void add(std::uint64_t macs);

 private:
  std::uint64_t count_ = 0;
  MacCounter* previous_ = nullptr;
};

}  // namespace tiger::nn
