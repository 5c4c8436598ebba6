#include "tiger/nn/mac_counter.hpp"

namespace tiger::nn {
namespace {
thread_local MacCounter* current = nullptr;
}

MacCounter::MacCounter() : previous_(current) { current = this; }

MacCounter::~MacCounter() {
  current = previous_;
  if (previous_ != nullptr) previous_->count_ += count_;
}

void MacCounter::add(std::uint64_t macs) {
  if (current != nullptr) current->count_ += macs;
}

}  // namespace tiger::nn
