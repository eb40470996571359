#pragma once

#include <atomic>
#include <chrono>

#include "insightkit/model.hpp"

namespace insightkit {

class Clock {
 public:
  virtual ~Clock() = default;
  virtual Timestamp now() = 0;
};

class SystemClock final : public Clock {
 public:
  Timestamp now() override {
    using namespace std::chrono;
    return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
  }
};

// Monotonic tick counter. Replays stamp with it so outputs are byte-stable.
class LogicalClock final : public Clock {
 public:
  Timestamp now() override { return next_++; }

 private:
  std::atomic<Timestamp> next_{0};
};

}  // namespace insightkit
