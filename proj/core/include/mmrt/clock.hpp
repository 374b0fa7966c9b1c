#pragma once

#include <chrono>
#include <cstdint>

namespace mmrt {

/// Millisecond clock shared by every megamodel of a runtime.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual std::int64_t now() const = 0;
  /// Called once after every trace event is stamped.
  virtual void on_event() {}
};

class WallClock final : public Clock {
 public:
  std::int64_t now() const override {
    using namespace std::chrono;
    return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
  }
};

/// Deterministic clock: starts at `start` and advances by one per event.
class LogicalClock final : public Clock {
 public:
  explicit LogicalClock(std::int64_t start = 0) : value_(start) {}
  std::int64_t now() const override { return value_; }
  void on_event() override { ++value_; }

 private:
  std::int64_t value_;
};

}  // namespace mmrt
