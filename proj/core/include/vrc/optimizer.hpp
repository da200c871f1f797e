#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace vrc {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  bool operator==(const AdamConfig&) const = default;
};

// Adaptive-moment descent over named flat tensors. Moment slots are created
// lazily on first update of a name.
class Adam {
 public:
  struct Slot {
    std::vector<double> m;
    std::vector<double> v;

    bool operator==(const Slot&) const = default;
  };

  Adam() = default;
  explicit Adam(AdamConfig config) : config_(config) {}

  // Advances the shared step counter; call once before the updates of a step.
  void begin_step() { ++step_; }

  void update(const std::string& name, std::span<double> param,
              std::span<const double> grad);

  const AdamConfig& config() const { return config_; }
  std::int64_t step() const { return step_; }
  const std::map<std::string, Slot>& slots() const { return slots_; }

  // Restores serialized state.
  void restore(std::int64_t step, std::map<std::string, Slot> slots) {
    step_ = step;
    slots_ = std::move(slots);
  }

  bool operator==(const Adam&) const = default;

 private:
  AdamConfig config_;
  std::int64_t step_ = 0;
  std::map<std::string, Slot> slots_;
};

}  // namespace vrc
