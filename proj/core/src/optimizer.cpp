#include "vrc/optimizer.hpp"

#include <cmath>

#include "vrc/errors.hpp"

namespace vrc {

void Adam::update(const std::string& name, std::span<double> param,
                  std::span<const double> grad) {
  if (param.size() != grad.size()) {
    throw ValidationError("gradient size mismatch for '" + name + "'");
  }
  if (step_ <= 0) throw ConfigError("Adam::update before begin_step");
  auto& slot = slots_[name];
  if (slot.m.empty()) {
    slot.m.assign(param.size(), 0.0);
    slot.v.assign(param.size(), 0.0);
  } else if (slot.m.size() != param.size()) {
    throw ValidationError("optimizer slot '" + name + "' changed shape");
  }
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double t = static_cast<double>(step_);
  const double c1 = 1.0 - std::pow(b1, t);
  const double c2 = 1.0 - std::pow(b2, t);
  for (std::size_t i = 0; i < param.size(); ++i) {
    slot.m[i] = b1 * slot.m[i] + (1.0 - b1) * grad[i];
    slot.v[i] = b2 * slot.v[i] + (1.0 - b2) * grad[i] * grad[i];
    const double mhat = slot.m[i] / c1;
    const double vhat = slot.v[i] / c2;
    param[i] -= config_.learning_rate * mhat / (std::sqrt(vhat) + config_.epsilon);
  }
}

}  // namespace vrc
