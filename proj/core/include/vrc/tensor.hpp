#pragma once

#include <span>

#include <Eigen/Dense>

namespace vrc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Flat views over contiguous Eigen storage, for optimizers and serializers.
template <typename Derived>
std::span<double> flat(Eigen::PlainObjectBase<Derived>& t) {
  return {t.data(), static_cast<std::size_t>(t.size())};
}

template <typename Derived>
std::span<const double> flat(const Eigen::PlainObjectBase<Derived>& t) {
  return {t.data(), static_cast<std::size_t>(t.size())};
}

}  // namespace vrc
