#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "vrc/datamodel.hpp"
#include "vrc/tensor.hpp"

namespace testing {

inline vrc::BBox box(double x1, double y1, double x2, double y2) { return {x1, y1, x2, y2}; }

inline vrc::Region region(vrc::BBox b, std::size_t appearance_dim = 2, std::size_t class_dim = 2,
                          double objectness = 0.5) {
  vrc::Region r;
  r.box = b;
  r.appearance.assign(appearance_dim, 0.0);
  r.class_scores.assign(class_dim, 0.0);
  r.objectness = objectness;
  return r;
}

inline vrc::Vector random_vector(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  vrc::Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

inline vrc::Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c,
                                 double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  vrc::Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

// Scratch directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("vrc-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing
