#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "vrc/datamodel.hpp"
#include "vrc/tensor.hpp"

namespace vrc {

// Synthetic world where each predicate is a fixed translation in appearance
// space: a related object's appearance is its subject's appearance plus the
// predicate vector plus isotropic noise.
struct SynthConfig {
  std::size_t train_predicates = 20;
  std::size_t test_predicates = 5;
  std::size_t images = 600;
  std::size_t regions_per_image = 20;
  std::size_t appearance_dim = 32;
  std::size_t class_dim = 8;
  double mu = 4.0;     // norm of every predicate vector
  double sigma = 0.5;  // expected norm of the noise vector
  // Share of every predicate vector along one common axis. Above zero,
  // relationships have a consistent subject-to-object orientation, so a
  // reversed pair is distinguishable from the pair itself.
  double orientation = 0.5;
  std::size_t annotations_per_image = 2;
  // Hard mode: unannotated region pairs translated along predicates the
  // image does not carry.
  bool hard_mode = false;
  std::size_t distractors_per_image = 2;
  std::uint64_t seed = 0;

  // Throws ConfigError.
  void check() const;
};

struct SynthWorld {
  DatasetManifest manifest;
  std::map<int, Vector> predicate_vectors;
  Vector axis;  // unit orientation axis
};

SynthWorld generate_world(const SynthConfig& config);
DatasetManifest generate(const SynthConfig& config);

struct PredicateSeparation {
  int predicate_id = -1;
  std::size_t count = 0;
  double within = 0.0;  // mean distance between this predicate's difference vectors
  double across = 0.0;  // mean distance to other predicates' difference vectors
};

struct SeparabilityReport {
  std::vector<PredicateSeparation> predicates;
  double within = 0.0;  // over all same-predicate pairs
  double across = 0.0;  // over all different-predicate pairs
};

// Distance statistics of the ground-truth appearance differences
// (object minus subject) of matched annotations.
SeparabilityReport separability_report(const DatasetManifest& manifest);

}  // namespace vrc
