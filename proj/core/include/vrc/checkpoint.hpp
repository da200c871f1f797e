#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "vrc/embedder.hpp"
#include "vrc/optimizer.hpp"
#include "vrc/similarity.hpp"

namespace vrc {

inline constexpr int kCheckpointSchemaVersion = 1;

// Everything needed to score, resume training, or reproduce a run: model
// weights, optimizer moments, progress counters and loss history. The
// training RNG is counter-based, so (seed, pretrain_steps, episodes_done)
// is its complete state.
struct Checkpoint {
  FeatureLayout layout;
  RelationEmbedder embedder;
  RelationNetParams relation;
  std::vector<int> train_predicates;
  std::uint64_t seed = 0;

  Adam pretrain_optimizer;
  Adam metric_optimizer;
  std::int64_t pretrain_steps = 0;
  std::int64_t episodes_done = 0;
  std::int64_t episodes_skipped = 0;
  std::vector<double> pretrain_loss_history;
  std::vector<double> loss_history;

  // Provenance: flags of the runs that produced this checkpoint.
  std::map<std::string, std::string> config;
};

bool same_weights(const Checkpoint& a, const Checkpoint& b);

std::string serialize_checkpoint(const Checkpoint& checkpoint);
// Throws ParseError, VersionError or ValidationError (shape mismatch).
Checkpoint parse_checkpoint(std::string_view text);

Checkpoint load_checkpoint(const std::filesystem::path& path);
// Atomic: writes a temporary file, then renames it into place.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);

}  // namespace vrc
