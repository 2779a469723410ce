#pragma once

// Plain-text model checkpoints.
//
//   rcg-checkpoint 1
//   arch obs_dim=32 num_classes=5 content_dim=4 ... sigma_rule=3
//   block enc_c.body.layer0.weight 2048
//   <values, one per line, %.17g>
//   ...
//   end
//
// Values round-trip exactly. Loading checks every block name and size.

#include <filesystem>
#include <istream>
#include <ostream>

#include "rcg/uda_trainer.hpp"

namespace rcg {

inline constexpr int kCheckpointVersion = 1;

void write_checkpoint(std::ostream& os, Model& model, const TrainConfig& cfg);
void save_checkpoint(const std::filesystem::path& path, Model& model, const TrainConfig& cfg);

/// Rebuilds the architecture recorded in the header and fills every block.
/// `cfg` supplies nothing but is updated with the recorded architecture.
Model read_checkpoint(std::istream& is, TrainConfig* cfg = nullptr);
Model load_checkpoint(const std::filesystem::path& path, TrainConfig* cfg = nullptr);

}  // namespace rcg
