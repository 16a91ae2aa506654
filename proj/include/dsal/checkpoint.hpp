#ifndef DSAL_CHECKPOINT_HPP
#define DSAL_CHECKPOINT_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dsal/model.hpp"

namespace dsal {

// Versioned binary container: magic "DSCK", format version, checksum, a
// ModelConfig echo, the build seed, and name-ordered f64 parameter blobs.
// Integers and doubles are stored little-endian.

enum class CheckpointKind : std::uint8_t {
    General = 0,  // general tower + its pretraining heads only
    Full = 1,     // every parameter collection of the configuration
};

struct Checkpoint {
    CheckpointKind kind = CheckpointKind::Full;
    ModelConfig config;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, Tensor>> blobs;  // name-ordered
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);  // DataError on any mismatch

// snapshot a model into a container: General grabs the general tower and its
// heads, Full grabs everything
Checkpoint snapshot_model(const Model& m, CheckpointKind kind);
void save_model(const std::string& path, const Model& m, CheckpointKind kind);

// copy stored values into the model's parameters. Full checkpoints demand an
// exact ModelConfig echo and cover the parameter set exactly; General
// checkpoints only require the same encoder scale and fill the general tower.
void load_into_model(const std::string& path, Model& m);

}  // namespace dsal

#endif
