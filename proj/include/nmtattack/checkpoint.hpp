#pragma once

#include <string>

#include "nmtattack/model.hpp"

namespace nmtattack {

// Binary checkpoint container: a header (magic, format version, model kind,
// ModelConfig) followed by named tensors as (name length, name bytes, rank,
// dims, row-major little-endian f64 data). Loading validates every declared
// shape against the config-derived model layout.

enum class ModelKind : std::uint32_t { Nmt = 1, Lm = 2 };

void save_checkpoint(const std::string& path, const NmtModel& model);
void save_checkpoint(const std::string& path, const CausalLm& model);

// Peeks at kind/config without loading tensors.
struct CheckpointInfo {
    ModelKind kind;
    ModelConfig config;
};
CheckpointInfo read_checkpoint_info(const std::string& path);

NmtModel load_nmt_checkpoint(const std::string& path);
CausalLm load_lm_checkpoint(const std::string& path);

}  // namespace nmtattack
