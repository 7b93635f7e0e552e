#pragma once

// Checked binary container for trained experts. Layout (all little-endian):
//   magic "UDME" | u32 version | u32 state_dim | u32 t_embed_dim |
//   u32 cond_embed_dim | u32 n_layer_dims | u32 layer_dims[] |
//   u32 n_labels | { i32 label, f64 row[cond_embed_dim] }... |
//   f64 null_row[cond_embed_dim] | f64 weight/bias tensors (row-major, layer
//   order) | u64 FNV-1a checksum of all preceding bytes.

#include <string>

#include "unite/expert.hpp"

namespace unite {

void save_model(const MlpExpert& expert, const std::string& path);

// Throws std::runtime_error on IO problems, bad magic/version, inconsistent
// dims, or checksum mismatch.
MlpExpert load_model(const std::string& path);

}  // namespace unite
