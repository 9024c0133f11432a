#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "voxgan/trainer.hpp"

namespace voxgan {

inline constexpr char kCheckpointMagic[4] = {'V', 'G', 'A', 'N'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Binary container, all integers and floats little-endian:
//   "VGAN" | u32 version
//   u32 n_entries, then per entry:
//     u32 name_len | name | u32 ndim | u64 dims[ndim] | f32 data[numel]
//   (generator/discriminator weights under their own names, Adam moments
//    under "opt_g.m/<name>", "opt_g.v/<name>", "opt_d.m/<name>", ...)
//   schedule: u32 stage | u32 target_stage | u32 phase | u8 finished |
//             i64 reals_shown_in_phase | i64 reals_per_phase |
//             u32 n_lr | f64 lr[n_lr] | u8 has_late | f64 late_rate |
//             f64 late_fraction | u32 n_batch | u32 batch[n_batch]
//   optimizers (g then d): i64 t | f64 beta1 | f64 beta2 | f64 epsilon
//   i64 step | u64 data_seed | u64 epoch | u64 position
//   u32 rng_len | rng state text
std::string serialize_checkpoint(const TrainState& state);
TrainState deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const TrainState& state,
                     const std::filesystem::path& path);
TrainState load_checkpoint(const std::filesystem::path& path);

}  // namespace voxgan
