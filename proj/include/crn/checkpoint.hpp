#pragma once

// Binary training checkpoint.
//
// Layout (all integers little-endian):
//   "CRNCKPT1"                       8-byte magic
//   u32 version                      currently 1
//   u32 section_count
//   section_count x {
//     u32 name_length, name bytes
//     u64 payload_length, payload bytes
//   }
//
// Sections, in write order:
//   net                 NetConfig as key=value text
//   generator           per parameter: u64 count, count x f64
//   discriminator       same as generator
//   adam.generator      per parameter: u64 step, u64 n1, n1 x f64, u64 n2, n2 x f64
//   adam.discriminator  same as adam.generator
//   mean_shapes         u64 categories, each {u32 len, name, u64 dim, dim x f64}, then u64 dim, dim x f64 (global)
//   counters            u64 iteration, u64 epoch
//   rng                 mt19937_64 state as decimal text
//
// f64 values are IEEE-754 bit patterns, so a round trip is bit-exact.

#include "crn/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace crn {

inline constexpr char kCheckpointMagic[] = "CRNCKPT1";
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string serialize_checkpoint(const TrainingState& state);
TrainingState deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const TrainingState& state);
TrainingState load_checkpoint(const std::filesystem::path& path);

}  // namespace crn
