#pragma once

// Flat key=value run configuration.
//
//   # comment
//   lr_g = 0.0001
//   encoder_stage1 = 64,128
//
// Absent keys keep their defaults. Unknown keys raise ParseError naming the
// key; values that do not parse or break an invariant raise ValueError.

#include "crn/model.hpp"
#include "crn/trainer.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace crn {

struct RunConfig {
    NetConfig net;
    TrainConfig train;
    std::string train_data;  // manifest path
    std::string test_data;   // manifest path
    std::string out_dir;
};

RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);
// Every key with its applied value, in table order. Re-parses to an equal config.
std::string dump_config(const RunConfig& config);

// Net-only subset, used by checkpoints.
NetConfig parse_net_config(std::string_view text);
std::string dump_net_config(const NetConfig& config);

// Key names in table order.
std::vector<std::string> config_keys();

// Sets a single key. Same errors as parse_config, without the invariant check.
void apply_config_value(RunConfig& config, std::string_view key, std::string_view value);

}  // namespace crn
