#pragma once

// JSON persistence for training configs, experiment grids and run results.
// Field names mirror the C++ structs. Unknown keys are rejected; missing keys
// take the defaults of a fresh TrainConfig, except that n_d and disc_spec
// follow the discriminator objective unless given explicitly.

#include "ganlab/grid.hpp"
#include "ganlab/trainer.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace ganlab::io {

train::TrainConfig parse_train_config(std::string_view json_text);
std::string dump_train_config(const train::TrainConfig& config);

grid::ExperimentGrid parse_grid(std::string_view json_text);

// Config, traces, outcome and the final generator weights.
std::string dump_run(const train::RunResult& run);
train::RunResult parse_run(std::string_view json_text);

// Whole-file helpers. Missing or unreadable files raise ConfigError for
// inputs and IoError for outputs.
std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

train::TrainConfig load_train_config(const std::filesystem::path& path);
grid::ExperimentGrid load_grid(const std::filesystem::path& path);
void save_run(const train::RunResult& run, const std::filesystem::path& path);
train::RunResult load_run(const std::filesystem::path& path);

} // namespace ganlab::io
