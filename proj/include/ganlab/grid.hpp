#pragma once

// Experiment grid: every (discriminator objective, generator loss) cell over
// a list of seeds, aggregated by median final NNRMSE.

#include "ganlab/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace ganlab::grid {

struct GridCell {
    losses::DObjective d_objective;
    losses::GLossSpec g_loss;
    // Per-cell override of the number of D updates per cycle.
    std::optional<int> n_d;
};

struct ExperimentGrid {
    train::TrainConfig base;
    // Unset: each cell uses the default for its objective.
    std::optional<int> n_d;
    std::vector<GridCell> cells;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    // Write one scatter plot per cell, from the median run.
    bool svg = false;
};

// One table block: the listed classic losses, then every distance under
// DM, LM(mid), LM(real), EDM, ELM(mid), ELM(real). Invalid pairings stay in
// the list and are skipped when the grid runs.
std::vector<GridCell> table_block(const losses::DObjective& objective, const std::vector<losses::Family>& classic,
                                  const std::vector<losses::DistanceKind>& distances);

// Fully resolved config of one run.
train::TrainConfig config_for(const ExperimentGrid& grid, const GridCell& cell, std::uint64_t seed);

// Empty when the cell can run, otherwise the reason it is skipped.
std::string skip_reason(const GridCell& cell);

struct RunRow {
    std::size_t cell = 0;
    std::uint64_t seed = 0;
    int n_d = 0;
    double final_nnrmse = 0.0;
    bool diverged = false;
    int diverged_cycle = -1;
    double wall_time = 0.0;
};

struct CellSummary {
    GridCell cell;
    std::string skipped;
    double median_nnrmse = 0.0;
    int n_seeds = 0;
    int n_diverged = 0;
    // Index into GridResult::runs of the median run (lower middle for even counts).
    std::size_t median_run = 0;
};

struct GridResult {
    std::vector<RunRow> runs;
    std::vector<CellSummary> cells;

    // Columns: d_objective,family,distance,target,seed,n_d,final_nnrmse,diverged,diverged_cycle
    std::string runs_csv() const;
    // Columns: d_objective,family,distance,target,median_nnrmse,n_seeds,n_diverged,status
    std::string summary_csv() const;
};

// Column labels shared by both CSV files.
std::string objective_label(const losses::DObjective& d);
std::string distance_label(const losses::GLossSpec& g);
std::string target_label(const losses::GLossSpec& g);
std::string format_value(double v);

struct GridOptions {
    // 0: GANLAB_THREADS if set, else the hardware concurrency.
    int threads = 0;
    // Called after each finished run, from the worker thread, serialized.
    std::function<void(const RunRow&, const GridCell&)> on_run;
};

int default_threads();

// Runs every valid cell x seed. Results do not depend on the thread count.
// When out_dir is non-empty, writes runs.csv, summary.csv and, if requested,
// cell_<index>.svg there.
GridResult run_grid(const ExperimentGrid& grid, const std::filesystem::path& out_dir = {},
                    const GridOptions& options = {});

} // namespace ganlab::grid
