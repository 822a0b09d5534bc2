#include "ganlab/grid.hpp"

#include "ganlab/config_io.hpp"
#include "ganlab/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <mutex>
#include <sstream>
#include <thread>

namespace ganlab::grid {

using losses::DistanceKind;
using losses::DObjective;
using losses::DObjectiveKind;
using losses::Family;
using losses::GLossSpec;
using losses::Target;

std::vector<GridCell> table_block(const DObjective& objective, const std::vector<Family>& classic,
                                  const std::vector<DistanceKind>& distances)
{
    std::vector<GridCell> cells;
    for (Family f : classic)
        cells.push_back({objective, {f, DistanceKind::Square, Target::Mid}, std::nullopt});
    for (DistanceKind d : distances) {
        cells.push_back({objective, {Family::DM, d, Target::Mid}, std::nullopt});
        cells.push_back({objective, {Family::LM, d, Target::Mid}, std::nullopt});
        cells.push_back({objective, {Family::LM, d, Target::Real}, std::nullopt});
        cells.push_back({objective, {Family::EDM, d, Target::Mid}, std::nullopt});
        cells.push_back({objective, {Family::ELM, d, Target::Mid}, std::nullopt});
        cells.push_back({objective, {Family::ELM, d, Target::Real}, std::nullopt});
    }
    return cells;
}

train::TrainConfig config_for(const ExperimentGrid& grid, const GridCell& cell, std::uint64_t seed)
{
    train::TrainConfig c = grid.base;
    c.d_objective = cell.d_objective;
    c.g_loss = cell.g_loss;
    c.n_d = cell.n_d.value_or(grid.n_d.value_or(train::default_n_d(cell.d_objective.kind)));
    c.disc_spec.final_sigmoid = cell.d_objective.kind == DObjectiveKind::CrossEntropy;
    c.seed = seed;
    return c;
}

std::string skip_reason(const GridCell& cell)
{
    try {
        losses::validate_pairing(cell.g_loss, cell.d_objective);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

std::string objective_label(const DObjective& d)
{
    std::string s = losses::to_string(d.kind);
    if (d.kind == DObjectiveKind::WassersteinGP)
        s += "/" + losses::to_string(d.sided);
    return s;
}

std::string distance_label(const GLossSpec& g) { return g.is_classic() ? "-" : losses::to_string(g.distance); }

std::string target_label(const GLossSpec& g) { return g.uses_target() ? losses::to_string(g.target) : "-"; }

std::string format_value(double v)
{
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    if (std::isnan(v))
        return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

std::string cell_columns(const GridCell& c)
{
    return objective_label(c.d_objective) + ',' + losses::to_string(c.g_loss.family) + ',' + distance_label(c.g_loss)
           + ',' + target_label(c.g_loss);
}

} // namespace

std::string GridResult::runs_csv() const
{
    std::ostringstream os;
    os << "d_objective,family,distance,target,seed,n_d,final_nnrmse,diverged,diverged_cycle\n";
    for (const RunRow& r : runs)
        os << cell_columns(cells[r.cell].cell) << ',' << r.seed << ',' << r.n_d << ',' << format_value(r.final_nnrmse)
           << ',' << (r.diverged ? 1 : 0) << ',' << r.diverged_cycle << '\n';
    return os.str();
}

std::string GridResult::summary_csv() const
{
    std::ostringstream os;
    os << "d_objective,family,distance,target,median_nnrmse,n_seeds,n_diverged,status\n";
    for (const CellSummary& s : cells) {
        os << cell_columns(s.cell) << ',';
        if (s.skipped.empty())
            os << format_value(s.median_nnrmse) << ',' << s.n_seeds << ',' << s.n_diverged << ",ok\n";
        else
            os << "-,0,0,skipped\n";
    }
    return os.str();
}

int default_threads()
{
    int n = static_cast<int>(std::thread::hardware_concurrency());
    if (const char* env = std::getenv("GANLAB_THREADS")) {
        const int cap = std::atoi(env);
        if (cap >= 1)
            n = n > 0 ? std::min(n, cap) : cap;
    }
    return std::max(n, 1);
}

GridResult run_grid(const ExperimentGrid& grid, const std::filesystem::path& out_dir, const GridOptions& options)
{
    if (grid.seeds.empty())
        throw ConfigError("grid: seeds must not be empty");
    if (grid.cells.empty())
        throw ConfigError("grid: no cells");

    GridResult result;
    struct Job {
        std::size_t cell;
        std::uint64_t seed;
        train::TrainConfig config;
    };
    std::vector<Job> jobs;
    for (std::size_t i = 0; i < grid.cells.size(); ++i) {
        CellSummary s;
        s.cell = grid.cells[i];
        s.skipped = skip_reason(s.cell);
        if (s.skipped.empty()) {
            for (std::uint64_t seed : grid.seeds) {
                jobs.push_back({i, seed, config_for(grid, s.cell, seed)});
                // Surface invalid base settings before any run starts.
                jobs.back().config.validate();
            }
        }
        result.cells.push_back(std::move(s));
    }

    result.runs.resize(jobs.size());
    std::vector<nets::MlpParams> generators(grid.svg ? jobs.size() : 0);
    std::atomic<std::size_t> next{0};
    std::mutex report_mutex;
    const auto worker = [&] {
        for (std::size_t j = next++; j < jobs.size(); j = next++) {
            const Job& job = jobs[j];
            train::RunResult run = train::train(job.config);
            RunRow& row = result.runs[j];
            row.cell = job.cell;
            row.seed = job.seed;
            row.n_d = job.config.n_d;
            row.final_nnrmse = run.final_nnrmse;
            row.diverged = run.diverged;
            row.diverged_cycle = run.diverged_cycle;
            row.wall_time = run.wall_time;
            if (grid.svg)
                generators[j] = std::move(run.generator);
            if (options.on_run) {
                std::lock_guard<std::mutex> lock(report_mutex);
                options.on_run(row, grid.cells[job.cell]);
            }
        }
    };

    const int threads = std::max(1, std::min<int>(options.threads > 0 ? options.threads : default_threads(),
                                                   static_cast<int>(jobs.size())));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t)
            pool.emplace_back(worker);
        for (std::thread& t : pool)
            t.join();
    }

    for (std::size_t i = 0; i < result.cells.size(); ++i) {
        CellSummary& s = result.cells[i];
        if (!s.skipped.empty())
            continue;
        std::vector<std::size_t> mine;
        for (std::size_t j = 0; j < result.runs.size(); ++j)
            if (result.runs[j].cell == i)
                mine.push_back(j);
        std::vector<double> finals;
        for (std::size_t j : mine) {
            finals.push_back(result.runs[j].final_nnrmse);
            s.n_diverged += result.runs[j].diverged ? 1 : 0;
        }
        s.n_seeds = static_cast<int>(mine.size());
        s.median_nnrmse = train::median(finals);
        std::vector<std::size_t> order = mine;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return result.runs[a].final_nnrmse < result.runs[b].final_nnrmse;
        });
        s.median_run = order[(order.size() - 1) / 2];
    }

    if (!out_dir.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(out_dir, ec);
        if (ec)
            throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
        io::write_text(out_dir / "runs.csv", result.runs_csv());
        io::write_text(out_dir / "summary.csv", result.summary_csv());
        if (grid.svg) {
            for (std::size_t i = 0; i < result.cells.size(); ++i) {
                const CellSummary& s = result.cells[i];
                if (!s.skipped.empty())
                    continue;
                const Job& job = jobs[s.median_run];
                if (result.runs[s.median_run].diverged)
                    continue;
                const train::EvaluationSamples ev =
                    train::evaluation_samples(job.config, generators[s.median_run], job.config.cycles);
                data::scatter_svg(ev.real, ev.fake, out_dir / ("cell_" + std::to_string(i) + ".svg"));
            }
        }
    }
    return result;
}

} // namespace ganlab::grid
