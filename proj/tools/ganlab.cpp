// Command-line front end: train, grid, verify-divergences, edm-witness,
// gradcheck and plot.
//
// Exit codes: 0 success, 1 usage/config/IO error, 2 failed verification suite.

#include "ganlab/config_io.hpp"
#include "ganlab/divergence_lab.hpp"
#include "ganlab/errors.hpp"
#include "ganlab/gradcheck.hpp"
#include "ganlab/grid.hpp"
#include "ganlab/trainer.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>

using namespace ganlab;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kSuiteFailed = 2;

struct TrainArgs {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<int> cycles;
    std::optional<int> n_d;
    std::optional<int> batch_m;
    std::optional<int> eval_every;
    std::string out;
    std::string svg;
};

int run_train(const TrainArgs& a)
{
    train::TrainConfig c = a.config.empty() ? train::TrainConfig{} : io::load_train_config(a.config);
    if (a.config.empty())
        c.n_d = train::default_n_d(c.d_objective.kind);
    if (a.seed)
        c.seed = *a.seed;
    if (a.cycles)
        c.cycles = *a.cycles;
    if (a.n_d)
        c.n_d = *a.n_d;
    if (a.batch_m)
        c.batch_m = *a.batch_m;
    if (a.eval_every)
        c.eval_every = *a.eval_every;
    c.validate();

    std::cout << "d_objective " << grid::objective_label(c.d_objective) << ", g_loss "
              << losses::to_string(c.g_loss.family) << ' ' << grid::distance_label(c.g_loss) << ' '
              << grid::target_label(c.g_loss) << ", n_d " << c.n_d << ", cycles " << c.cycles << ", seed " << c.seed
              << '\n';
    const train::RunResult r = train::train(c);
    for (const train::TracePoint& p : r.nnrmse_trace)
        std::printf("cycle %6d  nnrmse %s\n", p.cycle, grid::format_value(p.value).c_str());
    if (r.diverged)
        std::printf("diverged at cycle %d: %s\n", r.diverged_cycle, r.divergence_reason.c_str());
    std::printf("final_nnrmse %s  wall_time %.1fs\n", grid::format_value(r.final_nnrmse).c_str(), r.wall_time);

    if (!a.out.empty())
        io::save_run(r, a.out);
    if (!a.svg.empty()) {
        const train::EvaluationSamples s = train::evaluation_samples(c, r.generator, r.nnrmse_trace.back().cycle);
        data::scatter_svg(s.real, s.fake, a.svg);
    }
    return kOk;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text)
{
    std::vector<std::uint64_t> seeds;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            const unsigned long long v = std::stoull(item, &used);
            if (used != item.size())
                throw std::invalid_argument(item);
            seeds.push_back(v);
        } catch (const std::exception&) {
            throw ConfigError("--seeds: '" + item + "' is not a non-negative integer");
        }
    }
    if (seeds.empty())
        throw ConfigError("--seeds: empty list");
    return seeds;
}

int run_grid(const std::string& config, const std::string& seeds, const std::string& out_dir, int threads, bool svg)
{
    grid::ExperimentGrid g = io::load_grid(config);
    if (!seeds.empty())
        g.seeds = parse_seeds(seeds);
    if (svg)
        g.svg = true;

    grid::GridOptions opts;
    opts.threads = threads;
    opts.on_run = [](const grid::RunRow& r, const grid::GridCell& c) {
        std::fprintf(stderr, "  %s %s %s %s seed %llu: %s (%.0fs)\n", grid::objective_label(c.d_objective).c_str(),
                     losses::to_string(c.g_loss.family).c_str(), grid::distance_label(c.g_loss).c_str(),
                     grid::target_label(c.g_loss).c_str(), static_cast<unsigned long long>(r.seed),
                     grid::format_value(r.final_nnrmse).c_str(), r.wall_time);
    };
    const grid::GridResult res = grid::run_grid(g, out_dir, opts);
    std::cout << res.summary_csv();
    if (!out_dir.empty())
        std::cout << "wrote " << out_dir << "/runs.csv and " << out_dir << "/summary.csv\n";
    return kOk;
}

int run_verify(int trials, int max_k, std::uint64_t seed, const std::string& csv)
{
    Rng rng(seed);
    const auto start = std::chrono::steady_clock::now();
    const divergence::DivergenceReport report = divergence::verify_divergence_properties(trials, max_k, rng);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << report.text();
    std::printf("elapsed %.2fs\n", secs);
    if (!csv.empty())
        io::write_text(csv, report.csv());
    return report.ok() ? kOk : kSuiteFailed;
}

int run_edm_witness(long budget, std::uint64_t seed)
{
    bool ok = true;
    for (auto mode : {divergence::SupportMode::Differing, divergence::SupportMode::Same}) {
        Rng rng(seed);
        const bool differing = mode == divergence::SupportMode::Differing;
        const auto found = divergence::find_edm_support_counterexample(rng, budget, mode);
        std::printf("%s supports, budget %ld: %s\n", differing ? "differing" : "same", budget,
                    found ? "instance with EDM = 0 and p != q found" : "no instance found");
        if (found) {
            std::printf("  EDM = %.3g\n  p =", found->edm);
            for (double v : found->p.probs())
                std::printf(" %.6g", v);
            std::printf("\n  q =");
            for (double v : found->q.probs())
                std::printf(" %.6g", v);
            std::printf("\n  D =");
            for (double v : found->d.values)
                std::printf(" %.6g", v);
            std::printf("\n");
        }
        // Expected: a witness for differing supports, none for same supports.
        ok = ok && (found.has_value() == differing);
    }
    return ok ? kOk : kSuiteFailed;
}

int run_gradcheck(int compositions, int discriminators, std::uint64_t seed, bool verbose)
{
    Rng rng(seed);
    const auto t0 = std::chrono::steady_clock::now();
    const gradcheck::GradcheckReport loss_report = gradcheck::run_gradcheck(compositions, rng);
    const auto t1 = std::chrono::steady_clock::now();
    const gradcheck::GradcheckReport penalty_report = gradcheck::run_penalty_gradcheck(discriminators, rng);
    const auto t2 = std::chrono::steady_clock::now();

    const auto show = [verbose](const char* title, const gradcheck::GradcheckReport& r, double secs) {
        std::cout << "== " << title << '\n';
        if (verbose) {
            std::cout << r.text();
        } else {
            std::istringstream lines(r.text());
            for (std::string line; std::getline(lines, line);)
                if (line.rfind("PASS ", 0) != 0)
                    std::cout << line << '\n';
        }
        std::printf("elapsed %.2fs\n", secs);
    };
    show("loss compositions", loss_report, std::chrono::duration<double>(t1 - t0).count());
    show("gradient penalty", penalty_report, std::chrono::duration<double>(t2 - t1).count());
    return loss_report.ok() && penalty_report.ok() ? kOk : kSuiteFailed;
}

int run_plot(const std::string& run_path, const std::string& out)
{
    const train::RunResult r = io::load_run(run_path);
    if (r.nnrmse_trace.empty())
        throw ConfigError(run_path + ": empty nnrmse_trace");
    const train::EvaluationSamples s = train::evaluation_samples(r.config, r.generator, r.nnrmse_trace.back().cycle);
    data::scatter_svg(s.real, s.fake, out);
    std::cout << "wrote " << out << '\n';
    return kOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"GAN loss-family lab on the swiss roll"};
    app.require_subcommand(1);

    TrainArgs ta;
    auto* train_cmd = app.add_subcommand("train", "Single training run from a JSON config; flags override it");
    train_cmd->add_option("--config", ta.config, "TrainConfig JSON (defaults when omitted)");
    train_cmd->add_option("--seed", ta.seed, "Seed");
    train_cmd->add_option("--cycles", ta.cycles, "Training cycles");
    train_cmd->add_option("--n-d", ta.n_d, "D updates per cycle");
    train_cmd->add_option("--batch-m", ta.batch_m, "Batch size");
    train_cmd->add_option("--eval-every", ta.eval_every, "Cycles between NNRMSE evaluations");
    train_cmd->add_option("--out", ta.out, "Write the run (config, traces, generator) as JSON");
    train_cmd->add_option("--svg", ta.svg, "Write a scatter plot of the final generator");

    std::string grid_config, grid_seeds, grid_out;
    int grid_threads = 0;
    bool grid_svg = false;
    auto* grid_cmd = app.add_subcommand("grid", "Run an experiment grid and write runs.csv and summary.csv");
    grid_cmd->add_option("--config", grid_config, "ExperimentGrid JSON")->required();
    grid_cmd->add_option("--seeds", grid_seeds, "Comma-separated seeds, e.g. 1,2,3,4,5");
    grid_cmd->add_option("--out-dir", grid_out, "Output directory");
    grid_cmd->add_option("--threads", grid_threads, "Parallel runs (default: GANLAB_THREADS or all cores)");
    grid_cmd->add_flag("--svg", grid_svg, "Scatter plot per cell from its median run");

    int trials = 1000, max_k = 6;
    std::uint64_t verify_seed = 1;
    std::string verify_csv;
    auto* verify_cmd = app.add_subcommand("verify-divergences", "Randomized checks of the divergence properties");
    verify_cmd->add_option("--trials", trials, "Trials")->capture_default_str();
    verify_cmd->add_option("--max-k", max_k, "Largest support size")->capture_default_str();
    verify_cmd->add_option("--seed", verify_seed, "Seed")->capture_default_str();
    verify_cmd->add_option("--csv", verify_csv, "Also write the report as CSV");

    long budget = 100000;
    std::uint64_t witness_seed = 1;
    auto* witness_cmd = app.add_subcommand("edm-witness",
                                           "Search for p != q with an optimal D and EDM = 0, per support mode");
    witness_cmd->add_option("--budget", budget, "Instances per mode")->capture_default_str();
    witness_cmd->add_option("--seed", witness_seed, "Seed")->capture_default_str();

    int compositions = 136, discriminators = 20;
    std::uint64_t gc_seed = 1;
    bool gc_verbose = false;
    auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference checks of the autodiff engine");
    gc_cmd->add_option("--compositions", compositions, "Random MLP/loss compositions")->capture_default_str();
    gc_cmd->add_option("--discriminators", discriminators, "Random discriminators for the penalty check")
        ->capture_default_str();
    gc_cmd->add_option("--seed", gc_seed, "Seed")->capture_default_str();
    gc_cmd->add_flag("-v,--verbose", gc_verbose, "Print every check");

    std::string plot_run, plot_out;
    auto* plot_cmd = app.add_subcommand("plot", "SVG scatter plot from a saved run");
    plot_cmd->add_option("--run", plot_run, "Run JSON written by train --out")->required();
    plot_cmd->add_option("--out", plot_out, "SVG path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (*train_cmd)
            return run_train(ta);
        if (*grid_cmd)
            return run_grid(grid_config, grid_seeds, grid_out, grid_threads, grid_svg);
        if (*verify_cmd)
            return run_verify(trials, max_k, verify_seed, verify_csv);
        if (*witness_cmd)
            return run_edm_witness(budget, witness_seed);
        if (*gc_cmd)
            return run_gradcheck(compositions, discriminators, gc_seed, gc_verbose);
        if (*plot_cmd)
            return run_plot(plot_run, plot_out);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kConfigError;
    }
    return kConfigError;
}
