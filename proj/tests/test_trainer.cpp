#include "ganlab/config_io.hpp"
#include "ganlab/errors.hpp"
#include "ganlab/grid.hpp"
#include "ganlab/trainer.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

using namespace ganlab;
using losses::DistanceKind;
using losses::DObjectiveKind;
using losses::Family;
using train::TrainEvent;
using ad::Matrix;

namespace {

const losses::DObjective kWgan{DObjectiveKind::WassersteinGP, 10.0, losses::Sided::OneSided};

// Narrow networks and few cycles keep these runs in the millisecond range.
train::TrainConfig small_config(losses::DObjective d, losses::GLossSpec g)
{
    train::TrainConfig c;
    c.d_objective = d;
    c.g_loss = g;
    c.n_d = train::default_n_d(d.kind);
    c.disc_spec = train::default_discriminator_spec(d.kind);
    c.disc_spec.hidden_dims = {16, 16, 16};
    c.gen_spec.hidden_dims = {16, 16, 16};
    c.batch_m = 32;
    c.cycles = 20;
    c.eval_every = 10;
    c.eval_n = 100;
    c.lr_d = c.lr_g = 1e-3;
    return c;
}

std::filesystem::path scratch(const std::string& name)
{
    const auto dir = std::filesystem::temp_directory_path() / "ganlab_tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

bool same_params(const nets::MlpParams& a, const nets::MlpParams& b)
{
    for (int l = 0; l < nets::kLayers; ++l)
        if (a.weights[l] != b.weights[l] || a.biases[l] != b.biases[l])
            return false;
    return true;
}

} // namespace

TEST_CASE("defaults follow the training protocol")
{
    const train::TrainConfig c;
    CHECK(c.batch_m == 256);
    CHECK(c.cycles == 5000);
    CHECK(c.lr_d == 5e-5);
    CHECK(c.lr_g == 5e-5);
    CHECK(c.beta1 == 0.5);
    CHECK(c.beta2 == 0.999);
    CHECK(c.adam_eps == 1e-8);
    CHECK(c.latent_dim == 2);
    CHECK(c.eval_every == 250);
    CHECK(c.eval_n == 1000);
    CHECK(train::default_n_d(DObjectiveKind::CrossEntropy) == 1);
    CHECK(train::default_n_d(DObjectiveKind::LeastSquares) == 1);
    CHECK(train::default_n_d(DObjectiveKind::WassersteinGP) == 10);
    CHECK(train::default_discriminator_spec(DObjectiveKind::CrossEntropy).final_sigmoid);
    CHECK_FALSE(train::default_discriminator_spec(DObjectiveKind::LeastSquares).final_sigmoid);
    CHECK(c.gen_spec.hidden_dims == std::array<int, 3>{128, 128, 128});
    CHECK(c.gen_spec.leaky_slope == 0.2);
    CHECK_NOTHROW(c.validate());
}

TEST_CASE("config validation happens before training")
{
    train::TrainConfig c = small_config({}, {});
    c.cycles = 0;
    CHECK_THROWS_AS(train::train(c), ConfigError);
    c = small_config({}, {});
    c.n_d = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_config(kWgan, {Family::LM, DistanceKind::Abs, losses::Target::Mid});
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_config({DObjectiveKind::LeastSquares}, {Family::ClassicNonSaturating});
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("per-cycle event order")
{
    struct Case {
        Family family;
        bool real_sample;
    };
    for (const Case& k : {Case{Family::ClassicNonSaturating, false}, Case{Family::DM, true}, Case{Family::LM, false},
                          Case{Family::EDM, true}, Case{Family::ELM, false}}) {
        CAPTURE(losses::to_string(k.family));
        train::TrainConfig c = small_config({}, {k.family, DistanceKind::Square, losses::Target::Mid});
        c.cycles = 3;
        c.eval_every = 100;
        std::vector<std::pair<TrainEvent, int>> seen;
        train::train(c, [&](TrainEvent e, int cycle) { seen.emplace_back(e, cycle); });

        std::vector<std::pair<TrainEvent, int>> expected;
        for (int cycle = 1; cycle <= 3; ++cycle) {
            expected.emplace_back(TrainEvent::DBatchSample, cycle);
            expected.emplace_back(TrainEvent::DAscent, cycle);
            expected.emplace_back(TrainEvent::GLatentSample, cycle);
            if (k.real_sample)
                expected.emplace_back(TrainEvent::GRealSample, cycle);
            expected.emplace_back(TrainEvent::GDescent, cycle);
        }
        expected.emplace_back(TrainEvent::Evaluate, 3);
        CHECK(seen == expected);
    }
}

TEST_CASE("a small D step with lr 1e-6 does not decrease the objective on its batch")
{
    for (const losses::DObjective& d :
         {losses::DObjective{DObjectiveKind::CrossEntropy}, losses::DObjective{DObjectiveKind::LeastSquares}}) {
        train::TrainConfig c = small_config(d, {Family::ClassicLSGAN});
        c.lr_d = 1e-6;
        train::Trainer t(c);
        for (int trial = 0; trial < 5; ++trial) {
            const Matrix real = data::sample_swiss_roll(c.batch_m, c.data, t.rng()).xy();
            const Matrix z = nets::sample_z(c.batch_m, c.latent_dim, t.rng());
            const double before = t.d_step(real, z);
            CHECK(t.d_objective_value(real, z) >= before);
        }
    }
}

TEST_CASE("runs are bit-identical for identical configs")
{
    for (const auto& [d, g] : {std::pair{losses::DObjective{}, losses::GLossSpec{Family::EDM, DistanceKind::Abs}},
                               std::pair{kWgan, losses::GLossSpec{Family::ClassicWGAN}}}) {
        const train::TrainConfig c = small_config(d, g);
        const train::RunResult a = train::train(c);
        const train::RunResult b = train::train(c);
        REQUIRE(a.nnrmse_trace.size() == b.nnrmse_trace.size());
        for (std::size_t i = 0; i < a.nnrmse_trace.size(); ++i)
            CHECK(a.nnrmse_trace[i].value == b.nnrmse_trace[i].value);
        CHECK(a.final_nnrmse == b.final_nnrmse);
        CHECK(same_params(a.generator, b.generator));
        CHECK(a.d_obj_after_g_step.back().value == b.d_obj_after_g_step.back().value);
    }
}

TEST_CASE("trace shape")
{
    train::TrainConfig c = small_config({}, {});
    c.cycles = 25;
    const train::RunResult r = train::train(c);
    REQUIRE(r.nnrmse_trace.size() == 3);
    CHECK(r.nnrmse_trace[0].cycle == 10);
    CHECK(r.nnrmse_trace[1].cycle == 20);
    CHECK(r.nnrmse_trace[2].cycle == 25);
    CHECK(r.final_nnrmse == r.nnrmse_trace.back().value);
    CHECK(r.d_obj_after_d_step.size() == 3);
    CHECK(r.d_obj_after_g_step.size() == 3);
    CHECK_FALSE(r.diverged);
    CHECK(r.seed == c.seed);

    // The evaluation stream does not touch training: evaluating more often
    // leaves the final generator unchanged.
    c.eval_every = 1;
    CHECK(same_params(train::train(c).generator, r.generator));
}

TEST_CASE("non-finite losses are recorded as divergence")
{
    train::TrainConfig c = small_config({DObjectiveKind::LeastSquares}, {Family::ClassicLSGAN});
    c.lr_d = c.lr_g = 1e300;
    c.cycles = 50;
    const train::RunResult r = train::train(c);
    CHECK(r.diverged);
    CHECK(r.diverged_cycle >= 1);
    CHECK(std::isinf(r.final_nnrmse));
    CHECK_FALSE(r.divergence_reason.empty());
}

TEST_CASE("median treats diverged runs as +inf")
{
    const double inf = std::numeric_limits<double>::infinity();
    CHECK(train::median({3.0, 1.0, 2.0}) == 2.0);
    CHECK(train::median({4.0, 1.0, 2.0, 3.0}) == 2.5);
    CHECK(train::median({0.1, inf, inf}) == inf);
    CHECK(train::median({0.1, 0.2, inf}) == 0.2);
}

TEST_CASE("config JSON round trip and rejection")
{
    train::TrainConfig c = small_config(kWgan, {Family::EDM, DistanceKind::PseudoHuber});
    c.seed = 12345678901234ull;
    const train::TrainConfig back = io::parse_train_config(io::dump_train_config(c));
    CHECK(io::dump_train_config(back) == io::dump_train_config(c));
    CHECK(back.d_objective == c.d_objective);
    CHECK(back.g_loss == c.g_loss);
    CHECK(back.seed == c.seed);

    const train::TrainConfig w = io::parse_train_config(R"({"d_objective": {"kind": "wasserstein_gp"},
                                                            "g_loss": {"family": "wgan"}})");
    CHECK(w.n_d == 10);
    CHECK_FALSE(w.disc_spec.final_sigmoid);

    CHECK_THROWS_AS(io::parse_train_config(R"({"cycels": 10})"), ConfigError);
    CHECK_THROWS_AS(io::parse_train_config(R"({"cycles": "many"})"), ConfigError);
    CHECK_THROWS_AS(io::parse_train_config("{"), ConfigError);
    CHECK_THROWS_AS(io::parse_train_config(R"({"cycles": 0})"), ConfigError);
    CHECK_THROWS_AS(io::load_train_config(scratch("does-not-exist.json")), ConfigError);
}

TEST_CASE("run JSON round trip keeps the generator")
{
    const train::RunResult r = train::train(small_config({}, {}));
    const train::RunResult back = io::parse_run(io::dump_run(r));
    CHECK(back.final_nnrmse == r.final_nnrmse);
    CHECK(same_params(back.generator, r.generator));
    const auto a = train::evaluation_samples(r.config, r.generator, 20);
    const auto b = train::evaluation_samples(back.config, back.generator, 20);
    CHECK(a.fake.xy() == b.fake.xy());
    CHECK(data::nnrmse(a.real, a.fake) == r.final_nnrmse);
}

TEST_CASE("table block layout and skip markers")
{
    const auto cells = grid::table_block({}, {Family::ClassicNonSaturating, Family::ClassicSaturating},
                                         {DistanceKind::AbsLogDiff, DistanceKind::Square});
    REQUIRE(cells.size() == 2 + 2 * 6);
    CHECK(cells[2].g_loss.family == Family::DM);
    CHECK(cells[3].g_loss == losses::GLossSpec{Family::LM, DistanceKind::AbsLogDiff, losses::Target::Mid});
    CHECK(cells[4].g_loss.target == losses::Target::Real);
    CHECK(cells[5].g_loss.family == Family::EDM);

    const auto wgan = grid::table_block(kWgan, {Family::ClassicWGAN}, {DistanceKind::AbsLogDiff, DistanceKind::Abs});
    int skipped = 0;
    for (const auto& c : wgan)
        skipped += !grid::skip_reason(c).empty();
    // Log distance: all six; Abs: the four label-matching variants.
    CHECK(skipped == 6 + 4);
}

TEST_CASE("grid CSVs: one row per run, skipped cells marked, bytes reproducible")
{
    grid::ExperimentGrid g;
    g.base = small_config({}, {});
    g.seeds = {1, 2};
    g.cells = {grid::GridCell{{}, {Family::ClassicNonSaturating}, std::nullopt},
               grid::GridCell{kWgan, {Family::LM, DistanceKind::Abs, losses::Target::Mid}, std::nullopt},
               grid::GridCell{{DObjectiveKind::LeastSquares}, {Family::ClassicLSGAN}, 2}};
    const auto dir = scratch("grid");
    std::filesystem::remove_all(dir);

    grid::GridOptions one;
    one.threads = 1;
    const grid::GridResult a = grid::run_grid(g, dir, one);
    grid::GridOptions two;
    two.threads = 2;
    const grid::GridResult b = grid::run_grid(g, {}, two);

    CHECK(a.runs.size() == 4);
    CHECK(a.runs_csv() == b.runs_csv());
    CHECK(a.summary_csv() == b.summary_csv());
    CHECK(io::read_text(dir / "runs.csv") == a.runs_csv());
    CHECK(io::read_text(dir / "summary.csv") == a.summary_csv());
    CHECK(a.cells[1].skipped.size() > 0);
    CHECK(a.runs[2].n_d == 2);

    const std::string summary = a.summary_csv();
    CHECK(summary.rfind("d_objective,family,distance,target,median_nnrmse,n_seeds,n_diverged,status\n", 0) == 0);
    CHECK(summary.find(",skipped\n") != std::string::npos);
    CHECK(a.runs_csv().rfind("d_objective,family,distance,target,seed,n_d,final_nnrmse,diverged,diverged_cycle\n", 0)
          == 0);

    grid::ExperimentGrid single = g;
    single.cells.resize(1);
    single.seeds = {3};
    const std::string csv = grid::run_grid(single, {}, one).runs_csv();
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
}

TEST_CASE("grid JSON expands blocks")
{
    const grid::ExperimentGrid g = io::parse_grid(R"({
        "base": {"cycles": 10},
        "seeds": [4, 5],
        "blocks": [{"d_objective": {"kind": "cross_entropy"},
                    "classic": ["non_saturating", "saturating"],
                    "distances": ["abs", "square"]}]})");
    CHECK(g.seeds == std::vector<std::uint64_t>{4, 5});
    CHECK(g.cells.size() == 14);
    CHECK(g.base.cycles == 10);
    CHECK_THROWS_AS(io::parse_grid(R"({"cells": [{"g_loss": {"family": "dm", "distance": "cosine"}}]})"),
                    ConfigError);
}
