#include "ganlab/config_io.hpp"

#include "ganlab/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace ganlab::io {

using nlohmann::json;
using train::TrainConfig;

namespace {

// Reads the keys of one JSON object and rejects the ones nobody asked for.
class Fields {
public:
    Fields(const json& j, std::string where)
      : j_(j), where_(std::move(where))
    {
        if (!j_.is_object())
            throw ConfigError(where_ + ": expected a JSON object");
    }

    bool has(const std::string& key)
    {
        seen_.insert(key);
        return j_.contains(key);
    }

    const json& at(const std::string& key)
    {
        seen_.insert(key);
        if (!j_.contains(key))
            throw ConfigError(where_ + ": missing key '" + key + "'");
        return j_.at(key);
    }

    std::string path(const std::string& key) const { return where_ + "." + key; }

    void read(const std::string& key, double& out)
    {
        if (has(key))
            out = number(j_.at(key), path(key));
    }

    void read(const std::string& key, int& out)
    {
        if (!has(key))
            return;
        const json& v = j_.at(key);
        if (!v.is_number_integer())
            throw ConfigError(path(key) + ": expected an integer");
        const auto x = v.get<long long>();
        if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
            throw ConfigError(path(key) + ": out of range");
        out = static_cast<int>(x);
    }

    void read(const std::string& key, std::uint64_t& out)
    {
        if (!has(key))
            return;
        const json& v = j_.at(key);
        if (v.is_number_unsigned())
            out = v.get<std::uint64_t>();
        else if (v.is_number_integer() && v.get<long long>() >= 0)
            out = static_cast<std::uint64_t>(v.get<long long>());
        else
            throw ConfigError(path(key) + ": expected a non-negative integer");
    }

    void read(const std::string& key, bool& out)
    {
        if (!has(key))
            return;
        if (!j_.at(key).is_boolean())
            throw ConfigError(path(key) + ": expected true or false");
        out = j_.at(key).get<bool>();
    }

    void read(const std::string& key, std::string& out)
    {
        if (!has(key))
            return;
        if (!j_.at(key).is_string())
            throw ConfigError(path(key) + ": expected a string");
        out = j_.at(key).get<std::string>();
    }

    void finish() const
    {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key()))
                throw ConfigError(where_ + ": unknown key '" + it.key() + "'");
    }

    // Numbers, plus "inf", "-inf" and "nan" for values JSON cannot hold.
    static double number(const json& v, const std::string& where)
    {
        if (v.is_number())
            return v.get<double>();
        if (v.is_string()) {
            const std::string s = v.get<std::string>();
            if (s == "inf")
                return std::numeric_limits<double>::infinity();
            if (s == "-inf")
                return -std::numeric_limits<double>::infinity();
            if (s == "nan")
                return std::numeric_limits<double>::quiet_NaN();
        }
        throw ConfigError(where + ": expected a number");
    }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

json number_json(double v)
{
    if (std::isnan(v))
        return "nan";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    return v;
}

// Parses a name with the given parser, reporting the JSON path on failure.
template <class Parse>
auto parse_enum(Fields& f, const std::string& key, Parse parse)
{
    std::string s;
    f.read(key, s);
    try {
        return parse(s);
    } catch (const ConfigError& e) {
        throw ConfigError(f.path(key) + ": " + e.what());
    }
}

losses::DObjective read_objective(const json& j, const std::string& where)
{
    Fields f(j, where);
    losses::DObjective d;
    d.kind = parse_enum(f, "kind", losses::parse_d_objective_kind);
    f.read("lambda", d.lambda);
    if (f.has("sided"))
        d.sided = parse_enum(f, "sided", losses::parse_sided);
    f.finish();
    d.validate();
    return d;
}

json objective_json(const losses::DObjective& d)
{
    json j{{"kind", losses::to_string(d.kind)}};
    if (d.kind == losses::DObjectiveKind::WassersteinGP) {
        j["lambda"] = d.lambda;
        j["sided"] = losses::to_string(d.sided);
    }
    return j;
}

losses::GLossSpec read_g_loss(const json& j, const std::string& where)
{
    Fields f(j, where);
    losses::GLossSpec g;
    g.family = parse_enum(f, "family", losses::parse_family);
    if (f.has("distance"))
        g.distance = parse_enum(f, "distance", losses::parse_distance);
    if (f.has("target"))
        g.target = parse_enum(f, "target", losses::parse_target);
    f.finish();
    return g;
}

json g_loss_json(const losses::GLossSpec& g)
{
    json j{{"family", losses::to_string(g.family)}};
    if (!g.is_classic())
        j["distance"] = losses::to_string(g.distance);
    if (g.uses_target())
        j["target"] = losses::to_string(g.target);
    return j;
}

void read_mlp_spec(const json& j, const std::string& where, nets::MlpSpec& spec)
{
    Fields f(j, where);
    f.read("in_dim", spec.in_dim);
    if (f.has("hidden_dims")) {
        const json& h = j.at("hidden_dims");
        if (!h.is_array() || h.size() != spec.hidden_dims.size())
            throw ConfigError(f.path("hidden_dims") + ": expected an array of 3 integers");
        for (std::size_t i = 0; i < h.size(); ++i) {
            if (!h[i].is_number_integer())
                throw ConfigError(f.path("hidden_dims") + ": expected an array of 3 integers");
            spec.hidden_dims[i] = h[i].get<int>();
        }
    }
    f.read("out_dim", spec.out_dim);
    f.read("final_sigmoid", spec.final_sigmoid);
    f.read("leaky_slope", spec.leaky_slope);
    f.finish();
}

json mlp_spec_json(const nets::MlpSpec& s)
{
    return {{"in_dim", s.in_dim},
            {"hidden_dims", s.hidden_dims},
            {"out_dim", s.out_dim},
            {"final_sigmoid", s.final_sigmoid},
            {"leaky_slope", s.leaky_slope}};
}

TrainConfig read_train_config(const json& j, const std::string& where)
{
    Fields f(j, where);
    TrainConfig c;
    if (f.has("d_objective"))
        c.d_objective = read_objective(j.at("d_objective"), f.path("d_objective"));
    if (f.has("g_loss"))
        c.g_loss = read_g_loss(j.at("g_loss"), f.path("g_loss"));
    c.n_d = train::default_n_d(c.d_objective.kind);
    f.read("n_d", c.n_d);
    f.read("batch_m", c.batch_m);
    f.read("cycles", c.cycles);
    f.read("lr_d", c.lr_d);
    f.read("lr_g", c.lr_g);
    f.read("beta1", c.beta1);
    f.read("beta2", c.beta2);
    f.read("adam_eps", c.adam_eps);
    f.read("latent_dim", c.latent_dim);
    f.read("seed", c.seed);
    f.read("eval_every", c.eval_every);
    f.read("eval_n", c.eval_n);
    c.gen_spec = train::default_generator_spec(c.latent_dim);
    if (f.has("gen_spec"))
        read_mlp_spec(j.at("gen_spec"), f.path("gen_spec"), c.gen_spec);
    c.disc_spec = train::default_discriminator_spec(c.d_objective.kind);
    if (f.has("disc_spec"))
        read_mlp_spec(j.at("disc_spec"), f.path("disc_spec"), c.disc_spec);
    if (f.has("data")) {
        Fields d(j.at("data"), f.path("data"));
        d.read("t_min", c.data.t_min);
        d.read("t_max", c.data.t_max);
        d.read("scale", c.data.scale);
        d.read("noise_sd", c.data.noise_sd);
        d.finish();
    }
    f.finish();
    return c;
}

json train_config_json(const TrainConfig& c)
{
    return {{"d_objective", objective_json(c.d_objective)},
            {"g_loss", g_loss_json(c.g_loss)},
            {"n_d", c.n_d},
            {"batch_m", c.batch_m},
            {"cycles", c.cycles},
            {"lr_d", c.lr_d},
            {"lr_g", c.lr_g},
            {"beta1", c.beta1},
            {"beta2", c.beta2},
            {"adam_eps", c.adam_eps},
            {"gen_spec", mlp_spec_json(c.gen_spec)},
            {"disc_spec", mlp_spec_json(c.disc_spec)},
            {"data", {{"t_min", c.data.t_min}, {"t_max", c.data.t_max}, {"scale", c.data.scale}, {"noise_sd", c.data.noise_sd}}},
            {"latent_dim", c.latent_dim},
            {"seed", c.seed},
            {"eval_every", c.eval_every},
            {"eval_n", c.eval_n}};
}

json parse_json(std::string_view text, const std::string& what)
{
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(what + ": invalid JSON: " + e.what());
    }
}

json matrix_json(const ad::Matrix& m)
{
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index k = 0; k < m.cols(); ++k)
            row.push_back(number_json(m(i, k)));
        rows.push_back(std::move(row));
    }
    return rows;
}

ad::Matrix read_matrix(const json& j, const std::string& where)
{
    if (!j.is_array() || j.empty() || !j[0].is_array())
        throw ConfigError(where + ": expected a non-empty array of rows");
    ad::Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(j[0].size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_array() || j[i].size() != j[0].size())
            throw ConfigError(where + ": ragged rows");
        for (std::size_t k = 0; k < j[i].size(); ++k)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = Fields::number(j[i][k], where);
    }
    return m;
}

json trace_json(const std::vector<train::TracePoint>& trace)
{
    json out = json::array();
    for (const train::TracePoint& p : trace)
        out.push_back({p.cycle, number_json(p.value)});
    return out;
}

std::vector<train::TracePoint> read_trace(const json& j, const std::string& where)
{
    if (!j.is_array())
        throw ConfigError(where + ": expected an array of [cycle, value] pairs");
    std::vector<train::TracePoint> out;
    for (const json& p : j) {
        if (!p.is_array() || p.size() != 2 || !p[0].is_number_integer())
            throw ConfigError(where + ": expected [cycle, value] pairs");
        out.push_back({p[0].get<int>(), Fields::number(p[1], where)});
    }
    return out;
}

} // namespace

TrainConfig parse_train_config(std::string_view json_text)
{
    TrainConfig c = read_train_config(parse_json(json_text, "config"), "config");
    c.validate();
    return c;
}

std::string dump_train_config(const TrainConfig& config) { return train_config_json(config).dump(2) + "\n"; }

grid::ExperimentGrid parse_grid(std::string_view json_text)
{
    const json j = parse_json(json_text, "grid");
    Fields f(j, "grid");
    grid::ExperimentGrid g;
    if (f.has("base"))
        g.base = read_train_config(j.at("base"), "grid.base");
    if (f.has("n_d")) {
        int n = 0;
        f.read("n_d", n);
        g.n_d = n;
    }
    if (f.has("seeds")) {
        const json& s = j.at("seeds");
        if (!s.is_array() || s.empty())
            throw ConfigError("grid.seeds: expected a non-empty array of integers");
        g.seeds.clear();
        for (const json& v : s) {
            if (!v.is_number_integer() || v.get<long long>() < 0)
                throw ConfigError("grid.seeds: expected non-negative integers");
            g.seeds.push_back(v.get<std::uint64_t>());
        }
    }
    f.read("svg", g.svg);
    if (f.has("blocks")) {
        const json& blocks = j.at("blocks");
        if (!blocks.is_array())
            throw ConfigError("grid.blocks: expected an array");
        for (std::size_t b = 0; b < blocks.size(); ++b) {
            const std::string where = "grid.blocks[" + std::to_string(b) + "]";
            Fields bf(blocks[b], where);
            const losses::DObjective d = read_objective(bf.at("d_objective"), bf.path("d_objective"));
            std::vector<losses::Family> classic;
            if (bf.has("classic"))
                for (const json& v : blocks[b].at("classic")) {
                    if (!v.is_string())
                        throw ConfigError(bf.path("classic") + ": expected family names");
                    classic.push_back(losses::parse_family(v.get<std::string>()));
                }
            std::vector<losses::DistanceKind> distances;
            if (bf.has("distances"))
                for (const json& v : blocks[b].at("distances")) {
                    if (!v.is_string())
                        throw ConfigError(bf.path("distances") + ": expected distance names");
                    distances.push_back(losses::parse_distance(v.get<std::string>()));
                }
            bf.finish();
            for (grid::GridCell& c : grid::table_block(d, classic, distances))
                g.cells.push_back(std::move(c));
        }
    }
    if (f.has("cells")) {
        const json& cells = j.at("cells");
        if (!cells.is_array())
            throw ConfigError("grid.cells: expected an array");
        for (std::size_t i = 0; i < cells.size(); ++i) {
            const std::string where = "grid.cells[" + std::to_string(i) + "]";
            Fields cf(cells[i], where);
            grid::GridCell c;
            c.d_objective = read_objective(cf.at("d_objective"), cf.path("d_objective"));
            c.g_loss = read_g_loss(cf.at("g_loss"), cf.path("g_loss"));
            if (cf.has("n_d")) {
                int n = 0;
                cf.read("n_d", n);
                c.n_d = n;
            }
            cf.finish();
            g.cells.push_back(std::move(c));
        }
    }
    f.finish();
    if (g.cells.empty())
        throw ConfigError("grid: no cells (give 'cells' or 'blocks')");
    return g;
}

std::string dump_run(const train::RunResult& run)
{
    json gen{{"weights", json::array()}, {"biases", json::array()}};
    for (int l = 0; l < nets::kLayers; ++l) {
        gen["weights"].push_back(matrix_json(run.generator.weights[l]));
        gen["biases"].push_back(matrix_json(run.generator.biases[l]));
    }
    const json j{{"config", train_config_json(run.config)},
                 {"seed", run.seed},
                 {"nnrmse_trace", trace_json(run.nnrmse_trace)},
                 {"final_nnrmse", number_json(run.final_nnrmse)},
                 {"d_obj_after_d_step", trace_json(run.d_obj_after_d_step)},
                 {"d_obj_after_g_step", trace_json(run.d_obj_after_g_step)},
                 {"diverged", run.diverged},
                 {"diverged_cycle", run.diverged_cycle},
                 {"divergence_reason", run.divergence_reason},
                 {"wall_time", run.wall_time},
                 {"generator", gen}};
    return j.dump(1) + "\n";
}

train::RunResult parse_run(std::string_view json_text)
{
    const json j = parse_json(json_text, "run");
    Fields f(j, "run");
    train::RunResult r;
    r.config = read_train_config(f.at("config"), "run.config");
    r.config.validate();
    f.read("seed", r.seed);
    r.nnrmse_trace = read_trace(f.at("nnrmse_trace"), "run.nnrmse_trace");
    r.final_nnrmse = Fields::number(f.at("final_nnrmse"), "run.final_nnrmse");
    if (f.has("d_obj_after_d_step"))
        r.d_obj_after_d_step = read_trace(j.at("d_obj_after_d_step"), "run.d_obj_after_d_step");
    if (f.has("d_obj_after_g_step"))
        r.d_obj_after_g_step = read_trace(j.at("d_obj_after_g_step"), "run.d_obj_after_g_step");
    f.read("diverged", r.diverged);
    f.read("diverged_cycle", r.diverged_cycle);
    f.read("divergence_reason", r.divergence_reason);
    f.read("wall_time", r.wall_time);

    Fields g(f.at("generator"), "run.generator");
    const json& w = g.at("weights");
    const json& b = g.at("biases");
    g.finish();
    if (!w.is_array() || !b.is_array() || w.size() != nets::kLayers || b.size() != nets::kLayers)
        throw ConfigError("run.generator: expected 4 weight and 4 bias matrices");
    for (int l = 0; l < nets::kLayers; ++l) {
        r.generator.weights[l] = read_matrix(w[l], "run.generator.weights");
        r.generator.biases[l] = read_matrix(b[l], "run.generator.biases");
        if (r.generator.weights[l].rows() != r.config.gen_spec.fan_in(l)
            || r.generator.weights[l].cols() != r.config.gen_spec.fan_out(l)
            || r.generator.biases[l].rows() != 1 || r.generator.biases[l].cols() != r.config.gen_spec.fan_out(l))
            throw ConfigError("run.generator: layer " + std::to_string(l) + " does not match gen_spec");
    }
    f.finish();
    return r;
}

std::string read_text(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot read " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_text(const std::filesystem::path& path, std::string_view text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open " + path.string() + " for writing");
    out << text;
    if (!out)
        throw IoError("failed writing " + path.string());
}

TrainConfig load_train_config(const std::filesystem::path& path) { return parse_train_config(read_text(path)); }

grid::ExperimentGrid load_grid(const std::filesystem::path& path) { return parse_grid(read_text(path)); }

void save_run(const train::RunResult& run, const std::filesystem::path& path) { write_text(path, dump_run(run)); }

train::RunResult load_run(const std::filesystem::path& path) { return parse_run(read_text(path)); }

} // namespace ganlab::io
