#include "pfstab/config.hpp"

#include <cctype>
#include <cmath>
#include <numbers>
#include <set>

#include <json.hpp>

#include "pfstab/error.hpp"
#include "pfstab/fileio.hpp"
#include "pfstab/rng.hpp"

namespace pfstab {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& path, const std::string& msg) {
    fail(ErrorKind::Config, "config " + path + ": " + msg);
}

void allow_keys(const json& obj, const std::string& path, std::initializer_list<const char*> keys) {
    if (!obj.is_object()) bad(path, "expected an object");
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [k, v] : obj.items())
        if (!allowed.count(k)) bad(path.empty() ? k : path + "." + k, "unknown key");
}

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

double number(const json& v, const std::string& path) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        try {
            return parse_number_expression(v.get<std::string>());
        } catch (const Error& e) {
            bad(path, e.what());
        }
    }
    bad(path, "expected a number");
}

std::size_t count(const json& v, const std::string& path) {
    if (!v.is_number_integer() || v.get<long long>() < 0) bad(path, "expected a nonnegative integer");
    return v.get<std::size_t>();
}

std::string text(const json& v, const std::string& path) {
    if (!v.is_string()) bad(path, "expected a string");
    return v.get<std::string>();
}

bool flag(const json& v, const std::string& path) {
    if (!v.is_boolean()) bad(path, "expected true or false");
    return v.get<bool>();
}

std::vector<double> numbers(const json& v, const std::string& path) {
    if (!v.is_array()) bad(path, "expected an array");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number(v[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

/// Rethrows library validation errors with the config path attached.
template <class F>
auto at_path(const std::string& path, F&& f) {
    try {
        return f();
    } catch (const Error& e) {
        bad(path, e.what());
    }
}

void parse_model(const json& j, ModelConfig& m) {
    const std::string p = "model";
    allow_keys(j, p, {"type", "dt", "integrator", "noise_channel", "gravity", "length", "pole_mass", "cart_mass"});
    if (j.contains("type")) m.type = text(j["type"], join(p, "type"));
    if (m.type != "pendulum") bad(join(p, "type"), "only 'pendulum' is supported");
    if (j.contains("dt")) m.dt = number(j["dt"], join(p, "dt"));
    if (j.contains("integrator"))
        m.integrator = at_path(join(p, "integrator"), [&] { return parse_integrator(j["integrator"].get<std::string>()); });
    if (j.contains("noise_channel"))
        m.channel = at_path(join(p, "noise_channel"),
                            [&] { return parse_pendulum_noise(text(j["noise_channel"], join(p, "noise_channel"))); });
    if (j.contains("gravity")) m.params.gravity = number(j["gravity"], join(p, "gravity"));
    if (j.contains("length")) m.params.length = number(j["length"], join(p, "length"));
    if (j.contains("pole_mass")) m.params.pole_mass = number(j["pole_mass"], join(p, "pole_mass"));
    if (j.contains("cart_mass")) m.params.cart_mass = number(j["cart_mass"], join(p, "cart_mass"));
}

void parse_grid(const json& j, GridConfig& g) {
    const std::string p = "grid";
    allow_keys(j, p, {"bounds", "counts", "wrap", "attractor"});
    if (j.contains("bounds")) {
        const json& b = j["bounds"];
        if (!b.is_array()) bad(join(p, "bounds"), "expected an array of [lower, upper] pairs");
        g.bounds.clear();
        for (std::size_t i = 0; i < b.size(); ++i) {
            const std::string q = join(p, "bounds") + "[" + std::to_string(i) + "]";
            const auto pair = numbers(b[i], q);
            if (pair.size() != 2) bad(q, "expected [lower, upper]");
            g.bounds.push_back({pair[0], pair[1]});
        }
    }
    if (j.contains("counts")) {
        const json& c = j["counts"];
        if (!c.is_array()) bad(join(p, "counts"), "expected an array");
        g.counts.clear();
        for (std::size_t i = 0; i < c.size(); ++i) g.counts.push_back(count(c[i], join(p, "counts")));
    }
    if (j.contains("wrap")) {
        const json& w = j["wrap"];
        if (!w.is_array()) bad(join(p, "wrap"), "expected an array");
        g.wrap.clear();
        for (std::size_t i = 0; i < w.size(); ++i) g.wrap.push_back(flag(w[i], join(p, "wrap")));
    }
    if (j.contains("attractor")) {
        const json& a = j["attractor"];
        const std::string q = join(p, "attractor");
        allow_keys(a, q, {"center", "half_widths"});
        if (a.contains("center")) g.attractor_center = numbers(a["center"], join(q, "center"));
        if (a.contains("half_widths")) g.attractor_half_widths = numbers(a["half_widths"], join(q, "half_widths"));
    }
}

void parse_controls(const json& j, std::vector<Point>& controls) {
    const std::string p = "controls";
    allow_keys(j, p, {"values", "min", "max", "step"});
    if (j.contains("values")) {
        if (j.contains("min") || j.contains("max") || j.contains("step"))
            bad(p, "give either values or min/max/step");
        controls.clear();
        for (double v : numbers(j["values"], join(p, "values"))) controls.push_back({v});
    } else if (j.contains("min") || j.contains("max") || j.contains("step")) {
        if (!(j.contains("min") && j.contains("max") && j.contains("step"))) bad(p, "min, max and step go together");
        const double lo = number(j["min"], join(p, "min"));
        const double hi = number(j["max"], join(p, "max"));
        const double step = number(j["step"], join(p, "step"));
        controls = at_path(p, [&] { return ControlGrid::uniform(lo, hi, step).values(); });
    }
}

void parse_noise(const json& j, NoiseConfig& n) {
    const std::string p = "noise";
    allow_keys(j, p, {"type", "sigma", "levels", "p"});
    if (j.contains("type")) {
        const std::string t = text(j["type"], join(p, "type"));
        if (t == "uniform")
            n.kind = NoiseKind::Uniform;
        else if (t == "bernoulli")
            n.kind = NoiseKind::Bernoulli;
        else if (t == "none")
            n.kind = NoiseKind::None;
        else
            bad(join(p, "type"), "expected uniform, bernoulli or none");
    }
    if (j.contains("sigma")) n.sigma = number(j["sigma"], join(p, "sigma"));
    if (j.contains("levels")) n.levels = count(j["levels"], join(p, "levels"));
    if (j.contains("p")) n.p = number(j["p"], join(p, "p"));
}

void parse_cost(const json& j, RunConfig& c) {
    const std::string p = "cost";
    allow_keys(j, p, {"type", "quadrature", "sink_penalty", "out_of_domain"});
    if (j.contains("type") && text(j["type"], join(p, "type")) != "quadratic")
        bad(join(p, "type"), "only 'quadratic' is supported");
    if (j.contains("quadrature"))
        c.quadrature = at_path(join(p, "quadrature"),
                               [&] { return parse_cost_quadrature(text(j["quadrature"], join(p, "quadrature"))); });
    if (j.contains("sink_penalty")) c.sink_penalty = number(j["sink_penalty"], join(p, "sink_penalty"));
    if (j.contains("out_of_domain"))
        c.out_of_domain = at_path(join(p, "out_of_domain"),
                                  [&] { return parse_out_of_domain(text(j["out_of_domain"], join(p, "out_of_domain"))); });
}

void parse_lp(const json& j, LpConfig& lp) {
    const std::string p = "lp";
    allow_keys(j, p, {"gamma", "gamma_candidates", "mass", "tolerances", "max_iterations"});
    if (j.contains("gamma")) {
        if (j["gamma"].is_string() && j["gamma"].get<std::string>() == "auto")
            lp.gamma.reset();
        else
            lp.gamma = number(j["gamma"], join(p, "gamma"));
    }
    if (j.contains("gamma_candidates")) lp.gamma_candidates = numbers(j["gamma_candidates"], join(p, "gamma_candidates"));
    if (j.contains("mass")) {
        const std::string m = text(j["mass"], join(p, "mass"));
        if (m == "volume")
            lp.mass = MassChoice::CellVolume;
        else if (m == "unit")
            lp.mass = MassChoice::Unit;
        else
            bad(join(p, "mass"), "expected volume or unit");
    }
    if (j.contains("tolerances")) {
        const json& t = j["tolerances"];
        const std::string q = join(p, "tolerances");
        allow_keys(t, q, {"feasibility", "gap", "slack", "positivity"});
        if (t.contains("feasibility")) lp.tolerances.feasibility = number(t["feasibility"], join(q, "feasibility"));
        if (t.contains("gap")) lp.tolerances.gap = number(t["gap"], join(q, "gap"));
        if (t.contains("slack")) lp.tolerances.slack = number(t["slack"], join(q, "slack"));
        if (t.contains("positivity")) lp.tolerances.positivity = number(t["positivity"], join(q, "positivity"));
    }
    if (j.contains("max_iterations")) lp.max_iterations = count(j["max_iterations"], join(p, "max_iterations"));
}

void parse_verify(const json& j, VerifyConfig& v) {
    const std::string p = "verify";
    allow_keys(j, p, {"inits_per_cell", "horizon", "continuous_noise", "sample_starts", "local_gain"});
    if (j.contains("inits_per_cell")) v.inits_per_cell = count(j["inits_per_cell"], join(p, "inits_per_cell"));
    if (j.contains("horizon")) v.horizon = count(j["horizon"], join(p, "horizon"));
    if (j.contains("continuous_noise")) v.continuous_noise = flag(j["continuous_noise"], join(p, "continuous_noise"));
    if (j.contains("sample_starts")) {
        const json& s = j["sample_starts"];
        if (!s.is_array()) bad(join(p, "sample_starts"), "expected an array of points");
        v.sample_starts.clear();
        for (std::size_t i = 0; i < s.size(); ++i)
            v.sample_starts.push_back(numbers(s[i], join(p, "sample_starts") + "[" + std::to_string(i) + "]"));
    }
    if (j.contains("local_gain")) v.local_gain = numbers(j["local_gain"], join(p, "local_gain"));
}

void validate(const RunConfig& c) {
    if (!(c.model.dt > 0.0) || !std::isfinite(c.model.dt)) bad("model.dt", "must be positive");
    const auto& pp = c.model.params;
    if (!(pp.gravity > 0.0 && pp.length > 0.0 && pp.pole_mass > 0.0 && pp.cart_mass >= 0.0))
        bad("model", "physical parameters must be positive");
    if (c.grid.bounds.size() != 2) bad("grid.bounds", "the pendulum needs a two-dimensional grid");
    const Partition part = make_partition(c);
    if (c.controls.empty()) bad("controls", "need at least one control");
    for (const Point& u : c.controls)
        if (u.size() != 1 || !std::isfinite(u[0])) bad("controls", "the pendulum takes one finite scalar control");
    at_path("controls", [&] { return make_controls(c); });
    at_path("noise", [&] { return make_noise(c); });
    if (c.model.channel == PendulumNoise::Damping && c.noise.kind == NoiseKind::Bernoulli)
        bad("noise", "bernoulli noise belongs to the input-erasure channel");
    if (c.model.channel == PendulumNoise::InputErasure && c.noise.kind == NoiseKind::Uniform)
        bad("noise", "uniform noise belongs to the damping channel");
    if (!(c.sink_penalty >= 0.0) || !std::isfinite(c.sink_penalty)) bad("cost.sink_penalty", "must be finite and >= 0");
    if (c.samples_per_cell == 0) bad("sampling.samples_per_cell", "must be at least 1");
    if (c.lp.gamma && (!(*c.lp.gamma > 0.0) || !std::isfinite(*c.lp.gamma))) bad("lp.gamma", "must be positive");
    if (c.lp.gamma_candidates.empty()) bad("lp.gamma_candidates", "must not be empty");
    for (std::size_t i = 0; i < c.lp.gamma_candidates.size(); ++i) {
        if (!(c.lp.gamma_candidates[i] > 0.0)) bad("lp.gamma_candidates", "must be positive");
        if (i > 0 && !(c.lp.gamma_candidates[i] > c.lp.gamma_candidates[i - 1]))
            bad("lp.gamma_candidates", "must be strictly ascending");
    }
    const auto& t = c.lp.tolerances;
    if (!(t.feasibility > 0.0 && t.gap > 0.0 && t.slack > 0.0 && t.positivity > 0.0))
        bad("lp.tolerances", "must be positive");
    if (c.lp.max_iterations == 0) bad("lp.max_iterations", "must be at least 1");
    if (c.verify.inits_per_cell == 0) bad("verify.inits_per_cell", "must be at least 1");
    if (c.verify.horizon == 0) bad("verify.horizon", "must be at least 1");
    for (const Point& x : c.verify.sample_starts)
        if (x.size() != part.dimension()) bad("verify.sample_starts", "points must have the grid dimension");
    if (!c.verify.local_gain.empty() && c.verify.local_gain.size() != part.dimension())
        bad("verify.local_gain", "expected one gain per state dimension");
}

json point_json(const Point& p) { return json(p); }

json config_json(const RunConfig& c) {
    json j;
    j["model"] = {{"type", c.model.type},
                  {"dt", c.model.dt},
                  {"integrator", to_string(c.model.integrator)},
                  {"noise_channel", to_string(c.model.channel)},
                  {"gravity", c.model.params.gravity},
                  {"length", c.model.params.length},
                  {"pole_mass", c.model.params.pole_mass},
                  {"cart_mass", c.model.params.cart_mass}};
    json bounds = json::array();
    for (const auto& b : c.grid.bounds) bounds.push_back({b.lower, b.upper});
    j["grid"] = {{"bounds", bounds},
                 {"counts", c.grid.counts},
                 {"wrap", c.grid.wrap},
                 {"attractor", {{"center", c.grid.attractor_center}, {"half_widths", c.grid.attractor_half_widths}}}};
    json values = json::array();
    for (const Point& u : c.controls) values.push_back(u.at(0));
    j["controls"] = {{"values", values}};
    const char* kind = c.noise.kind == NoiseKind::Uniform ? "uniform" : c.noise.kind == NoiseKind::Bernoulli ? "bernoulli" : "none";
    j["noise"] = {{"type", kind}, {"sigma", c.noise.sigma}, {"levels", c.noise.levels}, {"p", c.noise.p}};
    j["cost"] = {{"type", "quadratic"},
                 {"quadrature", to_string(c.quadrature)},
                 {"sink_penalty", c.sink_penalty},
                 {"out_of_domain", to_string(c.out_of_domain)}};
    j["sampling"] = {{"samples_per_cell", c.samples_per_cell}, {"scheme", to_string(c.scheme)}};
    j["lp"] = {{"gamma", c.lp.gamma ? json(*c.lp.gamma) : json("auto")},
               {"gamma_candidates", c.lp.gamma_candidates},
               {"mass", c.lp.mass == MassChoice::CellVolume ? "volume" : "unit"},
               {"tolerances",
                {{"feasibility", c.lp.tolerances.feasibility},
                 {"gap", c.lp.tolerances.gap},
                 {"slack", c.lp.tolerances.slack},
                 {"positivity", c.lp.tolerances.positivity}}},
               {"max_iterations", c.lp.max_iterations}};
    j["certificate"] = {{"neumann_terms", c.neumann_terms}};
    json starts = json::array();
    for (const Point& x : c.verify.sample_starts) starts.push_back(point_json(x));
    j["verify"] = {{"inits_per_cell", c.verify.inits_per_cell},
                   {"horizon", c.verify.horizon},
                   {"continuous_noise", c.verify.continuous_noise},
                   {"sample_starts", starts},
                   {"local_gain", c.verify.local_gain}};
    j["report"] = {{"heatmaps", c.heatmaps}};
    j["seed"] = c.seed;
    j["output"] = c.output.string();
    return j;
}

std::uint64_t digest_of(const json& j) { return fnv1a64(j.dump()); }

}  // namespace

double parse_number_expression(const std::string& input) {
    std::string s;
    for (char ch : input)
        if (!std::isspace(static_cast<unsigned char>(ch))) s += ch;
    if (s.empty()) fail(ErrorKind::Config, "empty number");
    double sign = 1.0;
    std::size_t pos = 0;
    if (s[0] == '-' || s[0] == '+') {
        sign = s[0] == '-' ? -1.0 : 1.0;
        pos = 1;
    }
    auto factor = [&](std::size_t& i) -> double {
        if (s.compare(i, 2, "pi") == 0) {
            i += 2;
            return std::numbers::pi;
        }
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(s.substr(i), &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0) fail(ErrorKind::Config, "cannot read a number from '" + input + "'");
        i += used;
        return v;
    };
    double value = factor(pos);
    while (pos < s.size()) {
        const char op = s[pos++];
        if (op != '*' && op != '/') fail(ErrorKind::Config, "cannot read a number from '" + input + "'");
        const double f = factor(pos);
        value = op == '*' ? value * f : value / f;
    }
    value *= sign;
    if (!std::isfinite(value)) fail(ErrorKind::Config, "'" + input + "' is not finite");
    return value;
}

RunConfig default_config() {
    RunConfig c;
    const double pi = std::numbers::pi;
    c.grid.bounds = {{-pi, pi}, {-10.0, 10.0}};
    c.grid.counts = {70, 70};
    c.grid.wrap = {true, false};
    c.grid.attractor_center = {0.0, 0.0};
    c.controls = ControlGrid::uniform(-80.0, 80.0, 10.0).values();
    return c;
}

RunConfig parse_config(const std::string& input) {
    json j;
    try {
        j = json::parse(input);
    } catch (const json::parse_error& e) {
        fail(ErrorKind::Config, std::string("config is not valid JSON: ") + e.what());
    }
    allow_keys(j, "", {"model", "grid", "controls", "noise", "cost", "sampling", "lp", "certificate", "verify",
                       "report", "seed", "output"});
    RunConfig c = default_config();
    if (j.contains("model")) parse_model(j["model"], c.model);
    if (j.contains("grid")) parse_grid(j["grid"], c.grid);
    if (j.contains("controls")) parse_controls(j["controls"], c.controls);
    if (j.contains("noise")) parse_noise(j["noise"], c.noise);
    if (j.contains("cost")) parse_cost(j["cost"], c);
    if (j.contains("sampling")) {
        const json& s = j["sampling"];
        allow_keys(s, "sampling", {"samples_per_cell", "scheme"});
        if (s.contains("samples_per_cell")) c.samples_per_cell = count(s["samples_per_cell"], "sampling.samples_per_cell");
        if (s.contains("scheme"))
            c.scheme = at_path("sampling.scheme", [&] { return parse_sample_scheme(text(s["scheme"], "sampling.scheme")); });
    }
    if (j.contains("lp")) parse_lp(j["lp"], c.lp);
    if (j.contains("certificate")) {
        allow_keys(j["certificate"], "certificate", {"neumann_terms"});
        if (j["certificate"].contains("neumann_terms"))
            c.neumann_terms = count(j["certificate"]["neumann_terms"], "certificate.neumann_terms");
    }
    if (j.contains("verify")) parse_verify(j["verify"], c.verify);
    if (j.contains("report")) {
        allow_keys(j["report"], "report", {"heatmaps"});
        if (j["report"].contains("heatmaps")) c.heatmaps = flag(j["report"]["heatmaps"], "report.heatmaps");
    }
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned() && !(j["seed"].is_number_integer() && j["seed"].get<long long>() >= 0))
            bad("seed", "expected a nonnegative integer");
        c.seed = j["seed"].get<std::uint64_t>();
    }
    if (j.contains("output")) c.output = text(j["output"], "output");
    validate(c);
    return c;
}

RunConfig load_config(const std::filesystem::path& path) { return parse_config(read_text_file(path)); }

std::string serialize_config(const RunConfig& config) { return config_json(config).dump(2) + "\n"; }

Partition make_partition(const RunConfig& c) {
    const auto& g = c.grid;
    const std::size_t d = g.bounds.size();
    if (g.counts.size() != d || g.wrap.size() != d) bad("grid", "bounds, counts and wrap must have equal length");
    Point center = g.attractor_center.empty() ? Point(d, 0.0) : g.attractor_center;
    Point half = g.attractor_half_widths;
    if (half.empty())
        for (std::size_t k = 0; k < d; ++k)
            half.push_back((g.bounds[k].upper - g.bounds[k].lower) / static_cast<double>(std::max<std::size_t>(g.counts[k], 1)));
    if (center.size() != d || half.size() != d) bad("grid.attractor", "center and half_widths need the grid dimension");
    Box region;
    for (std::size_t k = 0; k < d; ++k) {
        if (!(half[k] >= 0.0)) bad("grid.attractor.half_widths", "must be nonnegative");
        region.sides.push_back({center[k] - half[k], center[k] + half[k]});
    }
    return at_path("grid", [&] { return Partition::build_grid(g.bounds, g.counts, g.wrap, region); });
}

std::unique_ptr<SystemModel> make_model(const RunConfig& c) {
    return std::make_unique<PendulumModel>(c.model.dt, c.model.channel, c.model.integrator, c.model.params);
}

NoiseModel make_noise(const RunConfig& c) {
    switch (c.noise.kind) {
        case NoiseKind::Uniform: return quantize_uniform_noise(c.noise.sigma, c.noise.levels);
        case NoiseKind::Bernoulli: return bernoulli_noise(c.noise.p);
        case NoiseKind::None: return no_noise();
    }
    return no_noise();
}

ControlGrid make_controls(const RunConfig& c) { return ControlGrid(c.controls); }

BuildOptions make_build_options(const RunConfig& c) {
    BuildOptions o;
    o.samples_per_cell = c.samples_per_cell;
    o.scheme = c.scheme;
    o.seed = c.seed;
    o.quadrature = c.quadrature;
    o.sink_penalty = c.sink_penalty;
    o.out_of_domain = c.out_of_domain;
    o.mass = c.lp.mass;
    o.build_hash = build_digest(c);
    return o;
}

SolverOptions make_solver_options(const RunConfig& c) {
    SolverOptions o;
    o.tolerances = c.lp.tolerances;
    o.max_iterations = c.lp.max_iterations;
    return o;
}

std::uint64_t build_digest(const RunConfig& c) {
    const json j = config_json(c);
    json part = {{"model", j["model"]}, {"grid", j["grid"]},         {"controls", j["controls"]},
                 {"noise", j["noise"]}, {"cost", j["cost"]},         {"sampling", j["sampling"]},
                 {"mass", j["lp"]["mass"]}, {"seed", j["seed"]}};
    return digest_of(part);
}

std::uint64_t solve_digest(const RunConfig& c) {
    json lp = config_json(c)["lp"];
    lp.erase("mass");
    return digest_of({{"upstream", build_digest(c)}, {"lp", lp}});
}

std::uint64_t extract_digest(const RunConfig& c) {
    return digest_of({{"upstream", solve_digest(c)}, {"local_gain", c.verify.local_gain}});
}

std::uint64_t certify_digest(const RunConfig& c) {
    return digest_of({{"upstream", extract_digest(c)}, {"neumann_terms", c.neumann_terms}});
}

std::uint64_t verify_digest(const RunConfig& c) {
    json v = config_json(c)["verify"];
    v.erase("local_gain");
    return digest_of({{"upstream", extract_digest(c)}, {"verify", v}});
}

}  // namespace pfstab
