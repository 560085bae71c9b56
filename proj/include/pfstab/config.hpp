#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pfstab/lp.hpp"
#include "pfstab/models.hpp"
#include "pfstab/partition.hpp"
#include "pfstab/transfer.hpp"

namespace pfstab {

struct ModelConfig {
    std::string type = "pendulum";
    double dt = 0.1;
    Integrator integrator = Integrator::RungeKutta4;
    PendulumNoise channel = PendulumNoise::Damping;
    PendulumParams params;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct GridConfig {
    std::vector<Interval> bounds;
    std::vector<std::size_t> counts;
    std::vector<bool> wrap;
    Point attractor_center;
    Point attractor_half_widths;

    friend bool operator==(const GridConfig&, const GridConfig&) = default;
};

enum class NoiseKind { Uniform, Bernoulli, None };

struct NoiseConfig {
    NoiseKind kind = NoiseKind::Uniform;
    double sigma = 0.1;
    std::size_t levels = 10;
    double p = 0.85;  ///< Bernoulli: probability that the input gets through

    friend bool operator==(const NoiseConfig&, const NoiseConfig&) = default;
};

struct LpConfig {
    std::optional<double> gamma = 1.01;  ///< empty: pick by feasibility probe
    std::vector<double> gamma_candidates{1.0, 1.01, 1.02, 1.05, 1.1, 1.2};
    MassChoice mass = MassChoice::CellVolume;
    Tolerances tolerances;
    std::size_t max_iterations = 10000;

    friend bool operator==(const LpConfig& x, const LpConfig& y) {
        return x.gamma == y.gamma && x.gamma_candidates == y.gamma_candidates && x.mass == y.mass &&
               x.tolerances.feasibility == y.tolerances.feasibility && x.tolerances.gap == y.tolerances.gap &&
               x.tolerances.slack == y.tolerances.slack && x.tolerances.positivity == y.tolerances.positivity &&
               x.max_iterations == y.max_iterations;
    }
};

struct VerifyConfig {
    std::size_t inits_per_cell = 8;
    std::size_t horizon = 100;
    bool continuous_noise = false;
    std::vector<Point> sample_starts;
    std::vector<double> local_gain;  ///< row-major; empty means zero input

    friend bool operator==(const VerifyConfig&, const VerifyConfig&) = default;
};

struct RunConfig {
    ModelConfig model;
    GridConfig grid;
    std::vector<Point> controls;
    NoiseConfig noise;
    CostQuadrature quadrature = CostQuadrature::Samples;
    double sink_penalty = 1e6;
    OutOfDomain out_of_domain = OutOfDomain::Sink;
    std::size_t samples_per_cell = 10;
    SampleScheme scheme = SampleScheme::UniformSubgrid;
    LpConfig lp;
    std::size_t neumann_terms = 200;
    VerifyConfig verify;
    bool heatmaps = false;
    std::uint64_t seed = 0;
    std::filesystem::path output = "pfstab-out";

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// The benchmark defaults: 70x70 grid on [-pi, pi] x [-10, 10], controls
/// -80..80 step 10, uniform damping noise sigma 0.1 with 10 levels.
RunConfig default_config();

/// Parses JSON text. Every key is optional (falling back to
/// default_config()) but unknown keys are rejected. Numbers may also be
/// written as strings like "pi", "-pi/2" or "2*pi/70". Throws
/// Error(Config) with the offending key path.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
/// Canonical JSON; parse_config(serialize_config(c)) == c.
std::string serialize_config(const RunConfig& config);

/// Parses "pi"-style numeric strings; throws Error(Config).
double parse_number_expression(const std::string& text);

// Objects described by a config.
Partition make_partition(const RunConfig& config);
std::unique_ptr<SystemModel> make_model(const RunConfig& config);
NoiseModel make_noise(const RunConfig& config);
ControlGrid make_controls(const RunConfig& config);
BuildOptions make_build_options(const RunConfig& config);
SolverOptions make_solver_options(const RunConfig& config);

/// Digests of the config sections each pipeline stage depends on. A stage's
/// digest covers its own inputs and every upstream digest.
std::uint64_t build_digest(const RunConfig& config);
std::uint64_t solve_digest(const RunConfig& config);
std::uint64_t extract_digest(const RunConfig& config);
std::uint64_t certify_digest(const RunConfig& config);
std::uint64_t verify_digest(const RunConfig& config);

}  // namespace pfstab
