#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pfstab/partition.hpp"

namespace pfstab {

/// Ordered finite control set. The order fixes the min-index tie-break used
/// when extracting a deterministic policy.
class ControlGrid {
public:
    explicit ControlGrid(std::vector<Point> values);
    static ControlGrid scalar(const std::vector<double>& values);
    /// {lo, lo+step, ..., hi}; hi must be reachable within rounding.
    static ControlGrid uniform(double lo, double hi, double step);

    std::size_t size() const { return values_.size(); }
    std::size_t dimension() const { return values_.front().size(); }
    const Point& operator[](std::size_t a) const { return values_[a]; }
    const std::vector<Point>& values() const { return values_; }

private:
    std::vector<Point> values_;
};

/// Quantized i.i.d. noise law: value xi^l is drawn with probability v^l.
class NoiseModel {
public:
    NoiseModel(std::vector<Point> values, std::vector<double> probs);

    std::size_t size() const { return values_.size(); }
    std::size_t dimension() const { return values_.front().size(); }
    const Point& value(std::size_t l) const { return values_[l]; }
    double prob(std::size_t l) const { return probs_[l]; }
    const std::vector<Point>& values() const { return values_; }
    const std::vector<double>& probs() const { return probs_; }

    /// Index of the value selected by a uniform draw in (0, 1).
    std::size_t pick(double uniform01) const;

private:
    std::vector<Point> values_;
    std::vector<double> probs_;
};

/// Midpoints of L equal subintervals of [-sigma, sigma], equal weights.
NoiseModel quantize_uniform_noise(double sigma, std::size_t levels);
/// Values {1, 0} with probabilities {p, 1-p}.
NoiseModel bernoulli_noise(double p);
/// Single zero value with probability one.
NoiseModel no_noise();

/// Controlled stochastic map x+ = T(x, u, xi). Implementations must be pure:
/// identical arguments give bit-identical results, and concurrent calls are
/// allowed.
class SystemModel {
public:
    virtual ~SystemModel() = default;
    virtual std::size_t state_dim() const = 0;
    virtual void step(std::span<const double> state, std::span<const double> control,
                      std::span<const double> noise, std::span<double> next) const = 0;
    virtual std::string description() const = 0;

    Point step(std::span<const double> state, std::span<const double> control,
               std::span<const double> noise) const;
};

/// Adapter for maps given as callables; used by toy systems in tests.
class FunctionModel final : public SystemModel {
public:
    using StepFn = std::function<void(std::span<const double>, std::span<const double>,
                                      std::span<const double>, std::span<double>)>;

    FunctionModel(std::size_t dim, StepFn fn, std::string description);

    std::size_t state_dim() const override { return dim_; }
    void step(std::span<const double> state, std::span<const double> control,
              std::span<const double> noise, std::span<double> next) const override;
    std::string description() const override { return description_; }
    using SystemModel::step;

private:
    std::size_t dim_;
    StepFn fn_;
    std::string description_;
};

/// Stage cost G(x, u, xi) >= 0.
class StageCost {
public:
    virtual ~StageCost() = default;
    virtual double operator()(std::span<const double> state, std::span<const double> control,
                              std::span<const double> noise) const = 0;
    virtual std::string description() const = 0;
};

/// |x|^2 + |u|^2, independent of the noise value.
class QuadraticCost final : public StageCost {
public:
    double operator()(std::span<const double> state, std::span<const double> control,
                      std::span<const double> noise) const override;
    std::string description() const override { return "quadratic"; }
};

class FunctionCost final : public StageCost {
public:
    using CostFn = std::function<double(std::span<const double>, std::span<const double>,
                                        std::span<const double>)>;
    explicit FunctionCost(CostFn fn, std::string description = "function")
        : fn_(std::move(fn)), description_(std::move(description)) {}
    double operator()(std::span<const double> state, std::span<const double> control,
                      std::span<const double> noise) const override {
        return fn_(state, control, noise);
    }
    std::string description() const override { return description_; }

private:
    CostFn fn_;
    std::string description_;
};

double quadratic_cost(double angle, double rate, double control);

// ---------------------------------------------------------------------------
// Inverted pendulum on a cart
// ---------------------------------------------------------------------------

enum class Integrator { RungeKutta4, ForwardEuler };
std::string to_string(Integrator integrator);
Integrator parse_integrator(const std::string& name);

/// Where the noise value enters the pendulum dynamics.
enum class PendulumNoise {
    None,          ///< noise value ignored
    Damping,       ///< noise is the damping ratio zeta
    InputErasure,  ///< noise multiplies the control input
};
std::string to_string(PendulumNoise channel);
/// "none" | "damping" | "input-erasure"; throws Error(Config) otherwise.
PendulumNoise parse_pendulum_noise(const std::string& name);

struct PendulumParams {
    double gravity = 9.8;
    double length = 0.5;
    double pole_mass = 2.0;
    double cart_mass = 8.0;

    double mass_ratio() const { return pole_mass / (pole_mass + cart_mass); }
    double a() const { return gravity / length; }
    double b() const { return mass_ratio() / (pole_mass * length); }

    friend bool operator==(const PendulumParams&, const PendulumParams&) = default;
};

/// Angular acceleration of the pole; angle 0 is upright.
double pendulum_acceleration(const PendulumParams& params, double angle, double rate, double control,
                             double damping);

/// One integration step of length dt. Throws Error(Numeric) on non-finite
/// input or output. The angle is not wrapped.
std::array<double, 2> pendulum_step(const PendulumParams& params, std::array<double, 2> state,
                                    double control, double damping, double dt,
                                    Integrator integrator = Integrator::RungeKutta4);

class PendulumModel final : public SystemModel {
public:
    PendulumModel(double dt, PendulumNoise channel, Integrator integrator = Integrator::RungeKutta4,
                  PendulumParams params = {});

    std::size_t state_dim() const override { return 2; }
    void step(std::span<const double> state, std::span<const double> control,
              std::span<const double> noise, std::span<double> next) const override;
    std::string description() const override;
    using SystemModel::step;

    const PendulumParams& params() const { return params_; }
    double dt() const { return dt_; }
    PendulumNoise channel() const { return channel_; }

private:
    double dt_;
    PendulumNoise channel_;
    Integrator integrator_;
    PendulumParams params_;
};

}  // namespace pfstab
