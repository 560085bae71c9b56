#include "pfstab/models.hpp"

#include <cmath>
#include <numeric>

#include "pfstab/error.hpp"
#include "pfstab/text.hpp"

namespace pfstab {

ControlGrid::ControlGrid(std::vector<Point> values) : values_(std::move(values)) {
    if (values_.empty()) fail(ErrorKind::Config, "control grid is empty");
    const std::size_t d = values_.front().size();
    for (std::size_t a = 0; a < values_.size(); ++a) {
        if (values_[a].size() != d || d == 0)
            fail(ErrorKind::Config, "control values must share a positive dimension");
        for (double v : values_[a])
            if (!std::isfinite(v)) fail(ErrorKind::Config, "control value is not finite");
        for (std::size_t b = 0; b < a; ++b)
            if (values_[a] == values_[b])
                fail(ErrorKind::Config, "control values must be distinct (duplicate at " + std::to_string(a) + ")");
    }
}

ControlGrid ControlGrid::scalar(const std::vector<double>& values) {
    std::vector<Point> pts;
    pts.reserve(values.size());
    for (double v : values) pts.push_back({v});
    return ControlGrid(std::move(pts));
}

ControlGrid ControlGrid::uniform(double lo, double hi, double step) {
    if (!(step > 0.0) || !(lo <= hi)) fail(ErrorKind::Config, "control range needs lo <= hi and step > 0");
    const double span = (hi - lo) / step;
    const auto n = static_cast<std::size_t>(std::llround(span));
    if (std::abs(span - static_cast<double>(n)) > 1e-9)
        fail(ErrorKind::Config, "control range is not a whole number of steps");
    std::vector<double> values;
    for (std::size_t k = 0; k <= n; ++k) values.push_back(lo + static_cast<double>(k) * step);
    return scalar(values);
}

NoiseModel::NoiseModel(std::vector<Point> values, std::vector<double> probs)
    : values_(std::move(values)), probs_(std::move(probs)) {
    if (values_.empty() || values_.size() != probs_.size())
        fail(ErrorKind::Config, "noise model needs matching nonempty value and probability lists");
    const std::size_t d = values_.front().size();
    double total = 0.0;
    for (std::size_t l = 0; l < values_.size(); ++l) {
        if (values_[l].size() != d) fail(ErrorKind::Config, "noise values must share a dimension");
        if (!(probs_[l] >= 0.0 && probs_[l] <= 1.0))
            fail(ErrorKind::Config, "noise probability " + std::to_string(l) + " outside [0,1]");
        total += probs_[l];
    }
    if (std::abs(total - 1.0) > 1e-15 * static_cast<double>(values_.size()))
        fail(ErrorKind::Config, "noise probabilities sum to " + format_double(total) + ", not 1");
}

std::size_t NoiseModel::pick(double uniform01) const {
    double acc = 0.0;
    for (std::size_t l = 0; l + 1 < probs_.size(); ++l) {
        acc += probs_[l];
        if (uniform01 < acc) return l;
    }
    // Guard against the cumulative sum rounding below one.
    std::size_t l = probs_.size() - 1;
    while (l > 0 && probs_[l] == 0.0) --l;
    return l;
}

NoiseModel quantize_uniform_noise(double sigma, std::size_t levels) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) fail(ErrorKind::Config, "noise sigma must be positive");
    if (levels == 0) fail(ErrorKind::Config, "noise needs at least one level");
    std::vector<Point> values;
    const double L = static_cast<double>(levels);
    for (std::size_t l = 0; l < levels; ++l) {
        values.push_back({sigma * (2.0 * static_cast<double>(l) + 1.0 - L) / L});
    }
    return NoiseModel(std::move(values), std::vector<double>(levels, 1.0 / L));
}

NoiseModel bernoulli_noise(double p) {
    if (!(p >= 0.0 && p <= 1.0)) fail(ErrorKind::Config, "Bernoulli probability must lie in [0,1]");
    return NoiseModel({{1.0}, {0.0}}, {p, 1.0 - p});
}

NoiseModel no_noise() { return NoiseModel({{0.0}}, {1.0}); }

Point SystemModel::step(std::span<const double> state, std::span<const double> control,
                        std::span<const double> noise) const {
    Point next(state_dim());
    step(state, control, noise, next);
    return next;
}

FunctionModel::FunctionModel(std::size_t dim, StepFn fn, std::string description)
    : dim_(dim), fn_(std::move(fn)), description_(std::move(description)) {}

void FunctionModel::step(std::span<const double> state, std::span<const double> control,
                         std::span<const double> noise, std::span<double> next) const {
    fn_(state, control, noise, next);
}

double QuadraticCost::operator()(std::span<const double> state, std::span<const double> control,
                                 std::span<const double>) const {
    double g = 0.0;
    for (double x : state) g += x * x;
    for (double u : control) g += u * u;
    return g;
}

double quadratic_cost(double angle, double rate, double control) {
    return angle * angle + rate * rate + control * control;
}

std::string to_string(Integrator integrator) {
    return integrator == Integrator::RungeKutta4 ? "rk4" : "euler";
}

Integrator parse_integrator(const std::string& name) {
    if (name == "rk4") return Integrator::RungeKutta4;
    if (name == "euler") return Integrator::ForwardEuler;
    fail(ErrorKind::Config, "unknown integrator '" + name + "'");
}

std::string to_string(PendulumNoise channel) {
    switch (channel) {
        case PendulumNoise::None: return "none";
        case PendulumNoise::Damping: return "damping";
        case PendulumNoise::InputErasure: return "input-erasure";
    }
    return "none";
}

PendulumNoise parse_pendulum_noise(const std::string& name) {
    if (name == "none") return PendulumNoise::None;
    if (name == "damping") return PendulumNoise::Damping;
    if (name == "input-erasure") return PendulumNoise::InputErasure;
    fail(ErrorKind::Config, "unknown pendulum noise channel '" + name + "'");
}

double pendulum_acceleration(const PendulumParams& p, double angle, double rate, double control,
                             double damping) {
    const double mr = p.mass_ratio();
    const double a = p.a();
    const double c = std::cos(angle);
    const double num = a * std::sin(angle) - 0.5 * mr * rate * rate * std::sin(2.0 * angle) - p.b() * c * control;
    return num / (1.33 - mr * c * c) - 2.0 * damping * std::sqrt(a) * rate;
}

std::array<double, 2> pendulum_step(const PendulumParams& params, std::array<double, 2> s, double control,
                                    double damping, double dt, Integrator integrator) {
    if (!(dt > 0.0)) fail(ErrorKind::Numeric, "pendulum step needs dt > 0");
    if (!std::isfinite(s[0]) || !std::isfinite(s[1]) || !std::isfinite(control) || !std::isfinite(damping))
        fail(ErrorKind::Numeric, "pendulum step received a non-finite input");

    auto f = [&](double x, double v) {
        return std::array<double, 2>{v, pendulum_acceleration(params, x, v, control, damping)};
    };
    std::array<double, 2> out;
    if (integrator == Integrator::ForwardEuler) {
        const auto k = f(s[0], s[1]);
        out = {s[0] + dt * k[0], s[1] + dt * k[1]};
    } else {
        const auto k1 = f(s[0], s[1]);
        const auto k2 = f(s[0] + 0.5 * dt * k1[0], s[1] + 0.5 * dt * k1[1]);
        const auto k3 = f(s[0] + 0.5 * dt * k2[0], s[1] + 0.5 * dt * k2[1]);
        const auto k4 = f(s[0] + dt * k3[0], s[1] + dt * k3[1]);
        out = {s[0] + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
               s[1] + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])};
    }
    if (!std::isfinite(out[0]) || !std::isfinite(out[1]))
        fail(ErrorKind::Numeric, "pendulum step produced a non-finite state");
    return out;
}

PendulumModel::PendulumModel(double dt, PendulumNoise channel, Integrator integrator, PendulumParams params)
    : dt_(dt), channel_(channel), integrator_(integrator), params_(params) {
    if (!(dt > 0.0) || !std::isfinite(dt)) fail(ErrorKind::Config, "pendulum dt must be positive");
}

void PendulumModel::step(std::span<const double> state, std::span<const double> control,
                         std::span<const double> noise, std::span<double> next) const {
    double u = control.empty() ? 0.0 : control[0];
    double zeta = 0.0;
    if (channel_ == PendulumNoise::Damping) zeta = noise[0];
    if (channel_ == PendulumNoise::InputErasure) u *= noise[0];
    const auto out = pendulum_step(params_, {state[0], state[1]}, u, zeta, dt_, integrator_);
    next[0] = out[0];
    next[1] = out[1];
}

std::string PendulumModel::description() const {
    return "pendulum dt=" + format_double(dt_) + " noise=" + to_string(channel_) +
           " integrator=" + to_string(integrator_);
}

}  // namespace pfstab
