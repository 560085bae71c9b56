// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pfstab/config.hpp"
#include "pfstab/fileio.hpp"
#include "pfstab/pipeline.hpp"
#include "support.hpp"

using namespace pfstab;
using namespace pfstab::testing;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kConfigs = fs::path(PFSTAB_SOURCE_DIR) / "configs";

struct Outcome {
    bool pass = true;
    std::string detail;
};

/// Collects failures with a short reason; the first few are reported.
class Checker {
public:
    void expect(bool ok, const std::string& what) {
        ++checks_;
        if (ok) return;
        if (failures_.size() < 3) failures_.push_back(what);
        ++failed_;
    }
    bool ok() const { return failed_ == 0; }
    std::string summary() const {
        std::ostringstream out;
        out << checks_ << " checks";
        if (failed_) {
            out << ", " << failed_ << " failed:";
            for (const auto& f : failures_) out << " [" << f << "]";
        }
        return out.str();
    }

private:
    std::size_t checks_ = 0;
    std::size_t failed_ = 0;
    std::vector<std::string> failures_;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

RunConfig desk_config(const std::string& name, const fs::path& out) {
    RunConfig c = load_config(kConfigs / name);
    c.output = out;
    return c;
}

/// Runs every stage; returns false (with the log) on a nonzero exit.
bool run_all(const RunConfig& cfg, std::string& log) {
    std::ostringstream s;
    const int code = run_pipeline(Stage::All, cfg, s);
    log = s.str();
    return code == 0;
}

json read_json(const fs::path& p) { return json::parse(read_text_file(p)); }

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("pfstab-acceptance-" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// Shared pendulum runs, produced once.
struct DeskRuns {
    fs::path case1, case1_again, case2_085, case2_050;
    bool ok = true;
    std::string error;
};

DeskRuns& desk_runs() {
    static DeskRuns runs = [] {
        DeskRuns r;
        r.case1 = scratch("case1");
        r.case1_again = scratch("case1-again");
        r.case2_085 = scratch("case2-085");
        r.case2_050 = scratch("case2-050");
        const std::vector<std::pair<std::string, fs::path>> jobs{{"case1_40.json", r.case1},
                                                                 {"case1_40.json", r.case1_again},
                                                                 {"case2_p085_40.json", r.case2_085},
                                                                 {"case2_p050_40.json", r.case2_050}};
        for (const auto& [name, dir] : jobs) {
            std::string log;
            if (!run_all(desk_config(name, dir), log)) {
                r.ok = false;
                r.error += name + ": " + log;
            }
        }
        return r;
    }();
    return runs;
}

// ---------------------------------------------------------------------------

Outcome row_stochasticity() {
    Checker c;
    auto check_matrix = [&](const SparseMatrix& full, const std::string& label) {
        for (std::size_t i = 0; i < full.rows(); ++i)
            c.expect(std::abs(full.row_sum(i) - 1.0) <= 1e-12, label + " row " + std::to_string(i));
        c.expect(full.min_value() >= 0.0, label + " negative entry");
        const SparseMatrix r = restrict_to_complement(full);
        for (std::size_t i = 0; i < r.rows(); ++i) c.expect(r.row_sum(i) <= 1.0 + 1e-12, label + " restricted row");
    };

    // Randomized 1-D and 2-D toy maps.
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        const double k = 0.5 + rng.uniform_open();
        const double s = rng.uniform_open() - 0.5;
        const std::size_t n = 6 + seed;
        const Partition line = Partition::build_grid({{-1.0, 1.0}}, {n}, {seed % 3 == 0}, Box{{{-0.05, 0.05}}});
        FunctionModel map1(
            1, [=](auto x, auto u, auto xi, auto out) { out[0] = k * x[0] + s * x[0] * x[0] + u[0] + xi[0]; },
            "toy-1d");
        check_matrix(build_pf_matrix(map1, line, Point{0.1 * s}, Point{0.02}, 7, SampleScheme::StratifiedRandom,
                                     seed),
                     "1-D seed " + std::to_string(seed));
        const Partition sq = Partition::build_grid({{-1.0, 1.0}, {-2.0, 2.0}}, {n, n + 2}, {seed % 2 == 0, false},
                                                   Box{{{-0.1, 0.1}, {-0.1, 0.1}}});
        FunctionModel map2(
            2,
            [=](auto x, auto u, auto xi, auto out) {
                out[0] = x[0] + 0.3 * x[1];
                out[1] = k * x[1] - s * std::sin(3.0 * x[0]) + u[0] + xi[0];
            },
            "toy-2d");
        check_matrix(build_pf_matrix(map2, sq, Point{s}, Point{-0.03}, 10, SampleScheme::UniformSubgrid, seed),
                     "2-D seed " + std::to_string(seed));
    }

    // Every (action, noise) component of the 30x30 pendulum ensemble.
    RunConfig cfg = load_config(kConfigs / "case1_40.json");
    cfg.grid.counts = {30, 30};
    const Partition p = make_partition(cfg);
    const auto model = make_model(cfg);
    const ControlGrid controls = make_controls(cfg);
    const NoiseModel noise = make_noise(cfg);
    const auto samples = make_sample_set(p, cfg.samples_per_cell, cfg.scheme, cfg.seed);
    std::size_t count = 0;
    for (auto mode : {OutOfDomain::Sink, OutOfDomain::Clamp})
        for (std::size_t a = 0; a < controls.size(); ++a)
            for (std::size_t l = 0; l < noise.size(); ++l, ++count)
                check_matrix(build_pf_matrix(*model, p, controls[a], noise.value(l), samples, Exec::Parallel, a, l,
                                             mode),
                             "pendulum a=" + std::to_string(a) + " l=" + std::to_string(l));
    return {c.ok(), c.summary() + "; " + std::to_string(count) + " pendulum component matrices at 30x30"};
}

Outcome oracle_equivalence() {
    Checker c;
    const auto e = tiny_ensemble();
    const auto lp = assemble_lp(e, 1.0);
    const auto s = solve_lp(lp);
    const auto oracle = enumerate_policies(e, 1.0);
    c.expect(s.status == LPStatus::Optimal, "tiny optimal");
    if (s.status == LPStatus::Optimal) {
        c.expect(oracle.best && std::abs(*oracle.best - 2.0) <= 1e-8, "tiny oracle 2.0");
        c.expect(std::abs(s.primal_objective - 2.0) <= 1e-8, "tiny optimum 2.0");
        c.expect(std::abs(s.theta[0][0]) <= 1e-8 && std::abs(s.theta[0][1]) <= 1e-8, "tiny theta^1 = 0");
        c.expect(std::abs(s.theta[1][0] - 6.0) <= 1e-8 && std::abs(s.theta[1][1] - 4.0) <= 1e-8,
                 "tiny theta^2 = (6,4)");
        c.expect(std::abs(s.value[0] - 1.2) <= 1e-8 && std::abs(s.value[1] - 0.8) <= 1e-8, "tiny V = (1.2,0.8)");
        c.expect(s.duality_gap <= 1e-8, "tiny duality gap");
    }

    std::size_t feasible = 0, infeasible = 0;
    for (std::uint64_t k = 0; k < 50; ++k) {
        const std::uint64_t seed = 1000 + k;
        const std::size_t n = 1 + k % 4;
        const std::size_t m = 1 + (k / 4) % 3;
        const auto inst = random_ensemble(seed, n, m);
        for (double gamma : {1.0, 1.05}) {
            const std::string label = "seed " + std::to_string(seed) + " gamma " + fmt("%g", gamma);
            const auto o = enumerate_policies(inst, gamma);
            const auto r = solve_lp(assemble_lp(inst, gamma));
            if (!o.best) {
                ++infeasible;
                c.expect(r.status == LPStatus::Infeasible, label + " should be infeasible");
                continue;
            }
            ++feasible;
            c.expect(r.status == LPStatus::Optimal, label + " should be optimal");
            if (r.status == LPStatus::Optimal)
                c.expect(close_rel(r.primal_objective, *o.best, 1e-8), label + " optimum vs enumeration");
        }
    }
    return {c.ok(), c.summary() + "; tiny optimum " + fmt("%.12g", s.primal_objective) + ", random: " +
                        std::to_string(feasible) + " feasible, " + std::to_string(infeasible) + " infeasible"};
}

/// Duality, slackness and policy-evaluation consistency for one solve.
void check_solution(Checker& c, const TransferEnsemble& e, double gamma, const std::string& label) {
    const auto lp = assemble_lp(e, gamma);
    const auto s = solve_lp(lp);
    if (s.status != LPStatus::Optimal) return;
    c.expect(std::abs(s.primal_objective - s.dual_objective) <= 1e-8 * (1.0 + std::abs(s.primal_objective)),
             label + " duality gap");
    const auto slack = check_complementary_slackness(lp, s);
    c.expect(slack.holds, label + " complementary slackness");
    const Policy pol = extract_policy(s, e);
    const auto ev = evaluate_policy(pol, e, gamma);
    c.expect(ev.proper, label + " extracted policy proper");
    if (ev.proper) c.expect(close_rel(ev.objective, s.primal_objective, 1e-6), label + " policy objective");
}

Outcome duality_and_slackness() {
    Checker c;
    std::size_t solved = 0;
    check_solution(c, tiny_ensemble(), 1.0, "tiny");
    for (std::uint64_t k = 0; k < 50; ++k) {
        const auto inst = random_ensemble(1000 + k, 1 + k % 4, 1 + (k / 4) % 3);
        for (double gamma : {1.0, 1.05}) {
            check_solution(c, inst, gamma, "seed " + std::to_string(1000 + k));
            ++solved;
        }
    }
    auto& runs = desk_runs();
    c.expect(runs.ok, "desk pipeline runs");
    for (const auto& dir : {runs.case1, runs.case2_085, runs.case2_050}) {
        if (!runs.ok) break;
        const auto e = load_ensemble(dir / kEnsembleDir);
        const double gamma = read_json(dir / kSolutionFile)["gamma"].get<double>();
        check_solution(c, e, gamma, dir.filename().string());
        ++solved;
    }
    return {c.ok(), c.summary() + " over " + std::to_string(solved + 1) + " solves (tiny, random, three pendulum runs)"};
}

void check_certificate(Checker& c, const SparseMatrix& p, const std::vector<double>& m, double gamma,
                       const std::string& label, double& worst_gap) {
    const auto cm = verify_stability(p, m, gamma);
    if (!cm.certificate.certified) return;
    const auto& meas = *cm.measure;
    double m_inf = 0.0;
    for (double x : m) m_inf = std::max(m_inf, std::abs(x));
    // Independent residual: |gamma P' mu - mu + m|_inf.
    const auto pt_mu = p.multiply_transposed(meas.mu);
    double residual = 0.0;
    for (std::size_t j = 0; j < m.size(); ++j)
        residual = std::max(residual, std::abs(gamma * pt_mu[j] - meas.mu[j] + m[j]));
    c.expect(residual <= 1e-9 * (1.0 + m_inf), label + " residual " + fmt("%.3g", residual));
    bool dominates = true;
    for (std::size_t j = 0; j < m.size(); ++j)
        dominates = dominates && m[j] >= 0.0 && meas.mu[j] >= m[j] - 1e-9 * (1.0 + m_inf);
    c.expect(dominates, label + " mu >= m >= 0");
    c.expect(cm.certificate.spectral_radius < 1.0, label + " rho < 1");
    c.expect(meas.neumann_terms == 200, label + " Neumann K");
    c.expect(meas.neumann_monotone, label + " Neumann monotone");
    // The tail after K terms is of order rho^K; only assert convergence
    // where that tail is negligible.
    if (std::pow(cm.certificate.spectral_radius, 200) < 1e-8)
        c.expect(meas.neumann_gap <= 1e-6, label + " Neumann gap " + fmt("%.3g", meas.neumann_gap));
    worst_gap = std::max(worst_gap, meas.neumann_gap);
}

Outcome certificate_soundness() {
    Checker c;
    double worst_gap = 0.0;
    std::size_t certified_runs = 0;
    auto count = [&](const SparseMatrix& p, const std::vector<double>& m, double g) {
        if (verify_stability(p, m, g).certificate.certified) ++certified_runs;
    };
    const auto tiny = tiny_ensemble();
    check_certificate(c, tiny.restricted[1], tiny.mass, 1.0, "tiny", worst_gap);
    count(tiny.restricted[1], tiny.mass, 1.0);
    for (std::uint64_t k = 0; k < 50; ++k) {
        const auto inst = random_ensemble(2000 + k, 2 + k % 6, 1, 0.1);
        for (double g : {1.0, 1.05}) {
            check_certificate(c, inst.restricted[0], inst.mass, g, "seed " + std::to_string(2000 + k), worst_gap);
            count(inst.restricted[0], inst.mass, g);
        }
    }
    auto& runs = desk_runs();
    c.expect(runs.ok, "desk pipeline runs");
    for (const auto& dir : {runs.case1, runs.case2_085, runs.case2_050}) {
        if (!runs.ok) break;
        const auto e = load_ensemble(dir / kEnsembleDir);
        const auto sol = read_json(dir / kSolutionFile);
        LPSolution s;
        s.status = LPStatus::Optimal;
        s.theta = sol["theta"].get<std::vector<std::vector<double>>>();
        const Policy pol = extract_policy(s, e);
        const double gamma = sol["gamma"].get<double>();
        const SparseMatrix pu = closed_loop_matrix(pol, e);
        c.expect(verify_stability(pu, e.mass, gamma).certificate.certified, dir.filename().string() + " certified");
        check_certificate(c, pu, e.mass, gamma, dir.filename().string(), worst_gap);
        count(pu, e.mass, gamma);
        c.expect(read_json(dir / kCertificateFile)["certified"] == true, dir.filename().string() + " artifact");
    }
    return {c.ok(), c.summary() + " over " + std::to_string(certified_runs) +
                        " certified closed loops; largest Neumann gap " + fmt("%.3g", worst_gap)};
}

double attraction(const fs::path& dir) { return read_json(dir / kVerificationFile)["overall"].get<double>(); }

Outcome case1_reproduction() {
    auto& runs = desk_runs();
    if (!runs.ok) return {false, "pipeline failed: " + runs.error};
    const double a = attraction(runs.case1);
    const double base = read_json(runs.case1 / kVerificationFile)["open_loop_overall"].get<double>();
    const double gamma = read_json(runs.case1 / kSolutionFile)["gamma"].get<double>();
    return {a >= 0.90, "40x40, gamma " + fmt("%g", gamma) + ": attraction " + fmt("%.2f%%", 100 * a) +
                           " (threshold 90%), open loop " + fmt("%.2f%%", 100 * base)};
}

Outcome case2_ordering() {
    auto& runs = desk_runs();
    if (!runs.ok) return {false, "pipeline failed: " + runs.error};
    const double hi = attraction(runs.case2_085);
    const double lo = attraction(runs.case2_050);
    const bool ok = hi >= 0.85 && hi - lo >= 0.10;
    return {ok, "erasure 0.15: " + fmt("%.2f%%", 100 * hi) + " (threshold 85%), erasure 0.5: " +
                    fmt("%.2f%%", 100 * lo) + ", difference " + fmt("%.2f", 100 * (hi - lo)) +
                    " points (threshold 10)"};
}

Outcome manifold_structure() {
    auto& runs = desk_runs();
    if (!runs.ok) return {false, "pipeline failed: " + runs.error};
    const RunConfig cfg = desk_config("case1_40.json", runs.case1);
    const PendulumParams& pp = cfg.model.params;
    // Linearization at the upright equilibrium: xddot = lambda^2 x.
    const double lambda = std::sqrt(pp.a() / (1.33 - pp.mass_ratio()));
    const double band = 1.0;
    std::istringstream in(read_text_file(runs.case1 / "value.csv"));
    std::string line;
    std::getline(in, line);
    double stable = 0.0, unstable = 0.0;
    std::size_t ns = 0, nu = 0;
    while (std::getline(in, line)) {
        std::vector<std::string> f;
        std::stringstream ls(line);
        for (std::string x; std::getline(ls, x, ',');) f.push_back(x);
        if (f.size() != 5 || std::stol(f[0]) < 0) continue;
        const double x = std::stod(f[2]), xdot = std::stod(f[3]), v = std::stod(f[4]);
        if (std::abs(xdot + lambda * x) <= band) stable += v, ++ns;
        if (std::abs(xdot - lambda * x) <= band) unstable += v, ++nu;
    }
    if (ns == 0 || nu == 0) return {false, "empty band"};
    stable /= static_cast<double>(ns);
    unstable /= static_cast<double>(nu);
    return {stable < unstable, "mean V on the stable band (xdot = -" + fmt("%.3f", lambda) + " x, " +
                                   std::to_string(ns) + " cells) " + fmt("%.4g", stable) +
                                   " < unstable band (" + std::to_string(nu) + " cells) " + fmt("%.4g", unstable)};
}

Outcome determinism_and_persistence() {
    Checker c;
    auto& runs = desk_runs();
    if (!runs.ok) return {false, "pipeline failed: " + runs.error};
    std::size_t files = 0, matrices = 0, csvs = 0;
    for (const auto& f : fs::recursive_directory_iterator(runs.case1)) {
        if (!f.is_regular_file()) continue;
        const fs::path rel = fs::relative(f.path(), runs.case1);
        const fs::path twin = runs.case1_again / rel;
        c.expect(fs::exists(twin) && read_text_file(f.path()) == read_text_file(twin), rel.string() + " differs");
        ++files;
        matrices += f.path().extension() == ".pfmat";
        csvs += f.path().extension() == ".csv";
    }
    c.expect(matrices > 0 && csvs > 0, "artifacts present");

    // Save/load round trips.
    const auto e = load_ensemble(runs.case1 / kEnsembleDir);
    const fs::path copy = scratch("roundtrip");
    save_ensemble(e, copy);
    c.expect(load_ensemble(copy) == e, "ensemble round trip");
    for (const auto& m : e.full) c.expect(parse_pfmat(format_pfmat(m)) == m, "pfmat round trip");
    const RunConfig cfg = desk_config("case1_40.json", runs.case1);
    c.expect(parse_config(serialize_config(cfg)) == cfg, "config round trip");
    return {c.ok(), c.summary() + "; " + std::to_string(files) + " files compared (" + std::to_string(matrices) +
                        " matrices, " + std::to_string(csvs) + " CSVs)"};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"row-stochastic transfer matrices", row_stochasticity},
        {"LP optimum equals policy enumeration", oracle_equivalence},
        {"strong duality and complementary slackness", duality_and_slackness},
        {"Lyapunov certificate soundness", certificate_soundness},
        {"pendulum case 1 attraction", case1_reproduction},
        {"pendulum case 2 erasure ordering", case2_ordering},
        {"value function lower along the stable manifold", manifold_structure},
        {"determinism and persistence", determinism_and_persistence},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("criterion %zu: %s - %s: %s (%.1fs)\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                    o.detail.c_str(), secs);
        std::fflush(stdout);
        failed += o.pass ? 0 : 1;
    }
    return failed == 0 ? 0 : 1;
}
