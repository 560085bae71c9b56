#include "pfstab/pipeline.hpp"

#include <cstdio>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "pfstab/error.hpp"
#include "pfstab/export.hpp"
#include "pfstab/fileio.hpp"
#include "pfstab/lp.hpp"
#include "pfstab/policy.hpp"
#include "pfstab/rng.hpp"
#include "pfstab/text.hpp"
#include "pfstab/verify.hpp"

namespace pfstab {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kVerifyStream = 0x7e51f1ULL;

json index_list(const std::vector<std::size_t>& v) { return json(v); }

/// kNoAction / SIZE_MAX entries become -1 in JSON.
json signed_indices(const std::vector<std::size_t>& v) {
    json out = json::array();
    for (std::size_t x : v) out.push_back(x == kNoAction ? json(-1) : json(x));
    return out;
}

std::vector<std::size_t> unsigned_indices(const json& j) {
    std::vector<std::size_t> out;
    for (const auto& x : j) out.push_back(x.get<long long>() < 0 ? kNoAction : x.get<std::size_t>());
    return out;
}

void write_json(const fs::path& path, const json& j) { write_text_file(path, j.dump(1) + "\n"); }

/// Reads a stage artifact and checks it belongs to the current configuration.
json read_artifact(const fs::path& path, std::uint64_t digest, const Partition& partition) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        fail(ErrorKind::CorruptFile, path.string() + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("digest") || !j.contains("grid_hash"))
        fail(ErrorKind::CorruptFile, path.string() + ": missing digest fields");
    if (j["grid_hash"] != format_hex64(partition.grid_hash()))
        fail(ErrorKind::StaleArtifact, path.string() + " was produced for a different grid; rerun the earlier stages");
    if (j["digest"] != format_hex64(digest))
        fail(ErrorKind::StaleArtifact,
             path.string() + " was produced from a different configuration; rerun the earlier stages");
    return j;
}

json stamp(std::uint64_t digest, const Partition& partition) {
    return {{"digest", format_hex64(digest)}, {"grid_hash", format_hex64(partition.grid_hash())}};
}

TransferEnsemble load_checked_ensemble(const RunConfig& cfg, const Partition& partition) {
    const fs::path dir = cfg.output / kEnsembleDir;
    if (!fs::exists(dir / kEnsembleManifest))
        fail(ErrorKind::MissingArtifact, "no ensemble in " + dir.string() + "; run the build stage first");
    TransferEnsemble e = load_ensemble(dir);
    if (e.provenance.grid_hash != partition.grid_hash() || e.provenance.build_hash != build_digest(cfg))
        fail(ErrorKind::StaleArtifact, "ensemble in " + dir.string() + " was built from a different configuration");
    return e;
}

Policy load_policy(const RunConfig& cfg, const Partition& partition, double* gamma = nullptr) {
    const json j = read_artifact(cfg.output / kPolicyFile, extract_digest(cfg), partition);
    Policy p;
    p.action = unsigned_indices(j.at("actions"));
    p.controls = j.at("controls").get<std::vector<Point>>();
    p.local_gain = j.at("local_gain").get<std::vector<double>>();
    if (gamma) *gamma = j.at("gamma").get<double>();
    if (p.action.size() != partition.restricted_size()) fail(ErrorKind::CorruptFile, "policy size mismatch");
    return p;
}

json trajectory_json(const Trajectory& t) {
    return {{"states", t.states},
            {"controls", t.controls},
            {"noises", t.noises},
            {"escaped", t.escaped},
            {"attracted", t.attracted}};
}

Trajectory trajectory_from_json(const json& j) {
    Trajectory t;
    t.states = j.at("states").get<std::vector<Point>>();
    t.controls = j.at("controls").get<std::vector<Point>>();
    t.noises = j.at("noises").get<std::vector<Point>>();
    t.escaped = j.at("escaped").get<bool>();
    t.attracted = j.at("attracted").get<bool>();
    return t;
}

std::string gamma_text(double g) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", g);
    return buf;
}

// ---------------------------------------------------------------------------

void stage_build(const RunConfig& cfg, std::ostream& log) {
    const Partition partition = make_partition(cfg);
    const auto model = make_model(cfg);
    const TransferEnsemble e = build_ensemble(*model, QuadraticCost{}, partition, make_controls(cfg), make_noise(cfg),
                                              make_build_options(cfg));
    const fs::path dir = cfg.output / kEnsembleDir;
    fs::create_directories(dir);
    save_ensemble(e, dir);
    log << "build: " << partition.ordinary_count() << " cells, " << e.action_count() << " actions, "
        << e.restricted[0].nnz() << " nonzeros in P1_0 -> " << dir.string() << "\n";
}

json probe_json(const std::vector<ProbeResult>& probe) {
    json out = json::array();
    for (const auto& r : probe)
        out.push_back({{"gamma", r.gamma},
                       {"feasible", r.feasible},
                       {"leak_cells", r.leak_cells.size()},
                       {"unresolved_rows", r.unresolved_rows.size()}});
    return out;
}

void stage_solve(const RunConfig& cfg, std::ostream& log) {
    const Partition partition = make_partition(cfg);
    const TransferEnsemble e = load_checked_ensemble(cfg, partition);
    const SolverOptions opts = make_solver_options(cfg);
    json j = stamp(solve_digest(cfg), partition);

    double gamma = 0.0;
    std::vector<ProbeResult> probe;
    if (cfg.lp.gamma) {
        gamma = *cfg.lp.gamma;
    } else {
        probe = feasibility_probe(e, cfg.lp.gamma_candidates, opts);
        j["probe"] = probe_json(probe);
        // Mildest decay rate that still satisfies gamma > 1; if none does,
        // the largest feasible gamma <= 1.
        const ProbeResult* best = nullptr;
        for (const auto& r : probe)
            if (r.feasible && r.gamma > 1.0) {
                best = &r;
                break;
            }
        if (!best)
            for (const auto& r : probe)
                if (r.feasible) best = &r;
        if (!best) {
            j["status"] = "infeasible";
            j["leak_cells"] = index_list(probe.front().leak_cells);
            j["unresolved_rows"] = index_list(probe.front().unresolved_rows);
            write_json(cfg.output / kSolutionFile, j);
            fail(ErrorKind::Solver, "no candidate gamma is feasible (smallest tried " +
                                        gamma_text(probe.front().gamma) + ": " +
                                        std::to_string(probe.front().leak_cells.size()) +
                                        " cells leak to the sink under every action)");
        }
        gamma = best->gamma;
        log << "solve: feasibility probe picked gamma = " << gamma_text(gamma) << "\n";
    }

    const StabilizationLP lp = assemble_lp(e, gamma);
    const LPSolution sol = solve_lp(lp, opts);
    j["gamma"] = gamma;
    j["status"] = to_string(sol.status);
    j["trace"] = {{"phase1_iterations", sol.trace.phase1_iterations},
                  {"phase2_iterations", sol.trace.phase2_iterations},
                  {"block_pivots", sol.trace.block_pivots},
                  {"partial_pivots", sol.trace.partial_pivots},
                  {"factorizations", sol.trace.factorizations},
                  {"objective_history", sol.trace.objective_history}};
    if (sol.status != LPStatus::Optimal) {
        j["leak_cells"] = index_list(sol.leak_cells);
        j["unresolved_rows"] = index_list(sol.unresolved_rows);
        std::string hint;
        std::vector<double> lower;
        for (double g : cfg.lp.gamma_candidates)
            if (g < gamma) lower.push_back(g);
        if (!lower.empty()) {
            probe = feasibility_probe(e, lower, opts);
            j["probe"] = probe_json(probe);
            double best = 0.0;
            for (const auto& r : probe)
                if (r.feasible) best = r.gamma;
            hint = best > 0.0 ? "; largest feasible candidate is gamma = " + gamma_text(best) +
                                    " (set lp.gamma or use \"auto\")"
                              : "; no smaller candidate gamma is feasible either";
        }
        write_json(cfg.output / kSolutionFile, j);
        fail(ErrorKind::Solver, "LP is " + to_string(sol.status) + " at gamma = " + gamma_text(gamma) + ": " +
                                    std::to_string(sol.leak_cells.size()) +
                                    " cells leak to the sink under every action, " +
                                    std::to_string(sol.unresolved_rows.size()) + " rows unresolved" + hint);
    }

    const auto& tol = cfg.lp.tolerances;
    const double feas = tol.feas_tol(lp.mass);
    const bool duality = sol.duality_gap <= tol.gap * (1.0 + std::abs(sol.primal_objective));
    const SlacknessReport slack = check_complementary_slackness(lp, sol, tol);
    j["primal_objective"] = sol.primal_objective;
    j["dual_objective"] = sol.dual_objective;
    j["duality_gap"] = sol.duality_gap;
    j["primal_residual"] = sol.primal_residual;
    j["dual_violation"] = sol.dual_violation;
    j["strong_duality"] = duality;
    j["complementary_slackness"] = slack.holds;
    j["theta"] = sol.theta;
    j["value"] = sol.value;
    j["basis"] = signed_indices(sol.basis);
    write_json(cfg.output / kSolutionFile, j);
    log << "solve: gamma = " << gamma_text(gamma) << ", objective " << format_double(sol.primal_objective)
        << ", gap " << sol.duality_gap << ", " << sol.trace.phase1_iterations + sol.trace.phase2_iterations
        << " iterations\n";
    if (!duality || sol.primal_residual > feas || sol.dual_violation > feas || !slack.holds)
        fail(ErrorKind::Validation, "LP solution fails its optimality checks (gap " + format_double(sol.duality_gap) +
                                        ", residual " + format_double(sol.primal_residual) + ", dual violation " +
                                        format_double(sol.dual_violation) + ", slackness " +
                                        (slack.holds ? "ok" : "violated") + ")");
}

void stage_extract(const RunConfig& cfg, std::ostream& log) {
    const Partition partition = make_partition(cfg);
    const TransferEnsemble e = load_checked_ensemble(cfg, partition);
    const json s = read_artifact(cfg.output / kSolutionFile, solve_digest(cfg), partition);
    if (s.at("status") != "optimal") fail(ErrorKind::MissingArtifact, "the LP solution is not optimal; rerun solve");
    LPSolution sol;
    sol.status = LPStatus::Optimal;
    sol.gamma = s.at("gamma").get<double>();
    sol.theta = s.at("theta").get<std::vector<std::vector<double>>>();
    sol.value = s.at("value").get<std::vector<double>>();
    const double objective = s.at("primal_objective").get<double>();

    Policy policy = extract_policy(sol, e, -1.0, cfg.lp.tolerances);
    policy.local_gain = cfg.verify.local_gain;
    const PolicyEvaluation ev = evaluate_policy(policy, e, sol.gamma);
    const bool consistent = ev.proper && std::abs(ev.objective - objective) <= 1e-6 * (1.0 + std::abs(objective));

    json j = stamp(extract_digest(cfg), partition);
    j["gamma"] = sol.gamma;
    j["actions"] = signed_indices(policy.action);
    j["controls"] = policy.controls;
    j["local_gain"] = policy.local_gain;
    j["policy_objective"] = ev.proper ? json(ev.objective) : json(nullptr);
    j["lp_objective"] = objective;
    j["objective_consistent"] = consistent;
    write_json(cfg.output / kPolicyFile, j);
    write_text_file(cfg.output / kPolicyCsv, policy_csv(policy, partition));
    log << "extract: policy over " << partition.ordinary_count() << " cells; evaluated objective "
        << (ev.proper ? format_double(ev.objective) : std::string("n/a")) << "\n";
    if (!consistent)
        fail(ErrorKind::Validation, "extracted policy does not reproduce the LP objective");
}

void stage_certify(const RunConfig& cfg, std::ostream& log) {
    const Partition partition = make_partition(cfg);
    const TransferEnsemble e = load_checked_ensemble(cfg, partition);
    double gamma = 1.0;
    const Policy policy = load_policy(cfg, partition, &gamma);
    CertificateOptions opts;
    opts.neumann_terms = cfg.neumann_terms;
    opts.feasibility = cfg.lp.tolerances.feasibility;
    const CertifiedMeasure cm = lyapunov_measure(closed_loop_matrix(policy, e), e.mass, gamma, opts);
    const auto& c = cm.certificate;
    json j = stamp(certify_digest(cfg), partition);
    j["gamma"] = gamma;
    j["certified"] = c.certified;
    j["spectral_radius"] = c.spectral_radius;
    j["decay_bound"] = c.decay_bound;
    j["power_iterations"] = c.power_iterations;
    j["power_converged"] = c.power_converged;
    j["reason"] = c.reason;
    j["dominant_support"] = index_list(c.dominant_support);
    if (cm.measure) {
        j["residual"] = cm.measure->residual;
        j["neumann_terms"] = cm.measure->neumann_terms;
        j["neumann_gap"] = cm.measure->neumann_gap;
        j["neumann_monotone"] = cm.measure->neumann_monotone;
        j["mu"] = cm.measure->mu;
    }
    write_json(cfg.output / kCertificateFile, j);
    log << "certify: " << (c.certified ? "certified" : "not certified") << ", rho(gamma P) = "
        << format_double(c.spectral_radius) << (c.certified ? "" : " (" + c.reason + ")") << "\n";
}

void stage_verify(const RunConfig& cfg, std::ostream& log) {
    const Partition partition = make_partition(cfg);
    const Policy policy = load_policy(cfg, partition);
    const auto model = make_model(cfg);
    const NoiseModel noise = make_noise(cfg);
    NoiseSampling sampling{&noise, {}};
    if (cfg.verify.continuous_noise && cfg.noise.kind == NoiseKind::Uniform) sampling.continuous_halfwidth = cfg.noise.sigma;
    VerifyOptions vo;
    vo.inits_per_cell = cfg.verify.inits_per_cell;
    vo.horizon = cfg.verify.horizon;
    vo.seed = derive_seed({cfg.seed, kVerifyStream});
    vo.sample_starts = cfg.verify.sample_starts;
    const VerificationReport rep = basin_fraction(*model, policy, partition, sampling, vo);
    const Point zero(policy.controls.front().size(), 0.0);
    const VerificationReport base = basin_fraction(*model, constant_policy(partition, zero), partition, sampling, vo);

    json j = stamp(verify_digest(cfg), partition);
    j["overall"] = rep.overall;
    j["escaped"] = rep.escaped;
    j["trajectories"] = rep.trajectories;
    j["inits_per_cell"] = rep.inits_per_cell;
    j["horizon"] = rep.horizon;
    j["seed"] = rep.seed;
    j["cell_fraction"] = rep.cell_fraction;
    j["open_loop_overall"] = base.overall;
    j["open_loop_escaped"] = base.escaped;
    json samples = json::array();
    json open = json::array();
    for (const auto& t : rep.samples) samples.push_back(trajectory_json(t));
    for (const auto& t : base.samples) open.push_back(trajectory_json(t));
    j["samples"] = samples;
    j["open_loop_samples"] = open;
    write_json(cfg.output / kVerificationFile, j);
    char pct[64];
    std::snprintf(pct, sizeof pct, "%.2f%% (open loop %.2f%%)", 100.0 * rep.overall, 100.0 * base.overall);
    log << "verify: attraction " << pct << ", " << rep.escaped << " of " << rep.trajectories << " escaped\n";
}

void stage_report(const RunConfig& cfg, std::ostream& log) {
    const Partition partition = make_partition(cfg);
    const fs::path out = cfg.output;
    const json s = read_artifact(out / kSolutionFile, solve_digest(cfg), partition);
    double gamma = 1.0;
    const Policy policy = load_policy(cfg, partition, &gamma);
    const json c = read_artifact(out / kCertificateFile, certify_digest(cfg), partition);
    const json v = read_artifact(out / kVerificationFile, verify_digest(cfg), partition);

    const auto value = s.at("value").get<std::vector<double>>();
    std::vector<double> control(partition.ordinary_count());
    for (std::size_t k = 0; k < control.size(); ++k) control[k] = policy.control(k).at(0);
    const bool certified = c.at("certified").get<bool>();
    const std::vector<double> mu =
        certified ? c.at("mu").get<std::vector<double>>() : std::vector<double>(partition.restricted_size(), 0.0);
    const auto fraction = v.at("cell_fraction").get<std::vector<double>>();

    export_grid_csv(mu, partition, out / "measure.csv");
    export_grid_csv(control, partition, out / "control.csv");
    export_grid_csv(value, partition, out / "value.csv");
    export_grid_csv(fraction, partition, out / "attraction.csv");
    const auto& samples = v.at("samples");
    const auto& open = v.at("open_loop_samples");
    for (std::size_t k = 0; k < samples.size(); ++k) {
        char name[64];
        std::snprintf(name, sizeof name, "trajectory_%03zu.csv", k);
        write_text_file(out / name, trajectory_csv(trajectory_from_json(samples[k])));
        std::snprintf(name, sizeof name, "open_loop_trajectory_%03zu.csv", k);
        write_text_file(out / name, trajectory_csv(trajectory_from_json(open[k])));
    }
    if (cfg.heatmaps) {
        write_text_file(out / "measure.pgm", heatmap_pgm(mu, partition));
        write_text_file(out / "control.pgm", heatmap_pgm(control, partition));
        write_text_file(out / "value.pgm", heatmap_pgm(value, partition));
        write_text_file(out / "attraction.pgm", heatmap_pgm(fraction, partition));
    }

    std::ostringstream sum;
    char line[160];
    sum << "grid: " << partition.counts()[0] << " x " << partition.counts()[1] << " (" << partition.ordinary_count()
        << " cells outside the attractor)\n";
    sum << "controls: " << policy.controls.size() << "\n";
    sum << "gamma: " << format_double(gamma) << "\n";
    sum << "lp objective: " << format_double(s.at("primal_objective").get<double>()) << "\n";
    sum << "duality gap: " << format_double(s.at("duality_gap").get<double>()) << "\n";
    sum << "certified: " << (certified ? "yes" : "no") << "\n";
    sum << "spectral radius of gamma*P: " << format_double(c.at("spectral_radius").get<double>()) << "\n";
    sum << "decay bound: " << format_double(c.at("decay_bound").get<double>()) << "\n";
    std::snprintf(line, sizeof line, "attraction: %.2f%%\nopen-loop attraction: %.2f%%\n",
                  100.0 * v.at("overall").get<double>(), 100.0 * v.at("open_loop_overall").get<double>());
    sum << line;
    sum << "escaped trajectories: " << v.at("escaped").get<std::size_t>() << " of "
        << v.at("trajectories").get<std::size_t>() << "\n";
    write_text_file(out / kSummaryFile, sum.str());
    log << sum.str();
}

}  // namespace

std::string to_string(Stage stage) {
    switch (stage) {
        case Stage::Build: return "build";
        case Stage::Solve: return "solve";
        case Stage::Extract: return "extract";
        case Stage::Certify: return "certify";
        case Stage::Verify: return "verify";
        case Stage::Report: return "report";
        case Stage::All: return "all";
    }
    return "all";
}

Stage parse_stage(const std::string& name) {
    for (Stage s : {Stage::Build, Stage::Solve, Stage::Extract, Stage::Certify, Stage::Verify, Stage::Report,
                    Stage::All})
        if (to_string(s) == name) return s;
    fail(ErrorKind::Usage, "unknown stage '" + name + "'");
}

void run_stage(Stage stage, const RunConfig& config, std::ostream& log) {
    fs::create_directories(config.output);
    switch (stage) {
        case Stage::Build: stage_build(config, log); break;
        case Stage::Solve: stage_solve(config, log); break;
        case Stage::Extract: stage_extract(config, log); break;
        case Stage::Certify: stage_certify(config, log); break;
        case Stage::Verify: stage_verify(config, log); break;
        case Stage::Report: stage_report(config, log); break;
        case Stage::All:
            for (Stage s : {Stage::Build, Stage::Solve, Stage::Extract, Stage::Certify, Stage::Verify, Stage::Report})
                run_stage(s, config, log);
            break;
    }
}

int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Config:
        case ErrorKind::Usage: return 2;
        case ErrorKind::MissingArtifact:
        case ErrorKind::StaleArtifact: return 3;
        case ErrorKind::Solver:
        case ErrorKind::DegenerateSolution: return 4;
        case ErrorKind::Validation: return 5;
        default: return 1;
    }
}

int run_pipeline(Stage stage, const RunConfig& config, std::ostream& log) {
    const fs::path error_path = config.output / kErrorFile;
    Stage current = stage;
    auto record = [&](ErrorKind kind, const std::string& message) {
        log << "error (" << to_string(kind) << ") in " << to_string(current) << ": " << message << "\n";
        try {
            fs::create_directories(config.output);
            write_json(error_path, {{"stage", to_string(current)}, {"kind", std::string(to_string(kind))},
                                    {"message", message}});
        } catch (const std::exception& e) {
            log << "could not write " << error_path.string() << ": " << e.what() << "\n";
        }
        return exit_code(kind);
    };
    try {
        std::error_code ec;
        fs::remove(error_path, ec);
        if (stage == Stage::All) {
            for (Stage s : {Stage::Build, Stage::Solve, Stage::Extract, Stage::Certify, Stage::Verify, Stage::Report}) {
                current = s;
                run_stage(s, config, log);
            }
        } else {
            run_stage(stage, config, log);
        }
        return 0;
    } catch (const Error& e) {
        return record(e.kind(), e.what());
    } catch (const fs::filesystem_error& e) {
        return record(ErrorKind::Io, e.what());
    } catch (const std::exception& e) {
        return record(ErrorKind::Numeric, e.what());
    }
}

}  // namespace pfstab
