#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "pfstab/config.hpp"
#include "pfstab/error.hpp"
#include "pfstab/export.hpp"
#include "pfstab/fileio.hpp"
#include "pfstab/pipeline.hpp"
#include "support.hpp"

using namespace pfstab;
using namespace pfstab::testing;
namespace fs = std::filesystem;

namespace {

const char* kSmallConfig = R"({
  "model": {"type": "pendulum", "dt": 0.1, "noise_channel": "damping"},
  "grid": {"bounds": [["-pi", "pi"], [-10, 10]], "counts": [12, 12], "wrap": [true, false]},
  "controls": {"values": [-80, -40, 0, 40, 80]},
  "noise": {"type": "uniform", "sigma": 0.1, "levels": 2},
  "cost": {"out_of_domain": "clamp", "sink_penalty": 1e6},
  "sampling": {"samples_per_cell": 4},
  "lp": {"gamma": "auto"},
  "verify": {"inits_per_cell": 2, "horizon": 30, "sample_starts": [["pi/2", 0]], "local_gain": [-188.4, -45.2]},
  "report": {"heatmaps": true},
  "seed": 3
})";

RunConfig small_config(const fs::path& out) {
    RunConfig c = parse_config(kSmallConfig);
    c.output = out;
    return c;
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(read_text_file(p)); }

}  // namespace

TEST_CASE("config defaults describe the benchmark") {
    const RunConfig c = parse_config("{}");
    CHECK(c.grid.counts == std::vector<std::size_t>{70, 70});
    CHECK(c.controls.size() == 17);
    CHECK(c.noise.kind == NoiseKind::Uniform);
    CHECK(c.lp.gamma == 1.01);
    CHECK(make_partition(c).ordinary_count() == 70 * 70 - 4);
}

TEST_CASE("config round trip through canonical JSON") {
    const RunConfig c = parse_config(kSmallConfig);
    CHECK(parse_config(serialize_config(c)) == c);
    CHECK(serialize_config(parse_config(serialize_config(c))) == serialize_config(c));
    RunConfig d = c;
    d.lp.gamma = 1.05;
    d.noise = {NoiseKind::Bernoulli, 0.1, 10, 0.5};
    d.model.channel = PendulumNoise::InputErasure;
    CHECK(parse_config(serialize_config(d)) == d);
}

TEST_CASE("config rejects unknown keys and bad values with their path") {
    auto kind_and_message = [](const std::string& text) -> std::pair<ErrorKind, std::string> {
        try {
            parse_config(text);
        } catch (const Error& e) {
            return {e.kind(), e.what()};
        }
        return {ErrorKind::Io, ""};
    };
    auto [k1, m1] = kind_and_message(R"({"grid": {"cells": [4, 4]}})");
    CHECK(k1 == ErrorKind::Config);
    CHECK(m1.find("grid.cells") != std::string::npos);
    auto [k2, m2] = kind_and_message(R"({"colour": 1})");
    CHECK(k2 == ErrorKind::Config);
    CHECK(m2.find("colour") != std::string::npos);
    CHECK(kind_and_message(R"({"noise": {"type": "gauss"}})").first == ErrorKind::Config);
    CHECK(kind_and_message(R"({"noise": {"type": "bernoulli", "p": 0.5}})").first == ErrorKind::Config);
    CHECK(kind_and_message(R"({"lp": {"gamma": -1}})").first == ErrorKind::Config);
    CHECK(kind_and_message(R"({"lp": {"gamma_candidates": [1.1, 1.0]}})").first == ErrorKind::Config);
    CHECK(kind_and_message("{not json").first == ErrorKind::Config);
    CHECK(kind_and_message(R"({"grid": {"counts": [1, 4]}})").first == ErrorKind::Config);
}

TEST_CASE("numeric expressions") {
    CHECK(parse_number_expression("pi") == std::numbers::pi);
    CHECK(parse_number_expression("-pi/2") == -std::numbers::pi / 2);
    CHECK(parse_number_expression("2*pi/70") == doctest::Approx(2 * std::numbers::pi / 70));
    CHECK(parse_number_expression("1.5") == 1.5);
    CHECK_THROWS_AS(parse_number_expression("tau"), Error);
}

TEST_CASE("stage digests change only downstream of an edit") {
    const RunConfig a = parse_config(kSmallConfig);
    RunConfig b = a;
    b.verify.horizon = 40;
    CHECK(build_digest(a) == build_digest(b));
    CHECK(solve_digest(a) == solve_digest(b));
    CHECK(extract_digest(a) == extract_digest(b));
    CHECK(verify_digest(a) != verify_digest(b));
    RunConfig c = a;
    c.lp.gamma = 1.02;
    CHECK(build_digest(a) == build_digest(c));
    CHECK(solve_digest(a) != solve_digest(c));
    CHECK(certify_digest(a) != certify_digest(c));
    RunConfig d = a;
    d.output = "elsewhere";
    CHECK(verify_digest(a) == verify_digest(d));
}

TEST_CASE("grid CSV layout and round trip") {
    const Partition p = Partition::build_grid({{0.0, 1.0}, {0.0, 2.0}}, {3, 2}, {false, false},
                                              Box{{{0.4, 0.6}, {0.1, 0.2}}});
    std::vector<double> v(p.restricted_size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.1 * static_cast<double>(i) + 1.0 / 3.0;
    const std::string text = grid_csv(v, p);
    std::istringstream in(text);
    std::string header, first;
    std::getline(in, header);
    std::getline(in, first);
    CHECK(header == "grid_i, grid_j, x_center, y_center, value");
    CHECK(first.rfind("0, 0, ", 0) == 0);
    CHECK(text.find("-1, -1, nan, nan, ") != std::string::npos);
    const auto back = parse_grid_csv(text);
    REQUIRE(back.size() == p.index_count());
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(back[i] == v[i]);
    CHECK(back.back() == 0.0);
    CHECK_THROWS_AS(grid_csv(std::vector<double>{1.0}, p), Error);
    CHECK_THROWS_AS(parse_grid_csv("a, b\n"), Error);
}

TEST_CASE("trajectory CSV leaves the control of the final state empty") {
    Trajectory t;
    t.states = {{0.5, 0.0}, {0.4, -0.1}};
    t.controls = {{10.0}};
    t.noises = {{0.05}};
    const std::string text = trajectory_csv(t);
    CHECK(text == "step, x, xdot, u, xi\n0, 0.5, 0, 10, 0.050000000000000003\n1, 0.40000000000000002, "
                  "-0.10000000000000001, , \n");
}

TEST_CASE("heatmap is a plain PGM of the grid") {
    const Partition p = Partition::build_grid({{0.0, 1.0}, {0.0, 1.0}}, {3, 2}, {false, false},
                                              Box{{{0.4, 0.6}, {0.1, 0.2}}});
    std::vector<double> v(p.ordinary_count(), 1.0);
    v[0] = 0.0;
    const std::string pgm = heatmap_pgm(v, p);
    CHECK(pgm.rfind("P2\n3 2\n255\n", 0) == 0);
}

TEST_CASE("pipeline: stages in order, missing and stale inputs") {
    const fs::path out = scratch_dir("pipeline");
    const RunConfig cfg = small_config(out);
    std::ostringstream log;

    CHECK(run_pipeline(Stage::Solve, cfg, log) == 3);
    REQUIRE(fs::exists(out / kErrorFile));
    const auto err = read_json(out / kErrorFile);
    CHECK(err["kind"] == "missing-artifact");
    CHECK(err["stage"] == "solve");

    REQUIRE(run_pipeline(Stage::All, cfg, log) == 0);
    CHECK_FALSE(fs::exists(out / kErrorFile));
    for (const char* f : {kSolutionFile, kPolicyFile, kPolicyCsv, kCertificateFile, kVerificationFile, kSummaryFile,
                          "measure.csv", "control.csv", "value.csv", "attraction.csv", "trajectory_000.csv",
                          "open_loop_trajectory_000.csv", "value.pgm"})
        CHECK_MESSAGE(fs::exists(out / f), f);
    const auto sol = read_json(out / kSolutionFile);
    CHECK(sol["status"] == "optimal");
    CHECK(sol["gamma"].get<double>() > 1.0);
    CHECK(sol["strong_duality"] == true);
    CHECK(sol["complementary_slackness"] == true);
    CHECK(read_json(out / kPolicyFile)["objective_consistent"] == true);

    // A different grid invalidates everything downstream of build.
    RunConfig other = cfg;
    other.grid.counts = {14, 12};
    CHECK(run_pipeline(Stage::Solve, other, log) == 3);
    CHECK(read_json(out / kErrorFile)["kind"] == "stale-artifact");

    // A different gamma leaves the ensemble valid but not the solution.
    RunConfig regamma = cfg;
    regamma.lp.gamma = 1.0;
    CHECK(run_pipeline(Stage::Extract, regamma, log) == 3);
    CHECK(run_pipeline(Stage::Solve, regamma, log) == 0);
    CHECK(run_pipeline(Stage::Extract, regamma, log) == 0);

    // Damaged artifacts are reported as such.
    write_text_file(out / kPolicyFile, "{ truncated");
    CHECK(run_pipeline(Stage::Certify, regamma, log) == 1);
    CHECK(read_json(out / kErrorFile)["kind"] == "corrupt-file");
}

TEST_CASE("pipeline: an infeasible fixed gamma is a solver error") {
    const fs::path out = scratch_dir("pipeline-infeasible");
    RunConfig cfg = small_config(out);
    cfg.out_of_domain = OutOfDomain::Sink;
    cfg.lp.gamma = 1.2;
    std::ostringstream log;
    REQUIRE(run_pipeline(Stage::Build, cfg, log) == 0);
    CHECK(run_pipeline(Stage::Solve, cfg, log) == 4);
    const auto err = read_json(out / kErrorFile);
    CHECK(err["kind"] == "solver");
    CHECK(err["message"].get<std::string>().find("leak") != std::string::npos);
    CHECK(read_json(out / kSolutionFile)["status"] == "infeasible");
}

TEST_CASE("pipeline: repeated runs are byte-identical") {
    const fs::path a = scratch_dir("pipeline-a");
    const fs::path b = scratch_dir("pipeline-b");
    std::ostringstream log;
    REQUIRE(run_pipeline(Stage::All, small_config(a), log) == 0);
    REQUIRE(run_pipeline(Stage::All, small_config(b), log) == 0);
    std::size_t files = 0;
    for (const auto& f : fs::recursive_directory_iterator(a)) {
        if (!f.is_regular_file()) continue;
        const fs::path rel = fs::relative(f.path(), a);
        CHECK_MESSAGE(read_text_file(f.path()) == read_text_file(b / rel), rel.string());
        ++files;
    }
    CHECK(files > 20);
}

TEST_CASE("stage names") {
    CHECK(parse_stage("certify") == Stage::Certify);
    CHECK(to_string(Stage::All) == "all");
    CHECK_THROWS_AS(parse_stage("plot"), Error);
    CHECK(exit_code(ErrorKind::Config) == 2);
    CHECK(exit_code(ErrorKind::StaleArtifact) == 3);
    CHECK(exit_code(ErrorKind::DegenerateSolution) == 4);
    CHECK(exit_code(ErrorKind::Validation) == 5);
    CHECK(exit_code(ErrorKind::Io) == 1);
}
