#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "pfstab/config.hpp"
#include "pfstab/error.hpp"
#include "pfstab/exec.hpp"
#include "pfstab/pipeline.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Optimal stabilization by transfer operators: build, solve, certify and verify."};
    std::string stage_name;
    std::string config_path;
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    std::optional<double> gamma;
    std::optional<int> threads;
    app.add_option("stage", stage_name, "build | solve | extract | certify | verify | report | all")
        ->required()
        ->check(CLI::IsMember({"build", "solve", "extract", "certify", "verify", "report", "all"}));
    app.add_option("--config", config_path, "run configuration (JSON)")->required();
    app.add_option("--out", out, "output directory (overrides the config)");
    app.add_option("--seed", seed, "base seed (overrides the config)");
    app.add_option("--gamma", gamma, "discount factor gamma (overrides the config)");
    app.add_option("--threads", threads, "worker threads (capped by PFSTAB_THREADS)")->check(CLI::PositiveNumber);
    CLI11_PARSE(app, argc, argv);

    pfstab::RunConfig config;
    try {
        config = pfstab::load_config(config_path);
        if (out) config.output = *out;
        if (seed) config.seed = *seed;
        if (gamma) {
            if (!(*gamma > 0.0)) pfstab::fail(pfstab::ErrorKind::Usage, "--gamma must be positive");
            config.lp.gamma = *gamma;
        }
    } catch (const pfstab::Error& e) {
        std::cerr << "error (" << pfstab::to_string(e.kind()) << "): " << e.what() << "\n";
        return pfstab::exit_code(e.kind());
    }
    pfstab::set_thread_count(threads.value_or(0));
    return pfstab::run_pipeline(pfstab::parse_stage(stage_name), config, std::cerr);
}
