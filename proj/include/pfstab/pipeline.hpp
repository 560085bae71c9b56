#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "pfstab/config.hpp"
#include "pfstab/error.hpp"

namespace pfstab {

enum class Stage { Build, Solve, Extract, Certify, Verify, Report, All };
std::string to_string(Stage stage);
/// Throws Error(Usage) for unknown names.
Stage parse_stage(const std::string& name);

// Artifact names inside the output directory.
inline constexpr const char* kEnsembleDir = "ensemble";
inline constexpr const char* kSolutionFile = "lp_solution.json";
inline constexpr const char* kPolicyFile = "policy.json";
inline constexpr const char* kPolicyCsv = "policy.csv";
inline constexpr const char* kCertificateFile = "certificate.json";
inline constexpr const char* kVerificationFile = "verification.json";
inline constexpr const char* kSummaryFile = "summary.txt";
inline constexpr const char* kErrorFile = "error.json";

/// Each stage reads its inputs from `config.output`, checks that they were
/// produced from the same upstream configuration (grid hash and stage
/// digests), and writes its artifacts atomically. Stale or missing inputs
/// raise Error(StaleArtifact) / Error(MissingArtifact).
void run_stage(Stage stage, const RunConfig& config, std::ostream& log);

/// Runs `stage` (All runs every stage in order) and converts failures into
/// an `error.json` file plus a nonzero exit code:
///   2 config/usage, 3 missing/stale artifact, 4 solver/degenerate,
///   5 validation, 1 anything else.
int run_pipeline(Stage stage, const RunConfig& config, std::ostream& log);

int exit_code(ErrorKind kind);

}  // namespace pfstab
