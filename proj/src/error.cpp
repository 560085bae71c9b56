#include "pfstab/error.hpp"

namespace pfstab {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Config: return "config";
        case ErrorKind::Usage: return "usage";
        case ErrorKind::Numeric: return "numeric";
        case ErrorKind::Model: return "model";
        case ErrorKind::CorruptFile: return "corrupt-file";
        case ErrorKind::Validation: return "validation";
        case ErrorKind::Solver: return "solver";
        case ErrorKind::DegenerateSolution: return "degenerate-solution";
        case ErrorKind::MissingArtifact: return "missing-artifact";
        case ErrorKind::StaleArtifact: return "stale-artifact";
        case ErrorKind::Io: return "io";
    }
    return "unknown";
}

}  // namespace pfstab
