#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pfstab/exec.hpp"
#include "pfstab/models.hpp"
#include "pfstab/partition.hpp"
#include "pfstab/sparse.hpp"

namespace pfstab {

/// Sample points of every ordinary cell, computed once and reused across
/// (action, noise) pairs.
struct SampleSet {
    std::size_t per_cell = 0;
    SampleScheme scheme = SampleScheme::UniformSubgrid;
    std::uint64_t seed = 0;
    std::vector<std::vector<Point>> points;  ///< indexed by ordinary cell
};

SampleSet make_sample_set(const Partition& partition, std::size_t per_cell, SampleScheme scheme,
                          std::uint64_t seed);

/// What happens to sample images that leave a non-periodic bound.
///   Sink:  the image mass moves to the absorbing sink column.
///   Clamp: the image is projected onto the domain boundary first, so the
///          chain models a map X -> X and the sink receives no mass.
enum class OutOfDomain { Sink, Clamp };
std::string to_string(OutOfDomain mode);
/// "sink" | "clamp"; throws Error(Config) otherwise.
OutOfDomain parse_out_of_domain(const std::string& name);

/// Ulam matrix of the map x -> T(x, u, xi) on the full N-index chain.
///
/// Row i of an ordinary cell is the empirical distribution of the cells hit
/// by its sample images; images outside the domain go to the sink column
/// (or are clamped, see OutOfDomain). `exit_fraction`, when given, receives
/// per ordinary cell the fraction of images that left the domain.
/// The sink and attractor rows are unit self-loops. Throws Error(Numeric)
/// naming (cell, sample, action, noise) when an image is not finite.
SparseMatrix build_pf_matrix(const SystemModel& system, const Partition& partition, const Point& control,
                             const Point& noise, const SampleSet& samples, Exec exec = Exec::Parallel,
                             std::size_t action_id = 0, std::size_t noise_id = 0,
                             OutOfDomain out_of_domain = OutOfDomain::Sink,
                             std::vector<double>* exit_fraction = nullptr);

SparseMatrix build_pf_matrix(const SystemModel& system, const Partition& partition, const Point& control,
                             const Point& noise, std::size_t samples_per_cell, SampleScheme scheme,
                             std::uint64_t seed, Exec exec = Exec::Parallel);

/// Entrywise sum_l v^l P_l. Throws Error(Usage) on shape or length mismatch.
SparseMatrix average_over_noise(const std::vector<SparseMatrix>& matrices, const NoiseModel& noise,
                                Exec exec = Exec::Parallel);
SparseMatrix weighted_sum(const std::vector<SparseMatrix>& matrices, const std::vector<double>& weights,
                          Exec exec = Exec::Parallel);

/// Drops the last row and column (the attractor index).
SparseMatrix restrict_to_complement(const SparseMatrix& full);

enum class CostQuadrature { Samples, Center };
std::string to_string(CostQuadrature q);
CostQuadrature parse_cost_quadrature(const std::string& name);

/// G^a over the N-1 restricted indices: sample mean of the stage cost per
/// cell, averaged over the noise law, with `sink_penalty` at the sink.
/// Throws Error(Model) if the cost is negative or not finite anywhere.
std::vector<std::vector<double>> build_cost_table(const StageCost& cost, const Partition& partition,
                                                  const ControlGrid& controls, const NoiseModel& noise,
                                                  const SampleSet& samples, double sink_penalty,
                                                  CostQuadrature quadrature = CostQuadrature::Samples,
                                                  Exec exec = Exec::Parallel);

struct Provenance {
    std::uint64_t grid_hash = 0;
    std::uint64_t build_hash = 0;
    std::string sample_scheme;
    std::size_t samples_per_cell = 0;
    std::uint64_t seed = 0;
    std::string model;
    std::string out_of_domain = "sink";

    friend bool operator==(const Provenance&, const Provenance&) = default;
};

/// Per-action transfer matrices and LP data for one discretized system.
struct TransferEnsemble {
    std::vector<SparseMatrix> full;        ///< P_{T_a}, N x N, noise-averaged
    std::vector<SparseMatrix> restricted;  ///< P^1_{T_a}, attractor removed
    std::vector<std::vector<double>> costs;  ///< G^a, length N-1
    std::vector<double> mass;                ///< m, length N-1
    std::optional<std::size_t> sink;         ///< restricted index of the sink, if any
    std::vector<Point> controls;
    double max_component_row_defect = 0.0;  ///< max |row sum - 1| over every P_{T_{a,l}}
    Provenance provenance;

    std::size_t action_count() const { return restricted.size(); }
    std::size_t restricted_size() const { return mass.size(); }

    /// Throws Error(Validation) naming the first violated invariant.
    void validate() const;

    friend bool operator==(const TransferEnsemble&, const TransferEnsemble&) = default;
};

/// Small chain specified directly by its restricted matrices, without
/// geometry or sink. Full matrices are completed with the attractor column.
TransferEnsemble ensemble_from_restricted(std::vector<SparseMatrix> restricted,
                                          std::vector<std::vector<double>> costs, std::vector<double> mass);

enum class MassChoice { CellVolume, Unit };

struct BuildOptions {
    std::size_t samples_per_cell = 10;
    SampleScheme scheme = SampleScheme::UniformSubgrid;
    std::uint64_t seed = 0;
    CostQuadrature quadrature = CostQuadrature::Samples;
    double sink_penalty = 1e6;
    /// With Clamp, G^a_j is charged sink_penalty times the fraction of cell
    /// j's images that left the domain, so exits stay costly.
    OutOfDomain out_of_domain = OutOfDomain::Sink;
    MassChoice mass = MassChoice::CellVolume;
    std::uint64_t build_hash = 0;  ///< caller-supplied digest of the build inputs
};

TransferEnsemble build_ensemble(const SystemModel& system, const StageCost& cost, const Partition& partition,
                                const ControlGrid& controls, const NoiseModel& noise, const BuildOptions& options,
                                Exec exec = Exec::Parallel);

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

/// pfmat text: header `pfmat 1 <rows> <cols> <nnz>`, one `<row> <col> <value>`
/// line per nonzero in row-major order, then `checksum <fnv1a-64 hex>` over
/// every preceding byte.
std::string format_pfmat(const SparseMatrix& m);
/// Throws Error(CorruptFile) on checksum, syntax or shape problems.
SparseMatrix parse_pfmat(const std::string& text, const std::string& origin = "<memory>");
void write_pfmat(const SparseMatrix& m, const std::filesystem::path& path);
SparseMatrix read_pfmat(const std::filesystem::path& path);

/// Writes `ensemble.json` plus one pfmat file per matrix into `dir`.
void save_ensemble(const TransferEnsemble& ensemble, const std::filesystem::path& dir);
/// Reads and validates an ensemble written by save_ensemble.
TransferEnsemble load_ensemble(const std::filesystem::path& dir);

inline constexpr const char* kEnsembleManifest = "ensemble.json";

}  // namespace pfstab
