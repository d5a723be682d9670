#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "relunet/arrangement.hpp"
#include "relunet/conic.hpp"

namespace relunet {

enum class SamplingStrategy { Uniform, RandomNetwork };

std::string to_string(SamplingStrategy s);
SamplingStrategy parse_sampling_strategy(const std::string& text);

struct ConeClassification {
    bool contains_global = false;
    bool bad_local_stationary = false;
    bool infeasible = false;  // MinNorm cone that cannot interpolate
    bool max_iter = false;    // solver hit its cap; never counted as either class
    double cone_value = 0.0;
    double global_value = 0.0;
};

// Tolerance of the "contains a global minimum" rule.
constexpr double kGlobalTolerance = 1e-7;

ConeClassification classify_cone(const ActivationMatrix& A, const Dataset& ds, double lambda, double global_value,
                                  ObjectiveKind kind = ObjectiveKind::Regularized, const SolverOptions& opts = {});

// True iff every support pattern appears among A's rows.
bool classify_by_patterns(const ActivationMatrix& A, const std::vector<NeuronPattern>& sparse_support);

// Rows with nonzero beta in a solution (relative threshold against the largest group).
std::vector<NeuronPattern> solution_support(const SolveResult& sr, double rel_threshold = 1e-8);

// ceil(q ln((n+1)/epsilon)) with q = cover_count(n, d).
std::uint64_t theorem1_m_threshold(std::int64_t n, std::int64_t d, double epsilon);

struct FractionBound {
    double upper_bound = 0.0;  // m 2^{-max(p,q)}, not capped
    double exact = 0.0;        // probability that m uniform rows cover both label masks
};

// p, q: number of positive / negative labels. An empty mask is covered trivially.
FractionBound theorem3_fraction(int p, int q, std::uint64_t m, bool with_signs);

struct StatsConfig {
    std::size_t num_cones = 100;
    std::size_t num_datasets = 5;
    double epsilon = 0.1;
    double lambda = 0.01;
    std::vector<std::size_t> m_grid;
    SamplingStrategy strategy = SamplingStrategy::Uniform;
    ObjectiveKind kind = ObjectiveKind::Regularized;
    std::uint64_t seed = 0;
    SolverOptions cone_solver{};
    SolverOptions global_solver{1e-10, 200000, 1e-9};
    unsigned threads = 0;  // 0: RELU_LANDSCAPE_THREADS or hardware concurrency
};

struct Summary {
    double mean = 0.0;
    double min = 0.0;
    double max = 0.0;
};

struct LandscapeRow {
    std::size_t m = 0;
    Summary prop_global;
    Summary prop_bad;
    std::size_t num_cones = 0;  // per dataset
    std::size_t num_datasets = 0;
    std::size_t max_iter_count = 0;
    std::size_t infeasible_count = 0;
    std::size_t pattern_covered = 0;      // classify_by_patterns true
    std::size_t pattern_counterexamples = 0;  // covered but not contains_global
};

struct DatasetRecord {
    Dataset dataset;
    double global_value = 0.0;
    SolveResult global;
    std::vector<NeuronPattern> support;
    std::vector<double> prop_global;  // per m
    std::vector<double> prop_bad;     // per m
};

struct LandscapeStats {
    std::int64_t n = 0;
    std::int64_t d = 0;
    double lambda = 0.0;
    std::string cover_count;  // exact decimal
    std::vector<LandscapeRow> rows;
    std::vector<DatasetRecord> datasets;
};

using DatasetGenerator = std::function<Dataset(std::size_t replicate)>;

LandscapeStats estimate_proportions(const StatsConfig& cfg, const DatasetGenerator& dataset_gen);

// Number of worker threads for a requested count (0 = default policy).
unsigned resolve_thread_count(unsigned requested);

// Runs job(i) for i in [0, count) on a pool; results must be written by index.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& job);

// CSV `m,prop_global_mean,...,prop_bad_max` preceded by `# n=..,d=..,lambda=..,cover_count=..`.
void write_landscape_csv(std::ostream& out, const LandscapeStats& stats);

}  // namespace relunet
