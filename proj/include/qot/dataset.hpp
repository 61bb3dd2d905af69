#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <vector>

#include "qot/qot_oracle.hpp"

namespace qot {

// One training example (A^s, X^s, y^s). Adjacency and features are stored
// sparsely over the active connection indices; inactive rows are all-zero by
// construction.
struct Pattern {
    int request_id = 0;
    int label = 0;
    std::vector<int> active;               // sorted 1-based connection indices
    Eigen::MatrixXd features;              // active.size() x 9, row k = connection active[k]
    std::vector<std::pair<int, int>> edges; // link-sharing pairs (i, j), i < j, 1-based

    int active_count() const { return static_cast<int>(active.size()); }
};

constexpr int kFeatureCount = 9;

struct Dataset {
    int n = 0; // connection count of the generating topology
    int c = kFeatureCount;
    std::string topology_fingerprint;
    std::string config_fingerprint;
    std::vector<Pattern> patterns;

    std::vector<int> label_counts() const; // {count y=0, count y=1}
};

// Encode the would-be state reached by committing `candidate`: `state` must
// already contain it, `prev_report` is the oracle evaluation of the state
// without it, `report` the evaluation with it.
Pattern extract_pattern(const NetworkState& state, int candidate_connection,
                        const QotReport& prev_report, const QotReport& report);

struct GenerationResult {
    Dataset dataset;
    long arrivals = 0;
    long blocked = 0;
    long admitted = 0;
    long rejected_qot = 0;
};

// The event-driven dataset-generation loop: allocate on arrival, label the
// would-be state with the oracle, emit a pattern, commit only feasible
// states, release on departure. Deterministic per seeds.
GenerationResult run_generation(const Topology& topology, const TrafficConfig& traffic,
                                const OracleConfig& oracle, const RscaConfig& rsca = {});

// Uniform without-replacement subsample with exactly per_class patterns of
// each label, deterministically shuffled.
Dataset balance(const Dataset& dataset, int per_class, std::uint64_t seed);

struct Fold {
    std::vector<int> train; // pattern indices into the dataset
    std::vector<int> test;
};

// Stratified k-fold partition; every pattern lands in exactly one test fold.
std::vector<Fold> split_folds(const Dataset& dataset, int folds, std::uint64_t seed);

void write_dataset(std::ostream& out, const Dataset& dataset);
void write_dataset_file(const std::string& path, const Dataset& dataset);
Dataset read_dataset(std::istream& in);
Dataset read_dataset_file(const std::string& path);

} // namespace qot
