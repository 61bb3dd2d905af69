#pragma once

#include <iosfwd>
#include <vector>

#include "qot/dgcnn.hpp"

namespace qot {

// Fraction correctly classified at the threshold; scores exactly at the
// threshold count as class 1.
double accuracy(const std::vector<double>& scores, const std::vector<int>& labels,
                double threshold = 0.5);

// Rank-based AUC: probability a random positive outranks a random negative,
// ties counted 1/2. Both classes must be present.
double auc_roc(const std::vector<double>& scores, const std::vector<int>& labels);

struct FoldReport {
    int fold;
    double acc;
    double auc;
    int tp, tn, fp, fn;
    double train_seconds;
    std::vector<double> scores; // test-fold scores, order matches labels
    std::vector<int> labels;
    std::vector<EpochStats> history;
};

struct EvalReport {
    std::vector<FoldReport> folds;
    double mean_acc;
    double mean_auc;
    double pooled_acc;
    double pooled_auc;
    double total_seconds;
};

// 10-fold style cross validation: one model per fold, stratified splits,
// per-fold seeds derived from config.seed. Folds train concurrently up to
// `threads` (1 = sequential).
EvalReport cross_validate(const Dataset& dataset, int folds, const DgcnnConfig& config,
                          int threads = 1);

// CSV: one row per fold plus a summary row (|D|, |Dtrn|, |Dtst|, ACC%, AUC,
// training minutes).
void write_eval_csv(std::ostream& out, const EvalReport& report, int dataset_size);

} // namespace qot
