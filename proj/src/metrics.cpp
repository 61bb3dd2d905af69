#include "qot/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <numeric>
#include <ostream>

namespace qot {

double accuracy(const std::vector<double>& scores, const std::vector<int>& labels, double threshold) {
    if (scores.empty() || scores.size() != labels.size())
        throw ValueError("accuracy needs equal-length non-empty inputs");
    int correct = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
        int pred = scores[i] >= threshold ? 1 : 0;
        if (pred == labels[i]) ++correct;
    }
    return static_cast<double>(correct) / scores.size();
}

double auc_roc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.empty() || scores.size() != labels.size())
        throw ValueError("auc_roc needs equal-length non-empty inputs");
    long pos = std::count(labels.begin(), labels.end(), 1);
    long neg = static_cast<long>(labels.size()) - pos;
    if (pos == 0 || neg == 0) throw ValueError("auc_roc needs both classes present");

    // mid-rank assignment, then the Mann-Whitney identity
    std::vector<size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return scores[a] < scores[b]; });

    std::vector<double> rank(scores.size());
    size_t i = 0;
    while (i < idx.size()) {
        size_t j = i;
        while (j + 1 < idx.size() && scores[idx[j + 1]] == scores[idx[i]]) ++j;
        double mid = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
        for (size_t t = i; t <= j; ++t) rank[idx[t]] = mid;
        i = j + 1;
    }
    double rank_sum_pos = 0.0;
    for (size_t t = 0; t < labels.size(); ++t)
        if (labels[t] == 1) rank_sum_pos += rank[t];
    return (rank_sum_pos - 0.5 * pos * (pos + 1)) / (static_cast<double>(pos) * neg);
}

EvalReport cross_validate(const Dataset& dataset, int folds, const DgcnnConfig& config, int threads) {
    auto parts = split_folds(dataset, folds, config.seed);

    auto run_fold = [&](int f) -> FoldReport {
        std::vector<const Pattern*> train_pats, test_pats;
        for (int i : parts[f].train) train_pats.push_back(&dataset.patterns[i]);
        for (int i : parts[f].test) test_pats.push_back(&dataset.patterns[i]);

        DgcnnConfig fold_cfg = config;
        fold_cfg.seed = config.seed + 1000003ull * (f + 1);

        auto t0 = std::chrono::steady_clock::now();
        TrainResult tr = train(train_pats, dataset.n, fold_cfg, test_pats);
        auto t1 = std::chrono::steady_clock::now();

        FoldReport rep;
        rep.fold = f + 1;
        rep.train_seconds = std::chrono::duration<double>(t1 - t0).count();
        rep.history = tr.history;
        rep.tp = rep.tn = rep.fp = rep.fn = 0;
        for (const Pattern* p : test_pats) {
            double s = forward(tr.model, *p);
            rep.scores.push_back(s);
            rep.labels.push_back(p->label);
            int pred = s >= 0.5 ? 1 : 0;
            if (pred == 1 && p->label == 1) ++rep.tp;
            else if (pred == 0 && p->label == 0) ++rep.tn;
            else if (pred == 1) ++rep.fp;
            else ++rep.fn;
        }
        rep.acc = accuracy(rep.scores, rep.labels);
        rep.auc = auc_roc(rep.scores, rep.labels);
        return rep;
    };

    auto t0 = std::chrono::steady_clock::now();
    EvalReport report;
    report.folds.resize(folds);
    if (threads <= 1) {
        for (int f = 0; f < folds; ++f) report.folds[f] = run_fold(f);
    } else {
        int next = 0;
        while (next < folds) {
            int batch = std::min(threads, folds - next);
            std::vector<std::future<FoldReport>> futs;
            for (int b = 0; b < batch; ++b)
                futs.push_back(std::async(std::launch::async, run_fold, next + b));
            for (int b = 0; b < batch; ++b) report.folds[next + b] = futs[b].get();
            next += batch;
        }
    }
    auto t1 = std::chrono::steady_clock::now();
    report.total_seconds = std::chrono::duration<double>(t1 - t0).count();

    report.mean_acc = report.mean_auc = 0.0;
    long tp = 0, tn = 0, fp = 0, fn = 0;
    std::vector<double> all_scores;
    std::vector<int> all_labels;
    for (const auto& f : report.folds) {
        report.mean_acc += f.acc;
        report.mean_auc += f.auc;
        tp += f.tp;
        tn += f.tn;
        fp += f.fp;
        fn += f.fn;
        all_scores.insert(all_scores.end(), f.scores.begin(), f.scores.end());
        all_labels.insert(all_labels.end(), f.labels.begin(), f.labels.end());
    }
    report.mean_acc /= folds;
    report.mean_auc /= folds;
    report.pooled_acc = static_cast<double>(tp + tn) / (tp + tn + fp + fn);
    report.pooled_auc = auc_roc(all_scores, all_labels);
    return report;
}

void write_eval_csv(std::ostream& out, const EvalReport& report, int dataset_size) {
    out << "fold,D,Dtrn,Dtst,acc_percent,auc,train_minutes\n";
    for (const auto& f : report.folds) {
        int dtst = f.tp + f.tn + f.fp + f.fn;
        out << f.fold << "," << dataset_size << "," << dataset_size - dtst << "," << dtst << ","
            << 100.0 * f.acc << "," << f.auc << "," << f.train_seconds / 60.0 << "\n";
    }
    int dtst = report.folds.empty() ? 0
                                    : report.folds[0].tp + report.folds[0].tn + report.folds[0].fp +
                                          report.folds[0].fn;
    out << "mean," << dataset_size << "," << dataset_size - dtst << "," << dtst << ","
        << 100.0 * report.mean_acc << "," << report.mean_auc << "," << report.total_seconds / 60.0
        << "\n";
}

} // namespace qot
