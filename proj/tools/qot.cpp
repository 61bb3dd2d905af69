#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "qot/dataset.hpp"
#include "qot/dgcnn.hpp"
#include "qot/metrics.hpp"
#include "qot/qot_oracle.hpp"

namespace fs = std::filesystem;
using namespace qot;

namespace {

// Relative paths that do not exist are retried under $QOT_CONFIG_DIR.
std::string resolve_path(const std::string& path) {
    if (path.empty() || fs::exists(path) || fs::path(path).is_absolute()) return path;
    if (const char* dir = std::getenv("QOT_CONFIG_DIR")) {
        fs::path alt = fs::path(dir) / path;
        if (fs::exists(alt)) return alt.string();
    }
    return path;
}

Topology load_topology(const std::string& path) {
    std::string p = resolve_path(path);
    if (!fs::exists(p)) throw ParseError("topology file '" + path + "' does not exist");
    return Topology::parse_file(p);
}

OracleConfig load_oracle(const std::string& path) {
    if (path.empty()) return {};
    std::string p = resolve_path(path);
    if (!fs::exists(p)) throw ParseError("oracle config '" + path + "' does not exist");
    return OracleConfig::read_file(p);
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open '" + path + "' for writing");
    return out;
}

int cmd_calibrate(const std::string& topology_path, const std::string& oracle_path, double load,
                  int requests, std::uint64_t seed, const std::vector<double>& h_range,
                  const std::string& out_path) {
    Topology topo = load_topology(topology_path);
    OracleConfig oracle = load_oracle(oracle_path);
    TrafficConfig traffic;
    traffic.load_erlangs = load;
    traffic.seed = seed;

    CalibrationOptions opts;
    opts.pilot_requests = requests;
    if (!h_range.empty()) {
        opts.h_lo = h_range[0];
        opts.h_hi = h_range[1];
    }
    CalibrationResult result = calibrate(oracle, topo, traffic, {}, opts);
    oracle.xt_coupling_h_per_km = result.h_per_km;

    auto out = open_out(out_path);
    out << "# seed " << seed << "\n";
    oracle.write(out);
    out << "achieved_infeasible_fraction " << result.infeasible_fraction << "\n";
    std::cerr << "calibrated h = " << result.h_per_km << " per km, infeasible fraction "
              << result.infeasible_fraction << " over " << result.pilot_requests
              << " pilot requests\n";
    return 0;
}

int cmd_generate(const std::string& topology_path, const std::string& oracle_path, double load,
                 int requests, std::uint64_t seed, int balance_per_class,
                 const std::string& out_path) {
    Topology topo = load_topology(topology_path);
    OracleConfig oracle = load_oracle(oracle_path);
    TrafficConfig traffic;
    traffic.load_erlangs = load;
    traffic.request_count = requests;
    traffic.seed = seed;

    GenerationResult result = run_generation(topo, traffic, oracle);
    Dataset dataset = std::move(result.dataset);
    std::cerr << "arrivals " << result.arrivals << ", blocked " << result.blocked << ", admitted "
              << result.admitted << ", qot-rejected " << result.rejected_qot << "\n";
    if (balance_per_class > 0) dataset = balance(dataset, balance_per_class, seed);

    auto out = open_out(out_path);
    write_dataset(out, dataset);
    auto counts = dataset.label_counts();
    std::cerr << "wrote " << dataset.patterns.size() << " patterns (" << counts[1]
              << " feasible, " << counts[0] << " infeasible) to " << out_path << "\n";
    return 0;
}

int cmd_train(const std::string& dataset_path, int cv, int epochs, std::uint64_t seed, int threads,
              const std::string& out_path, const std::string& history_path) {
    std::string p = resolve_path(dataset_path);
    if (!fs::exists(p)) throw ParseError("dataset file '" + dataset_path + "' does not exist");
    Dataset dataset = read_dataset_file(p);

    DgcnnConfig config;
    config.seed = seed;
    if (epochs > 0) config.max_epochs = epochs;

    if (cv > 0) {
        EvalReport report = cross_validate(dataset, cv, config, threads);
        auto out = open_out(out_path);
        write_eval_csv(out, report, static_cast<int>(dataset.patterns.size()));
        std::cerr << "cv mean acc " << report.mean_acc << ", mean auc " << report.mean_auc
                  << ", total " << report.total_seconds / 60.0 << " min\n";
        return 0;
    }

    TrainResult result = train(dataset, config);
    write_model_file(out_path, result.model);
    if (!history_path.empty()) {
        auto out = open_out(history_path);
        write_history_csv(out, result.history);
    }
    std::cerr << "trained " << result.history.size() << " epochs, final loss "
              << result.history.back().loss << ", train acc " << result.history.back().train_acc
              << "\n";
    return 0;
}

int cmd_predict(const std::string& model_path, const std::string& dataset_path, double threshold,
                const std::string& out_path) {
    std::string mp = resolve_path(model_path);
    if (!fs::exists(mp)) throw ParseError("model file '" + model_path + "' does not exist");
    std::string dp = resolve_path(dataset_path);
    if (!fs::exists(dp)) throw ParseError("dataset file '" + dataset_path + "' does not exist");
    DgcnnModel model = read_model_file(mp);
    Dataset dataset = read_dataset_file(dp);

    std::ofstream file;
    std::ostream* out = &std::cout;
    if (!out_path.empty()) {
        file = open_out(out_path);
        out = &file;
    }
    double worst_ms = 0.0, total_ms = 0.0;
    for (const auto& pattern : dataset.patterns) {
        auto t0 = std::chrono::steady_clock::now();
        double score = forward(model, pattern);
        Decision decision = classify_state(model, pattern, threshold);
        double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                        .count();
        worst_ms = std::max(worst_ms, ms);
        total_ms += ms;
        char buf[64];
        std::snprintf(buf, sizeof buf, "%d %.6f %s\n", pattern.request_id, score,
                      decision == Decision::Feasible ? "feasible" : "infeasible");
        *out << buf;
    }
    if (!dataset.patterns.empty())
        std::cerr << "latency per pattern: mean " << total_ms / dataset.patterns.size()
                  << " ms, max " << worst_ms << " ms\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"QoT estimation pipeline: calibrate, generate, train, predict"};
    app.require_subcommand(1);

    std::string topology_path, oracle_path, dataset_path, model_path, history_path, out_path;
    double load = 400.0, threshold = 0.5;
    int requests = 20000, balance_per_class = 0, cv = 0, epochs = 0, threads = 1;
    std::uint64_t seed = 1;
    std::vector<double> h_range;

    auto* cal = app.add_subcommand("calibrate", "fit the crosstalk coupling to the target band");
    cal->add_option("--topology", topology_path)->required();
    cal->add_option("--oracle-config", oracle_path);
    cal->add_option("--load", load);
    cal->add_option("--requests", requests)->check(CLI::PositiveNumber);
    cal->add_option("--seed", seed);
    cal->add_option("--h-range", h_range)->expected(2);
    cal->add_option("--out", out_path)->required();

    auto* gen = app.add_subcommand("generate", "simulate traffic and emit labeled patterns");
    gen->add_option("--topology", topology_path)->required();
    gen->add_option("--oracle-config", oracle_path);
    gen->add_option("--load", load);
    gen->add_option("--requests", requests)->check(CLI::NonNegativeNumber);
    gen->add_option("--seed", seed);
    gen->add_option("--balance", balance_per_class)->check(CLI::PositiveNumber);
    gen->add_option("--out", out_path)->required();

    auto* trn = app.add_subcommand("train", "train a classifier or run cross validation");
    trn->add_option("--dataset", dataset_path)->required();
    trn->add_option("--cv", cv)->check(CLI::PositiveNumber);
    trn->add_option("--epochs", epochs)->check(CLI::PositiveNumber);
    trn->add_option("--seed", seed);
    trn->add_option("--threads", threads)->check(CLI::PositiveNumber);
    trn->add_option("--history", history_path);
    trn->add_option("--out", out_path)->required();

    auto* prd = app.add_subcommand("predict", "score patterns with a trained model");
    prd->add_option("--model", model_path)->required();
    prd->add_option("--dataset", dataset_path)->required();
    prd->add_option("--threshold", threshold)->check(CLI::Range(0.0, 1.0));
    prd->add_option("--out", out_path);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (!h_range.empty() && h_range[0] >= h_range[1]) {
        std::cerr << "error: --h-range bounds must be increasing\n";
        return 2;
    }

    try {
        if (cal->parsed())
            return cmd_calibrate(topology_path, oracle_path, load, requests, seed, h_range, out_path);
        if (gen->parsed())
            return cmd_generate(topology_path, oracle_path, load, requests, seed, balance_per_class,
                                out_path);
        if (trn->parsed())
            return cmd_train(dataset_path, cv, epochs, seed, threads, out_path, history_path);
        return cmd_predict(model_path, dataset_path, threshold, out_path);
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
