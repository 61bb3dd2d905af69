#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <string>
#include <vector>

#include "qot/dataset.hpp"

namespace qot {

struct DgcnnConfig {
    std::vector<int> conv_channels = {32, 32, 32, 1};
    int sortpool_k = 0; // 0 = auto: min(n, 64)
    int conv1_filters = 16; // kernel and stride are both C (one sortpooled row)
    int conv2_filters = 32;
    int conv2_kernel = 5;
    int pool_size = 2;
    int pool_stride = 2;
    int dense_width = 128;
    double dropout_rate = 0.5;
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int batch_size = 50;
    int max_epochs = 300;
    int patience = 30;
    std::uint64_t seed = 1;
    double ber_floor = 1e-15; // x9 transform: -log10(max(ber, floor)) / 15

    int total_channels() const; // C = sum of conv_channels
    std::string canonical_text() const;
};

// Derived layer sizes for a resolved sortpool size k. Degenerate graphs
// (tiny k) collapse later stages to length 0; the dense layer then sees an
// empty input and the score reduces to the bias path.
struct PipelineDims {
    int C = 0;
    int k = 0;
    int pool_len = 0;
    int pool_kernel = 0;
    int conv2_len = 0;
    int flat_len = 0;
};
PipelineDims pipeline_dims(const DgcnnConfig& config, int k);

// All learnable tensors. Kept separate from the model so gradients and ADAM
// moments reuse the same shape.
struct DgcnnParams {
    std::vector<Eigen::MatrixXd> conv_w; // c_{t-1} x c_t, c_0 = 9
    Eigen::MatrixXd conv1_w;             // filters1 x C
    Eigen::VectorXd conv1_b;
    Eigen::MatrixXd conv2_w; // filters2 x (kernel * filters1)
    Eigen::VectorXd conv2_b;
    Eigen::MatrixXd dense_w; // dense_width x flat_len
    Eigen::VectorXd dense_b;
    Eigen::VectorXd out_w;
    double out_b = 0.0;

    void set_zero();
    void add_scaled(const DgcnnParams& other, double scale);
};

struct ParamView {
    std::string name;
    double* data;
    std::ptrdiff_t size;
};
std::vector<ParamView> param_views(DgcnnParams& params);

struct DgcnnModel {
    DgcnnConfig config;
    int n = 0;
    int k = 0;
    DgcnnParams params;
    Eigen::VectorXd feat_min, feat_max; // per-column, over training actives
};

DgcnnModel init_model(const DgcnnConfig& config, int n, std::uint64_t seed);

// Min-max stats over the active rows of the given patterns (x9 transformed
// first). Must be called before training; frozen afterwards.
void fit_normalization(DgcnnModel& model, const std::vector<const Pattern*>& patterns);

enum class RunMode { Train, Eval };

// Cached intermediates of one forward pass, consumed by backward().
struct ForwardTrace {
    Eigen::MatrixXd x_norm;              // n_active x 9
    std::vector<Eigen::MatrixXd> conv_y; // propagated inputs per layer
    std::vector<Eigen::MatrixXd> conv_z; // tanh outputs per layer
    std::vector<int> sort_order;         // k entries: global node index, -1 = zero pad
    Eigen::MatrixXd pooled_rows;         // k x C
    Eigen::MatrixXd conv1_pre, conv1_post;
    Eigen::MatrixXd pool_out;
    Eigen::MatrixXi pool_argmax;
    Eigen::MatrixXd conv2_pre, conv2_post;
    Eigen::VectorXd dense_pre, dense_post;
    Eigen::VectorXd dropout_mask;
    double logit = 0.0;
    double prob = 0.0;
};

// Score in (0, 1). Eval mode is deterministic; train mode applies inverted
// dropout using the supplied rng.
double forward(const DgcnnModel& model, const Pattern& pattern, RunMode mode, Rng* rng,
               ForwardTrace* trace);
double forward(const DgcnnModel& model, const Pattern& pattern);

// SortPooling order over n rows, where rows absent from `active` are
// implicit zero rows: descending by last column, ties broken by preceding
// columns right to left, then original index ascending.
std::vector<int> sort_pooling_order(const Eigen::MatrixXd& z_active, const std::vector<int>& active,
                                    int n, int k);

// Mean binary cross-entropy over the batch plus gradients for every
// parameter, accumulated in reverse mode through the whole pipeline.
double loss_and_gradients(const DgcnnModel& model, const std::vector<const Pattern*>& batch,
                          DgcnnParams& gradients, RunMode mode = RunMode::Eval, Rng* rng = nullptr);

struct AdamState {
    DgcnnParams m, v;
    long step = 0;
};
AdamState make_adam_state(const DgcnnModel& model);
void adam_step(DgcnnModel& model, const DgcnnParams& gradients, AdamState& state);

struct EpochStats {
    int epoch;
    double loss;
    double train_acc;
    double val_acc; // NaN when no validation set
};

struct TrainResult {
    DgcnnModel model;
    std::vector<EpochStats> history;
};

TrainResult train(const std::vector<const Pattern*>& train_set, int n, const DgcnnConfig& config,
                  const std::vector<const Pattern*>& validation_set = {});
TrainResult train(const Dataset& train_set, const DgcnnConfig& config,
                  const Dataset* validation_set = nullptr);

enum class Decision { Feasible, Infeasible };
Decision classify_state(const DgcnnModel& model, const Pattern& pattern, double threshold = 0.5);

void write_model(std::ostream& out, const DgcnnModel& model);
void write_model_file(const std::string& path, const DgcnnModel& model);
DgcnnModel read_model(std::istream& in);
DgcnnModel read_model_file(const std::string& path);

void write_history_csv(std::ostream& out, const std::vector<EpochStats>& history);

} // namespace qot
