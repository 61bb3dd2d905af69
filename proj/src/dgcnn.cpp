#include "qot/dgcnn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace qot {

int DgcnnConfig::total_channels() const {
    int c = 0;
    for (int w : conv_channels) c += w;
    return c;
}

std::string DgcnnConfig::canonical_text() const {
    std::ostringstream os;
    os << "channels";
    for (int c : conv_channels) os << " " << c;
    os << "\nsortpool_k " << sortpool_k << "\nconv1 " << conv1_filters << "\nconv2 "
       << conv2_filters << " " << conv2_kernel << "\npool " << pool_size << " " << pool_stride
       << "\ndense " << dense_width << "\ndropout " << dropout_rate << "\nadam " << learning_rate
       << " " << beta1 << " " << beta2 << " " << epsilon << "\nbatch " << batch_size
       << "\nepochs " << max_epochs << "\npatience " << patience << "\nseed " << seed
       << "\nber_floor " << ber_floor << "\n";
    return os.str();
}

PipelineDims pipeline_dims(const DgcnnConfig& config, int k) {
    PipelineDims d;
    d.C = config.total_channels();
    d.k = k;
    if (k >= config.pool_size) {
        d.pool_kernel = config.pool_size;
        d.pool_len = (k - config.pool_size) / config.pool_stride + 1;
    } else {
        d.pool_kernel = k;
        d.pool_len = 1;
    }
    d.conv2_len = std::max(0, d.pool_len - config.conv2_kernel + 1);
    d.flat_len = d.conv2_len * config.conv2_filters;
    return d;
}

void DgcnnParams::set_zero() {
    for (auto& w : conv_w) w.setZero();
    conv1_w.setZero();
    conv1_b.setZero();
    conv2_w.setZero();
    conv2_b.setZero();
    dense_w.setZero();
    dense_b.setZero();
    out_w.setZero();
    out_b = 0.0;
}

void DgcnnParams::add_scaled(const DgcnnParams& other, double scale) {
    for (size_t t = 0; t < conv_w.size(); ++t) conv_w[t] += scale * other.conv_w[t];
    conv1_w += scale * other.conv1_w;
    conv1_b += scale * other.conv1_b;
    conv2_w += scale * other.conv2_w;
    conv2_b += scale * other.conv2_b;
    dense_w += scale * other.dense_w;
    dense_b += scale * other.dense_b;
    out_w += scale * other.out_w;
    out_b += scale * other.out_b;
}

std::vector<ParamView> param_views(DgcnnParams& p) {
    std::vector<ParamView> views;
    for (size_t t = 0; t < p.conv_w.size(); ++t)
        views.push_back({"conv_w" + std::to_string(t), p.conv_w[t].data(), p.conv_w[t].size()});
    views.push_back({"conv1_w", p.conv1_w.data(), p.conv1_w.size()});
    views.push_back({"conv1_b", p.conv1_b.data(), p.conv1_b.size()});
    views.push_back({"conv2_w", p.conv2_w.data(), p.conv2_w.size()});
    views.push_back({"conv2_b", p.conv2_b.data(), p.conv2_b.size()});
    views.push_back({"dense_w", p.dense_w.data(), p.dense_w.size()});
    views.push_back({"dense_b", p.dense_b.data(), p.dense_b.size()});
    views.push_back({"out_w", p.out_w.data(), p.out_w.size()});
    views.push_back({"out_b", &p.out_b, 1});
    return views;
}

namespace {

DgcnnParams make_params(const DgcnnConfig& config, const PipelineDims& dims) {
    DgcnnParams p;
    int prev = kFeatureCount;
    for (int c : config.conv_channels) {
        p.conv_w.emplace_back(prev, c);
        prev = c;
    }
    p.conv1_w.resize(config.conv1_filters, dims.C);
    p.conv1_b.resize(config.conv1_filters);
    p.conv2_w.resize(config.conv2_filters, config.conv2_kernel * config.conv1_filters);
    p.conv2_b.resize(config.conv2_filters);
    p.dense_w.resize(config.dense_width, dims.flat_len);
    p.dense_b.resize(config.dense_width);
    p.out_w.resize(config.dense_width);
    p.set_zero();
    return p;
}

void glorot_fill(Eigen::Ref<Eigen::MatrixXd> w, int fan_in, int fan_out, Rng& rng) {
    double a = std::sqrt(6.0 / (fan_in + fan_out));
    for (Eigen::Index i = 0; i < w.rows(); ++i)
        for (Eigen::Index j = 0; j < w.cols(); ++j)
            w(i, j) = a * (2.0 * rng.uniform01() - 1.0);
}

} // namespace

DgcnnModel init_model(const DgcnnConfig& config, int n, std::uint64_t seed) {
    if (n < 1) throw ValueError("n must be >= 1");
    if (config.conv_channels.empty()) throw ValueError("conv_channels must be non-empty");
    for (int c : config.conv_channels)
        if (c < 1) throw ValueError("conv channel widths must be positive");
    if (config.sortpool_k > n) throw ValueError("sortpool_k must be <= n");

    DgcnnModel m;
    m.config = config;
    m.n = n;
    m.k = config.sortpool_k > 0 ? config.sortpool_k : std::min(n, 64);
    PipelineDims dims = pipeline_dims(config, m.k);
    m.params = make_params(config, dims);

    Rng rng(seed);
    int prev = kFeatureCount;
    for (size_t t = 0; t < m.params.conv_w.size(); ++t) {
        int c = config.conv_channels[t];
        glorot_fill(m.params.conv_w[t], prev, c, rng);
        prev = c;
    }
    glorot_fill(m.params.conv1_w, dims.C, config.conv1_filters, rng);
    glorot_fill(m.params.conv2_w, config.conv2_kernel * config.conv1_filters, config.conv2_filters, rng);
    if (dims.flat_len > 0) glorot_fill(m.params.dense_w, dims.flat_len, config.dense_width, rng);
    glorot_fill(m.params.out_w, config.dense_width, 1, rng);

    m.feat_min = Eigen::VectorXd::Zero(kFeatureCount);
    m.feat_max = Eigen::VectorXd::Zero(kFeatureCount);
    return m;
}

namespace {

double ber_transform(double v, double floor) {
    return -std::log10(std::max(v, floor)) / 15.0;
}

// Active-row features after the x9 transform and min-max scaling.
Eigen::MatrixXd normalized_features(const DgcnnModel& model, const Pattern& pattern) {
    Eigen::MatrixXd x = pattern.features;
    for (Eigen::Index r = 0; r < x.rows(); ++r)
        x(r, 8) = ber_transform(x(r, 8), model.config.ber_floor);
    for (int c = 0; c < kFeatureCount; ++c) {
        double span = model.feat_max(c) - model.feat_min(c);
        if (span > 0.0)
            x.col(c) = (x.col(c).array() - model.feat_min(c)) / span;
        else
            x.col(c).setZero();
    }
    return x;
}

struct GraphWork {
    std::vector<std::vector<int>> nbr; // per active row
    std::vector<double> inv_deg;       // 1 / (1 + deg)
};

GraphWork build_graph(const Pattern& pattern, int n) {
    int na = pattern.active_count();
    GraphWork g;
    g.nbr.resize(na);
    std::vector<int> pos(n, -1);
    for (int r = 0; r < na; ++r) pos[pattern.active[r] - 1] = r;
    for (const auto& [i, j] : pattern.edges) {
        int pi = pos[i - 1], pj = pos[j - 1];
        g.nbr[pi].push_back(pj);
        g.nbr[pj].push_back(pi);
    }
    g.inv_deg.resize(na);
    for (int r = 0; r < na; ++r) g.inv_deg[r] = 1.0 / (1.0 + g.nbr[r].size());
    return g;
}

// Y = D^-1 (A + I) Z restricted to the active subgraph.
Eigen::MatrixXd propagate(const GraphWork& g, const Eigen::MatrixXd& z) {
    Eigen::MatrixXd y = z;
    for (size_t r = 0; r < g.nbr.size(); ++r) {
        for (int q : g.nbr[r]) y.row(r) += z.row(q);
        y.row(r) *= g.inv_deg[r];
    }
    return y;
}

Eigen::MatrixXd propagate_transpose(const GraphWork& g, const Eigen::MatrixXd& dy) {
    Eigen::MatrixXd dz = Eigen::MatrixXd::Zero(dy.rows(), dy.cols());
    for (size_t r = 0; r < g.nbr.size(); ++r) {
        Eigen::RowVectorXd w = g.inv_deg[r] * dy.row(r);
        dz.row(r) += w;
        for (int q : g.nbr[r]) dz.row(q) += w;
    }
    return dz;
}

} // namespace

std::vector<int> sort_pooling_order(const Eigen::MatrixXd& z_active, const std::vector<int>& active,
                                    int n, int k) {
    if (k < 1) throw ValueError("sortpool k must be >= 1");
    const int C = static_cast<int>(z_active.cols());
    std::vector<int> pos(n, -1);
    for (size_t r = 0; r < active.size(); ++r) pos[active[r] - 1] = static_cast<int>(r);

    auto value = [&](int node, int col) -> double {
        int p = pos[node];
        return p < 0 ? 0.0 : z_active(p, col);
    };
    auto before = [&](int a, int b) {
        for (int col = C - 1; col >= 0; --col) {
            double va = value(a, col), vb = value(b, col);
            if (va != vb) return va > vb;
        }
        return a < b;
    };

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    int keep = std::min(k, n);
    std::partial_sort(order.begin(), order.begin() + keep, order.end(), before);
    order.resize(keep);
    while (static_cast<int>(order.size()) < k) order.push_back(-1); // zero padding
    return order;
}

double forward(const DgcnnModel& model, const Pattern& pattern, RunMode mode, Rng* rng,
               ForwardTrace* trace) {
    if (pattern.active_count() > 0 && pattern.features.cols() != kFeatureCount)
        throw ValueError("pattern feature width mismatch");
    for (int conn : pattern.active)
        if (conn < 1 || conn > model.n) throw ValueError("pattern connection index exceeds model n");

    const DgcnnConfig& cfg = model.config;
    const PipelineDims dims = pipeline_dims(cfg, model.k);
    const int na = pattern.active_count();

    ForwardTrace local;
    ForwardTrace& tr = trace ? *trace : local;

    tr.x_norm = normalized_features(model, pattern);
    GraphWork graph = build_graph(pattern, model.n);

    const size_t T = model.params.conv_w.size();
    tr.conv_y.resize(T);
    tr.conv_z.resize(T);
    const Eigen::MatrixXd* prev = &tr.x_norm;
    for (size_t t = 0; t < T; ++t) {
        tr.conv_y[t] = propagate(graph, *prev);
        tr.conv_z[t] = (tr.conv_y[t] * model.params.conv_w[t]).array().tanh();
        prev = &tr.conv_z[t];
    }

    Eigen::MatrixXd zcat(na, dims.C);
    {
        int col = 0;
        for (size_t t = 0; t < T; ++t) {
            zcat.middleCols(col, tr.conv_z[t].cols()) = tr.conv_z[t];
            col += static_cast<int>(tr.conv_z[t].cols());
        }
    }

    tr.sort_order = sort_pooling_order(zcat, pattern.active, model.n, model.k);
    std::vector<int> pos(model.n, -1);
    for (int r = 0; r < na; ++r) pos[pattern.active[r] - 1] = r;

    tr.pooled_rows = Eigen::MatrixXd::Zero(model.k, dims.C);
    for (int r = 0; r < model.k; ++r) {
        int node = tr.sort_order[r];
        if (node >= 0 && pos[node] >= 0) tr.pooled_rows.row(r) = zcat.row(pos[node]);
    }

    tr.conv1_pre = tr.pooled_rows * model.params.conv1_w.transpose();
    tr.conv1_pre.rowwise() += model.params.conv1_b.transpose();
    tr.conv1_post = tr.conv1_pre.cwiseMax(0.0);

    tr.pool_out.resize(dims.pool_len, cfg.conv1_filters);
    tr.pool_argmax.resize(dims.pool_len, cfg.conv1_filters);
    for (int q = 0; q < dims.pool_len; ++q) {
        int w0 = q * cfg.pool_stride;
        int wlen = std::min(dims.pool_kernel, model.k - w0);
        for (int f = 0; f < cfg.conv1_filters; ++f) {
            int best = w0;
            for (int d = 1; d < wlen; ++d)
                if (tr.conv1_post(w0 + d, f) > tr.conv1_post(best, f)) best = w0 + d;
            tr.pool_out(q, f) = tr.conv1_post(best, f);
            tr.pool_argmax(q, f) = best;
        }
    }

    Eigen::MatrixXd windows(dims.conv2_len, cfg.conv2_kernel * cfg.conv1_filters);
    for (int p = 0; p < dims.conv2_len; ++p)
        for (int d = 0; d < cfg.conv2_kernel; ++d)
            windows.block(p, d * cfg.conv1_filters, 1, cfg.conv1_filters) = tr.pool_out.row(p + d);
    tr.conv2_pre = windows * model.params.conv2_w.transpose();
    if (dims.conv2_len > 0) tr.conv2_pre.rowwise() += model.params.conv2_b.transpose();
    tr.conv2_post = tr.conv2_pre.cwiseMax(0.0);

    Eigen::VectorXd flat(dims.flat_len);
    for (int p = 0; p < dims.conv2_len; ++p)
        for (int f = 0; f < cfg.conv2_filters; ++f)
            flat(p * cfg.conv2_filters + f) = tr.conv2_post(p, f);

    tr.dense_pre = model.params.dense_w * flat + model.params.dense_b;
    tr.dense_post = tr.dense_pre.cwiseMax(0.0);

    tr.dropout_mask = Eigen::VectorXd::Ones(cfg.dense_width);
    if (mode == RunMode::Train && cfg.dropout_rate > 0.0) {
        if (!rng) throw ValueError("train-mode forward needs an rng for dropout");
        double keep = 1.0 - cfg.dropout_rate;
        for (int j = 0; j < cfg.dense_width; ++j)
            tr.dropout_mask(j) = rng->uniform01() < keep ? 1.0 / keep : 0.0;
    }

    Eigen::VectorXd h = tr.dense_post.cwiseProduct(tr.dropout_mask);
    tr.logit = model.params.out_w.dot(h) + model.params.out_b;
    tr.prob = 1.0 / (1.0 + std::exp(-tr.logit));
    return tr.prob;
}

double forward(const DgcnnModel& model, const Pattern& pattern) {
    return forward(model, pattern, RunMode::Eval, nullptr, nullptr);
}

namespace {

constexpr double kProbClamp = 1e-12;

// Reverse pass for one pattern; adds into `grads` with weight `scale`.
void backward(const DgcnnModel& model, const Pattern& pattern, const ForwardTrace& tr, double label,
              DgcnnParams& grads, double scale) {
    const DgcnnConfig& cfg = model.config;
    const PipelineDims dims = pipeline_dims(cfg, model.k);
    const int na = pattern.active_count();

    double pc = std::clamp(tr.prob, kProbClamp, 1.0 - kProbClamp);
    double dprob = (-label / pc + (1.0 - label) / (1.0 - pc)) * scale;
    double dlogit = dprob * tr.prob * (1.0 - tr.prob);

    Eigen::VectorXd h = tr.dense_post.cwiseProduct(tr.dropout_mask);
    grads.out_w += dlogit * h;
    grads.out_b += dlogit;

    Eigen::VectorXd dpost = (dlogit * model.params.out_w).cwiseProduct(tr.dropout_mask);
    Eigen::VectorXd dpre =
        dpost.cwiseProduct((tr.dense_pre.array() > 0.0).cast<double>().matrix());

    Eigen::VectorXd flat(dims.flat_len);
    for (int p = 0; p < dims.conv2_len; ++p)
        for (int f = 0; f < cfg.conv2_filters; ++f)
            flat(p * cfg.conv2_filters + f) = tr.conv2_post(p, f);
    grads.dense_w += dpre * flat.transpose();
    grads.dense_b += dpre;

    Eigen::VectorXd dflat = model.params.dense_w.transpose() * dpre;
    Eigen::MatrixXd dconv2_post(dims.conv2_len, cfg.conv2_filters);
    for (int p = 0; p < dims.conv2_len; ++p)
        for (int f = 0; f < cfg.conv2_filters; ++f)
            dconv2_post(p, f) = dflat(p * cfg.conv2_filters + f);
    Eigen::MatrixXd dconv2_pre =
        dconv2_post.cwiseProduct((tr.conv2_pre.array() > 0.0).cast<double>().matrix());

    Eigen::MatrixXd windows(dims.conv2_len, cfg.conv2_kernel * cfg.conv1_filters);
    for (int p = 0; p < dims.conv2_len; ++p)
        for (int d = 0; d < cfg.conv2_kernel; ++d)
            windows.block(p, d * cfg.conv1_filters, 1, cfg.conv1_filters) = tr.pool_out.row(p + d);
    grads.conv2_w += dconv2_pre.transpose() * windows;
    grads.conv2_b += dconv2_pre.colwise().sum().transpose();

    Eigen::MatrixXd dwindows = dconv2_pre * model.params.conv2_w;
    Eigen::MatrixXd dpool = Eigen::MatrixXd::Zero(dims.pool_len, cfg.conv1_filters);
    for (int p = 0; p < dims.conv2_len; ++p)
        for (int d = 0; d < cfg.conv2_kernel; ++d)
            dpool.row(p + d) += dwindows.block(p, d * cfg.conv1_filters, 1, cfg.conv1_filters);

    Eigen::MatrixXd dconv1_post = Eigen::MatrixXd::Zero(model.k, cfg.conv1_filters);
    for (int q = 0; q < dims.pool_len; ++q)
        for (int f = 0; f < cfg.conv1_filters; ++f)
            dconv1_post(tr.pool_argmax(q, f), f) += dpool(q, f);
    Eigen::MatrixXd dconv1_pre =
        dconv1_post.cwiseProduct((tr.conv1_pre.array() > 0.0).cast<double>().matrix());

    grads.conv1_w += dconv1_pre.transpose() * tr.pooled_rows;
    grads.conv1_b += dconv1_pre.colwise().sum().transpose();

    Eigen::MatrixXd ds = dconv1_pre * model.params.conv1_w; // k x C
    std::vector<int> pos(model.n, -1);
    for (int r = 0; r < na; ++r) pos[pattern.active[r] - 1] = r;
    Eigen::MatrixXd dzcat = Eigen::MatrixXd::Zero(na, dims.C);
    for (int r = 0; r < model.k; ++r) {
        int node = tr.sort_order[r];
        if (node >= 0 && pos[node] >= 0) dzcat.row(pos[node]) += ds.row(r);
    }

    GraphWork graph = build_graph(pattern, model.n);
    const size_t T = model.params.conv_w.size();
    std::vector<Eigen::MatrixXd> dz(T);
    {
        int col = 0;
        for (size_t t = 0; t < T; ++t) {
            int w = static_cast<int>(model.params.conv_w[t].cols());
            dz[t] = dzcat.middleCols(col, w);
            col += w;
        }
    }
    for (size_t t = T; t-- > 0;) {
        Eigen::MatrixXd du =
            dz[t].cwiseProduct((1.0 - tr.conv_z[t].array().square()).matrix());
        grads.conv_w[t] += tr.conv_y[t].transpose() * du;
        if (t > 0) {
            Eigen::MatrixXd dy = du * model.params.conv_w[t].transpose();
            dz[t - 1] += propagate_transpose(graph, dy);
        }
    }
}

} // namespace

double loss_and_gradients(const DgcnnModel& model, const std::vector<const Pattern*>& batch,
                          DgcnnParams& gradients, RunMode mode, Rng* rng) {
    if (batch.empty()) throw ValueError("batch must be non-empty");
    gradients.set_zero();
    double loss = 0.0;
    const double scale = 1.0 / batch.size();
    ForwardTrace tr;
    for (const Pattern* p : batch) {
        double prob = forward(model, *p, mode, rng, &tr);
        double pc = std::clamp(prob, kProbClamp, 1.0 - kProbClamp);
        double y = p->label;
        loss -= scale * (y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc));
        backward(model, *p, tr, y, gradients, scale);
    }
    return loss;
}

AdamState make_adam_state(const DgcnnModel& model) {
    AdamState st;
    st.m = model.params;
    st.v = model.params;
    st.m.set_zero();
    st.v.set_zero();
    return st;
}

void adam_step(DgcnnModel& model, const DgcnnParams& grads, AdamState& state) {
    const DgcnnConfig& cfg = model.config;
    state.step += 1;
    double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));

    DgcnnParams& g = const_cast<DgcnnParams&>(grads);
    auto gv = param_views(g);
    auto mv = param_views(state.m);
    auto vv = param_views(state.v);
    auto pv = param_views(model.params);
    for (size_t i = 0; i < pv.size(); ++i) {
        for (std::ptrdiff_t j = 0; j < pv[i].size; ++j) {
            double grad = gv[i].data[j];
            double& m = mv[i].data[j];
            double& v = vv[i].data[j];
            m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
            v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad * grad;
            double mhat = m / bc1;
            double vhat = v / bc2;
            pv[i].data[j] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
        }
    }
}

void fit_normalization(DgcnnModel& model, const std::vector<const Pattern*>& patterns) {
    Eigen::VectorXd lo = Eigen::VectorXd::Constant(kFeatureCount, std::numeric_limits<double>::infinity());
    Eigen::VectorXd hi = Eigen::VectorXd::Constant(kFeatureCount, -std::numeric_limits<double>::infinity());
    bool any = false;
    for (const Pattern* p : patterns) {
        for (int r = 0; r < p->active_count(); ++r) {
            any = true;
            for (int c = 0; c < kFeatureCount; ++c) {
                double v = p->features(r, c);
                if (c == 8) v = ber_transform(v, model.config.ber_floor);
                lo(c) = std::min(lo(c), v);
                hi(c) = std::max(hi(c), v);
            }
        }
    }
    if (!any) {
        lo.setZero();
        hi.setZero();
    }
    model.feat_min = lo;
    model.feat_max = hi;
}

namespace {

double accuracy_at_half(const DgcnnModel& model, const std::vector<const Pattern*>& patterns) {
    if (patterns.empty()) return std::numeric_limits<double>::quiet_NaN();
    int correct = 0;
    for (const Pattern* p : patterns) {
        double s = forward(model, *p);
        int pred = s >= 0.5 ? 1 : 0;
        if (pred == p->label) ++correct;
    }
    return static_cast<double>(correct) / patterns.size();
}

} // namespace

TrainResult train(const std::vector<const Pattern*>& train_set, int n, const DgcnnConfig& config,
                  const std::vector<const Pattern*>& validation_set) {
    if (train_set.empty()) throw ValueError("training set must be non-empty");

    DgcnnModel model = init_model(config, n, config.seed);
    fit_normalization(model, train_set);
    AdamState adam = make_adam_state(model);
    DgcnnParams grads = model.params;

    Rng shuffle_rng(config.seed ^ 0x5bf0a8b1u);
    Rng dropout_rng(config.seed ^ 0x94d049bbu);

    TrainResult result;
    result.model = model;
    const bool has_val = !validation_set.empty();
    double best_metric = -std::numeric_limits<double>::infinity();
    double best_loss = std::numeric_limits<double>::infinity();
    int since_improved = 0;

    std::vector<int> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.below(i)]);

        double epoch_loss = 0.0;
        size_t seen = 0;
        for (size_t off = 0; off < order.size(); off += config.batch_size) {
            size_t end = std::min(off + config.batch_size, order.size());
            std::vector<const Pattern*> batch;
            batch.reserve(end - off);
            for (size_t i = off; i < end; ++i) batch.push_back(train_set[order[i]]);
            double loss = loss_and_gradients(model, batch, grads, RunMode::Train, &dropout_rng);
            adam_step(model, grads, adam);
            epoch_loss += loss * batch.size();
            seen += batch.size();
        }
        epoch_loss /= seen;

        EpochStats st;
        st.epoch = epoch;
        st.loss = epoch_loss;
        st.train_acc = accuracy_at_half(model, train_set);
        st.val_acc = has_val ? accuracy_at_half(model, validation_set)
                             : std::numeric_limits<double>::quiet_NaN();
        result.history.push_back(st);

        if (has_val) {
            if (st.val_acc > best_metric) {
                best_metric = st.val_acc;
                result.model = model;
                since_improved = 0;
            } else {
                ++since_improved;
            }
        } else {
            if (epoch_loss < best_loss - 1e-6) {
                best_loss = epoch_loss;
                since_improved = 0;
            } else {
                ++since_improved;
            }
            result.model = model;
        }
        if (config.patience > 0 && since_improved >= config.patience) break;
    }
    if (!has_val) result.model = model;
    return result;
}

TrainResult train(const Dataset& train_set, const DgcnnConfig& config, const Dataset* validation_set) {
    std::vector<const Pattern*> tr, va;
    for (const auto& p : train_set.patterns) tr.push_back(&p);
    if (validation_set)
        for (const auto& p : validation_set->patterns) va.push_back(&p);
    return train(tr, train_set.n, config, va);
}

Decision classify_state(const DgcnnModel& model, const Pattern& pattern, double threshold) {
    return forward(model, pattern) >= threshold ? Decision::Feasible : Decision::Infeasible;
}

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

void write_model(std::ostream& out, const DgcnnModel& model) {
    out << "qot-dgcnn-model v1\n";
    out << "n " << model.n << "\n";
    out << "k " << model.k << "\n";
    const DgcnnConfig& c = model.config;
    out << "channels " << c.conv_channels.size();
    for (int w : c.conv_channels) out << " " << w;
    out << "\n";
    out << "conv1 " << c.conv1_filters << "\n";
    out << "conv2 " << c.conv2_filters << " " << c.conv2_kernel << "\n";
    out << "pool " << c.pool_size << " " << c.pool_stride << "\n";
    out << "dense " << c.dense_width << "\n";
    out << "dropout " << fmt17(c.dropout_rate) << "\n";
    out << "ber_floor " << fmt17(c.ber_floor) << "\n";
    out << "feat_min";
    for (int i = 0; i < kFeatureCount; ++i) out << " " << fmt17(model.feat_min(i));
    out << "\nfeat_max";
    for (int i = 0; i < kFeatureCount; ++i) out << " " << fmt17(model.feat_max(i));
    out << "\n";
    auto views = param_views(const_cast<DgcnnModel&>(model).params);
    for (const auto& v : views) {
        out << "param " << v.name << " " << v.size << "\n";
        for (std::ptrdiff_t i = 0; i < v.size; ++i)
            out << fmt17(v.data[i]) << (i + 1 == v.size ? "\n" : " ");
        if (v.size == 0) out << "\n";
    }
}

void write_model_file(const std::string& path, const DgcnnModel& model) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open '" + path + "' for writing");
    write_model(out, model);
}

DgcnnModel read_model(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "qot-dgcnn-model v1")
        throw ParseError("expected header 'qot-dgcnn-model v1'");

    DgcnnConfig cfg;
    int n = 0, k = 0;
    Eigen::VectorXd fmin(kFeatureCount), fmax(kFeatureCount);
    auto next = [&](const char* what) -> std::istringstream {
        if (!std::getline(in, line)) throw ParseError(std::string("model file truncated before ") + what);
        return std::istringstream(line);
    };
    std::string key;
    {
        auto ls = next("n");
        if (!(ls >> key >> n) || key != "n") throw ParseError("expected 'n <int>'");
    }
    {
        auto ls = next("k");
        if (!(ls >> key >> k) || key != "k") throw ParseError("expected 'k <int>'");
    }
    {
        auto ls = next("channels");
        size_t t;
        if (!(ls >> key >> t) || key != "channels") throw ParseError("expected 'channels <count> ...'");
        cfg.conv_channels.resize(t);
        for (auto& w : cfg.conv_channels)
            if (!(ls >> w)) throw ParseError("channels line too short");
    }
    {
        auto ls = next("conv1");
        if (!(ls >> key >> cfg.conv1_filters) || key != "conv1") throw ParseError("expected 'conv1'");
    }
    {
        auto ls = next("conv2");
        if (!(ls >> key >> cfg.conv2_filters >> cfg.conv2_kernel) || key != "conv2")
            throw ParseError("expected 'conv2'");
    }
    {
        auto ls = next("pool");
        if (!(ls >> key >> cfg.pool_size >> cfg.pool_stride) || key != "pool")
            throw ParseError("expected 'pool'");
    }
    {
        auto ls = next("dense");
        if (!(ls >> key >> cfg.dense_width) || key != "dense") throw ParseError("expected 'dense'");
    }
    {
        auto ls = next("dropout");
        if (!(ls >> key >> cfg.dropout_rate) || key != "dropout") throw ParseError("expected 'dropout'");
    }
    {
        auto ls = next("ber_floor");
        if (!(ls >> key >> cfg.ber_floor) || key != "ber_floor") throw ParseError("expected 'ber_floor'");
    }
    {
        auto ls = next("feat_min");
        if (!(ls >> key) || key != "feat_min") throw ParseError("expected 'feat_min'");
        for (int i = 0; i < kFeatureCount; ++i)
            if (!(ls >> fmin(i))) throw ParseError("feat_min needs 9 values");
    }
    {
        auto ls = next("feat_max");
        if (!(ls >> key) || key != "feat_max") throw ParseError("expected 'feat_max'");
        for (int i = 0; i < kFeatureCount; ++i)
            if (!(ls >> fmax(i))) throw ParseError("feat_max needs 9 values");
    }

    cfg.sortpool_k = k;
    DgcnnModel model = init_model(cfg, n, 0);
    model.feat_min = fmin;
    model.feat_max = fmax;

    auto views = param_views(model.params);
    for (const auto& v : views) {
        auto ls = next("param block");
        std::string name;
        std::ptrdiff_t size;
        if (!(ls >> key >> name >> size) || key != "param")
            throw ParseError("expected 'param <name> <size>'");
        if (name != v.name || size != v.size)
            throw ParseError("param block mismatch: got '" + name + "' (" + std::to_string(size) +
                             "), expected '" + v.name + "' (" + std::to_string(v.size) + ")");
        auto vs = next("param values");
        for (std::ptrdiff_t i = 0; i < size; ++i)
            if (!(vs >> v.data[i])) throw ParseError("param block '" + name + "' too short");
    }
    return model;
}

DgcnnModel read_model_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open model file '" + path + "'");
    return read_model(in);
}

void write_history_csv(std::ostream& out, const std::vector<EpochStats>& history) {
    out << "epoch,loss,train_acc,val_acc\n";
    for (const auto& h : history) {
        out << h.epoch << "," << h.loss << "," << h.train_acc << ",";
        if (std::isnan(h.val_acc)) out << "";
        else out << h.val_acc;
        out << "\n";
    }
}

} // namespace qot
