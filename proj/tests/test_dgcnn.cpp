#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "qot/dgcnn.hpp"

using namespace qot;

namespace {

DgcnnConfig tiny_config() {
    DgcnnConfig cfg;
    cfg.conv_channels = {4, 2};
    cfg.sortpool_k = 4;
    cfg.conv1_filters = 3;
    cfg.conv2_filters = 2;
    cfg.conv2_kernel = 2;
    cfg.pool_size = 2;
    cfg.pool_stride = 2;
    cfg.dense_width = 5;
    cfg.dropout_rate = 0.0;
    cfg.seed = 3;
    return cfg;
}

Pattern random_pattern(Rng& rng, int n, int label) {
    Pattern p;
    p.label = label;
    int na = 2 + static_cast<int>(rng.below(n - 1));
    std::vector<int> pool(n);
    std::iota(pool.begin(), pool.end(), 1);
    for (int i = 0; i < na; ++i) std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
    p.active.assign(pool.begin(), pool.begin() + na);
    std::sort(p.active.begin(), p.active.end());
    p.features.resize(na, kFeatureCount);
    for (int r = 0; r < na; ++r) {
        p.features(r, 0) = 100.0 + 900.0 * rng.uniform01();
        p.features(r, 1) = 50.0 + 350.0 * rng.uniform01();
        p.features(r, 2) = 1.0 + 15.0 * rng.uniform01();
        p.features(r, 3) = 1.0 + rng.below(8);
        p.features(r, 4) = 1.0 + rng.below(7);
        p.features(r, 5) = 1.0 + rng.below(4);
        p.features(r, 6) = 1.0 + rng.below(12);
        p.features(r, 7) = 1.0 + rng.below(4);
        p.features(r, 8) = std::pow(10.0, -1.0 - 10.0 * rng.uniform01());
    }
    for (int a = 0; a < na; ++a)
        for (int b = a + 1; b < na; ++b)
            if (rng.uniform01() < 0.4) p.edges.push_back({p.active[a], p.active[b]});
    return p;
}

std::vector<const Pattern*> ptrs(const std::vector<Pattern>& v) {
    std::vector<const Pattern*> out;
    for (const auto& p : v) out.push_back(&p);
    return out;
}

} // namespace

TEST_CASE("pipeline dims for the default and degenerate shapes") {
    DgcnnConfig cfg;
    CHECK(cfg.total_channels() == 97);
    auto d = pipeline_dims(cfg, 64);
    CHECK(d.C == 97);
    CHECK(d.k == 64);
    CHECK(d.pool_len == 32);
    CHECK(d.conv2_len == 28);
    CHECK(d.flat_len == 28 * 32);

    auto tiny = pipeline_dims(cfg, 1);
    CHECK(tiny.pool_kernel == 1);
    CHECK(tiny.pool_len == 1);
    CHECK(tiny.conv2_len == 0);
    CHECK(tiny.flat_len == 0);
}

TEST_CASE("init_model shapes, bounds, determinism") {
    DgcnnConfig cfg = tiny_config();
    DgcnnModel m = init_model(cfg, 6, 11);
    REQUIRE(m.params.conv_w.size() == 2);
    CHECK(m.params.conv_w[0].rows() == 9);
    CHECK(m.params.conv_w[0].cols() == 4);
    CHECK(m.params.conv_w[1].rows() == 4);
    CHECK(m.params.conv_w[1].cols() == 2);
    CHECK(m.params.conv1_w.rows() == 3);
    CHECK(m.params.conv1_w.cols() == 6);
    CHECK(m.params.conv2_w.cols() == 2 * 3);
    CHECK(m.k == 4);
    CHECK(m.params.conv1_b.isZero());
    CHECK(m.params.dense_b.isZero());
    CHECK(m.params.out_b == 0.0);

    double bound0 = std::sqrt(6.0 / (9 + 4));
    CHECK(m.params.conv_w[0].cwiseAbs().maxCoeff() <= bound0);
    CHECK(m.params.conv_w[0].cwiseAbs().maxCoeff() > 0.0);

    DgcnnModel m2 = init_model(cfg, 6, 11);
    CHECK(m.params.conv_w[0] == m2.params.conv_w[0]);
    CHECK(m.params.dense_w == m2.params.dense_w);
    DgcnnModel m3 = init_model(cfg, 6, 12);
    CHECK(m.params.conv_w[0] != m3.params.conv_w[0]);
}

TEST_CASE("fit_normalization computes min-max over active rows") {
    DgcnnModel m = init_model(tiny_config(), 6, 1);
    Rng rng(5);
    std::vector<Pattern> pats = {random_pattern(rng, 6, 1), random_pattern(rng, 6, 0)};
    fit_normalization(m, ptrs(pats));
    for (int c = 0; c < kFeatureCount; ++c) {
        double lo = 1e300, hi = -1e300;
        for (const auto& p : pats)
            for (int r = 0; r < p.active_count(); ++r) {
                double v = p.features(r, c);
                if (c == 8) v = -std::log10(std::max(v, m.config.ber_floor)) / 15.0;
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        CHECK(m.feat_min(c) == doctest::Approx(lo));
        CHECK(m.feat_max(c) == doctest::Approx(hi));
    }
}

TEST_CASE("finite differences confirm every parameter gradient") {
    DgcnnConfig cfg = tiny_config();
    const int n = 6;
    DgcnnModel model = init_model(cfg, n, 7);
    Rng rng(13);
    // jitter every parameter off zero so no preactivation sits on a relu kink
    for (auto& view : param_views(model.params))
        for (std::ptrdiff_t i = 0; i < view.size; ++i)
            view.data[i] += 0.3 * (rng.uniform01() - 0.5);
    std::vector<Pattern> pats;
    for (int i = 0; i < 4; ++i) pats.push_back(random_pattern(rng, n, i % 2));
    auto batch = ptrs(pats);
    fit_normalization(model, batch);

    DgcnnParams grads = model.params;
    grads.set_zero();
    loss_and_gradients(model, batch, grads);

    auto views = param_views(model.params);
    auto gviews = param_views(grads);
    REQUIRE(views.size() == gviews.size());
    const double step = 1e-5;
    for (size_t v = 0; v < views.size(); ++v) {
        CAPTURE(views[v].name);
        for (std::ptrdiff_t i = 0; i < views[v].size; ++i) {
            double saved = views[v].data[i];
            DgcnnParams scratch = model.params;
            scratch.set_zero();
            views[v].data[i] = saved + step;
            double up = loss_and_gradients(model, batch, scratch);
            scratch.set_zero();
            views[v].data[i] = saved - step;
            double down = loss_and_gradients(model, batch, scratch);
            views[v].data[i] = saved;
            double fd = (up - down) / (2.0 * step);
            double a = gviews[v].data[i];
            double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-6});
            CHECK(rel <= 1e-4);
        }
    }
}

TEST_CASE("sort pooling order matches a brute-force comparator") {
    Rng rng(31);
    for (int trial = 0; trial < 60; ++trial) {
        int n = 3 + static_cast<int>(rng.below(6));
        int na = 1 + static_cast<int>(rng.below(n));
        int C = 1 + static_cast<int>(rng.below(3));
        int k = 1 + static_cast<int>(rng.below(n + 3));
        std::vector<int> pool(n);
        std::iota(pool.begin(), pool.end(), 1);
        for (int i = 0; i < na; ++i) std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
        std::vector<int> active(pool.begin(), pool.begin() + na);
        std::sort(active.begin(), active.end());
        Eigen::MatrixXd z(na, C);
        for (int r = 0; r < na; ++r)
            for (int c = 0; c < C; ++c)
                z(r, c) = static_cast<double>(rng.below(3)) - 1.0; // small ints force ties

        // brute force over the dense n x C matrix with zero rows for inactive
        Eigen::MatrixXd full = Eigen::MatrixXd::Zero(n, C);
        for (int r = 0; r < na; ++r) full.row(active[r] - 1) = z.row(r);
        std::vector<int> want(n);
        std::iota(want.begin(), want.end(), 0);
        std::stable_sort(want.begin(), want.end(), [&](int a, int b) {
            for (int c = C - 1; c >= 0; --c)
                if (full(a, c) != full(b, c)) return full(a, c) > full(b, c);
            return a < b;
        });
        want.resize(std::min(k, n));
        while (static_cast<int>(want.size()) < k) want.push_back(-1);

        CHECK(sort_pooling_order(z, active, n, k) == want);
    }
}

TEST_CASE("forward score is invariant under consistent relabeling") {
    const int n = 9;
    DgcnnConfig cfg = tiny_config();
    DgcnnModel model = init_model(cfg, n, 21);
    Rng rng(77);
    std::vector<Pattern> pats;
    for (int i = 0; i < 10; ++i) pats.push_back(random_pattern(rng, n, i % 2));
    fit_normalization(model, ptrs(pats));

    for (const auto& p : pats) {
        double base = forward(model, p);
        CHECK(base > 0.0);
        CHECK(base < 1.0);
        for (int rep = 0; rep < 10; ++rep) {
            std::vector<int> perm(n);
            std::iota(perm.begin(), perm.end(), 1);
            for (int i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);

            Pattern q;
            q.label = p.label;
            std::vector<std::pair<int, int>> relabeled; // (new index, old row)
            for (int r = 0; r < p.active_count(); ++r)
                relabeled.push_back({perm[p.active[r] - 1], r});
            std::sort(relabeled.begin(), relabeled.end());
            q.features.resize(p.active_count(), kFeatureCount);
            for (size_t r = 0; r < relabeled.size(); ++r) {
                q.active.push_back(relabeled[r].first);
                q.features.row(r) = p.features.row(relabeled[r].second);
            }
            for (auto [i, j] : p.edges) {
                int a = perm[i - 1], b = perm[j - 1];
                q.edges.push_back({std::min(a, b), std::max(a, b)});
            }
            std::sort(q.edges.begin(), q.edges.end());

            CHECK(forward(model, q) == doctest::Approx(base).epsilon(1e-6));
        }
    }
}

TEST_CASE("single-connection graph runs through the degenerate pipeline") {
    DgcnnConfig cfg = tiny_config();
    cfg.sortpool_k = 0; // auto: min(n, 64)
    DgcnnModel model = init_model(cfg, 1, 9);
    CHECK(model.k == 1);
    Pattern p;
    p.label = 1;
    p.active = {1};
    p.features.resize(1, kFeatureCount);
    p.features << 100, 100, 1, 1, 1, 4, 2, 1, 1e-6;
    fit_normalization(model, {&p});
    double s = forward(model, p);
    CHECK(s > 0.0);
    CHECK(s < 1.0);
    DgcnnParams g = model.params;
    g.set_zero();
    double loss = loss_and_gradients(model, {&p}, g);
    CHECK(std::isfinite(loss));
}

TEST_CASE("adam takes the bias-corrected signed step") {
    DgcnnConfig cfg = tiny_config();
    cfg.learning_rate = 1e-3;
    DgcnnModel model = init_model(cfg, 6, 2);
    AdamState state = make_adam_state(model);
    CHECK(state.step == 0);

    DgcnnParams before = model.params;
    DgcnnParams grads = model.params;
    grads.set_zero();
    adam_step(model, grads, state);
    CHECK(state.step == 1);
    auto va = param_views(model.params);
    auto vb = param_views(before);
    for (size_t v = 0; v < va.size(); ++v)
        for (std::ptrdiff_t i = 0; i < va[v].size; ++i)
            CHECK(va[v].data[i] == vb[v].data[i]); // zero gradient moves nothing

    // one nonzero component: the first step is lr * sign(g) up to epsilon
    DgcnnModel fresh = init_model(cfg, 6, 2);
    AdamState fstate = make_adam_state(fresh);
    DgcnnParams fbefore = fresh.params;
    auto gv = param_views(grads);
    size_t target = 0;
    while (gv[target].name != "conv1_b") ++target;
    gv[target].data[0] = 0.5;
    adam_step(fresh, grads, fstate);
    double moved = param_views(fresh.params)[target].data[0] - param_views(fbefore)[target].data[0];
    CHECK(moved == doctest::Approx(-cfg.learning_rate).epsilon(1e-6));
    // untouched components stay put on the first step
    auto vf = param_views(fresh.params);
    auto vo = param_views(fbefore);
    CHECK(vf[target].data[1] == vo[target].data[1]);
    CHECK(vf[0].data[0] == vo[0].data[0]);
}

TEST_CASE("duplicating a pattern in the batch keeps loss and gradients") {
    DgcnnConfig cfg = tiny_config();
    DgcnnModel model = init_model(cfg, 6, 4);
    Rng rng(61);
    Pattern p = random_pattern(rng, 6, 1);
    fit_normalization(model, {&p});

    DgcnnParams g1 = model.params, g2 = model.params;
    g1.set_zero();
    g2.set_zero();
    double l1 = loss_and_gradients(model, {&p}, g1);
    double l2 = loss_and_gradients(model, {&p, &p}, g2);
    CHECK(l1 == doctest::Approx(l2).epsilon(1e-12));
    auto u = param_views(g1), w = param_views(g2);
    for (size_t v = 0; v < u.size(); ++v)
        for (std::ptrdiff_t i = 0; i < u[v].size; ++i)
            CHECK(u[v].data[i] == doctest::Approx(w[v].data[i]).epsilon(1e-10));
}

TEST_CASE("training separates a toy feature-threshold task") {
    const int n = 6;
    Rng rng(19);
    std::vector<Pattern> pats;
    for (int i = 0; i < 120; ++i) {
        int label = i % 2;
        Pattern p = random_pattern(rng, n, label);
        for (int r = 0; r < p.active_count(); ++r)
            p.features(r, 0) = label ? 100.0 + 200.0 * rng.uniform01()
                                     : 700.0 + 200.0 * rng.uniform01();
        pats.push_back(std::move(p));
    }
    DgcnnConfig cfg = tiny_config();
    cfg.conv_channels = {8, 4};
    cfg.sortpool_k = 5;
    cfg.conv1_filters = 8;
    cfg.conv2_filters = 8;
    cfg.dense_width = 32;
    cfg.learning_rate = 1e-2;
    cfg.batch_size = 20;
    cfg.max_epochs = 100;
    cfg.patience = 100;
    auto result = train(ptrs(pats), n, cfg);
    REQUIRE(!result.history.empty());
    int correct = 0;
    for (const auto& p : pats) {
        double s = forward(result.model, p);
        correct += (s >= 0.5 ? 1 : 0) == p.label;
    }
    CHECK(correct >= 114); // >= 0.95
    CHECK(result.history.back().train_acc >= 0.95);
}

TEST_CASE("classify_state follows the threshold with ties feasible") {
    DgcnnModel model = init_model(tiny_config(), 6, 8);
    Rng rng(3);
    Pattern p = random_pattern(rng, 6, 1);
    fit_normalization(model, {&p});
    double s = forward(model, p);
    CHECK(classify_state(model, p, 0.0) == Decision::Feasible);
    CHECK(classify_state(model, p, 1.0) == Decision::Infeasible);
    CHECK(classify_state(model, p, s) == Decision::Feasible); // tie -> class 1
    CHECK(classify_state(model, p) == (s >= 0.5 ? Decision::Feasible : Decision::Infeasible));
}

TEST_CASE("model file round trip preserves scores exactly") {
    DgcnnModel model = init_model(tiny_config(), 6, 14);
    Rng rng(23);
    std::vector<Pattern> pats;
    for (int i = 0; i < 5; ++i) pats.push_back(random_pattern(rng, 6, i % 2));
    fit_normalization(model, ptrs(pats));

    std::stringstream ss;
    write_model(ss, model);
    DgcnnModel back = read_model(ss);
    CHECK(back.n == model.n);
    CHECK(back.k == model.k);
    CHECK(back.feat_min == model.feat_min);
    for (const auto& p : pats) CHECK(forward(back, p) == forward(model, p));

    std::istringstream junk("qot-dgcnn-model v9\n");
    CHECK_THROWS_AS(read_model(junk), ParseError);
}

TEST_CASE("train records history and early-stops on validation") {
    const int n = 6;
    Rng rng(47);
    std::vector<Pattern> trn, val;
    for (int i = 0; i < 40; ++i) trn.push_back(random_pattern(rng, n, i % 2));
    for (int i = 0; i < 10; ++i) val.push_back(random_pattern(rng, n, i % 2));
    DgcnnConfig cfg = tiny_config();
    cfg.max_epochs = 12;
    cfg.patience = 3;
    auto result = train(ptrs(trn), n, cfg, ptrs(val));
    REQUIRE(!result.history.empty());
    CHECK(result.history.size() <= 12);
    for (size_t e = 0; e < result.history.size(); ++e) {
        CHECK(result.history[e].epoch == static_cast<int>(e) + 1);
        CHECK(std::isfinite(result.history[e].loss));
        CHECK(!std::isnan(result.history[e].val_acc));
    }

    std::ostringstream csv;
    write_history_csv(csv, result.history);
    CHECK(csv.str().find("epoch,loss,train_acc,val_acc") == 0);
}
