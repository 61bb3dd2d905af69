#include "qot/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

namespace qot {

std::vector<int> Dataset::label_counts() const {
    std::vector<int> counts(2, 0);
    for (const auto& p : patterns) counts[p.label] += 1;
    return counts;
}

Pattern extract_pattern(const NetworkState& state, int candidate_connection,
                        const QotReport& prev_report, const QotReport& report) {
    Pattern pat;
    pat.label = report.label;

    for (const auto& [conn, rec] : state.lightpaths()) pat.active.push_back(conn);
    // map ordering keeps active sorted

    pat.features.resize(pat.active_count(), kFeatureCount);
    for (int k = 0; k < pat.active_count(); ++k) {
        int conn = pat.active[k];
        const LightpathRecord& rec = state.lightpath(conn);
        pat.features(k, 0) = rec.length_km;
        pat.features(k, 1) = rec.max_link_km;
        pat.features(k, 2) = rec.start_slot + (rec.slot_count - 1) / 2.0;
        pat.features(k, 3) = rec.slot_count;
        pat.features(k, 4) = rec.core;
        pat.features(k, 5) = static_cast<double>(rec.modulation);
        pat.features(k, 6) = rec.edfa_count;
        pat.features(k, 7) = rec.link_count;
        pat.features(k, 8) = conn == candidate_connection ? 0.0 : prev_report.ber_of(conn);
    }

    // link-sharing adjacency from the per-link owner lists
    std::map<int, std::vector<int>> by_link;
    for (const auto& [conn, rec] : state.lightpaths())
        for (int li : rec.route_links) by_link[li].push_back(conn);
    std::set<std::pair<int, int>> edges;
    for (auto& [li, owners] : by_link) {
        std::sort(owners.begin(), owners.end());
        for (size_t a = 0; a < owners.size(); ++a)
            for (size_t b = a + 1; b < owners.size(); ++b)
                edges.insert({owners[a], owners[b]});
    }
    pat.edges.assign(edges.begin(), edges.end());
    return pat;
}

GenerationResult run_generation(const Topology& topology, const TrafficConfig& traffic,
                                const OracleConfig& oracle, const RscaConfig& rsca) {
    auto events = generate_events(traffic, topology);

    GenerationResult out;
    out.dataset.n = topology.connection_count();
    out.dataset.topology_fingerprint = topology.fingerprint();
    out.dataset.config_fingerprint =
        fingerprint_hex(fnv1a(traffic.canonical_text() + oracle.canonical_text() + rsca.canonical_text()));

    NetworkState state(topology, rsca);
    Rng resample_rng(traffic.seed ^ 0x9e3779b97f4a7c15ull);
    std::unordered_map<int, int> established; // request id -> connection index

    QotReport prev_report; // evaluation of the current state, lazily refreshed
    bool prev_dirty = false;

    for (const auto& ev : events) {
        if (ev.kind == EventKind::Departure) {
            auto it = established.find(ev.request_id);
            if (it != established.end()) {
                state.release(it->second);
                established.erase(it);
                prev_dirty = true;
            }
            continue;
        }
        ++out.arrivals;

        Event req = ev;
        int conn = topology.connection_index(req.src, req.dst);
        bool found = true;
        for (int tries = 0; state.is_active(conn); ++tries) {
            if (tries >= 2000) { found = false; break; }
            conn = static_cast<int>(resample_rng.below(topology.connection_count())) + 1;
        }
        if (!found) { ++out.blocked; continue; }
        auto [u, v] = topology.connection_pair(conn);
        req.src = u;
        req.dst = v;

        auto result = state.allocate(req);
        if (std::holds_alternative<Blocked>(result)) { ++out.blocked; continue; }
        const auto& rec = std::get<LightpathRecord>(result);

        if (prev_dirty) {
            prev_report = evaluate_state(state, oracle);
            prev_dirty = false;
        }
        state.commit(rec);
        QotReport report = evaluate_state(state, oracle);

        Pattern pat = extract_pattern(state, conn, prev_report, report);
        pat.request_id = ev.request_id;
        out.dataset.patterns.push_back(std::move(pat));

        if (report.label == 1) {
            established[ev.request_id] = conn;
            prev_report = std::move(report); // state stays, report stays valid
        } else {
            ++out.rejected_qot;
            state.release(conn);
        }
    }
    out.admitted = static_cast<long>(out.dataset.patterns.size()) - out.rejected_qot;
    return out;
}

Dataset balance(const Dataset& dataset, int per_class, std::uint64_t seed) {
    if (per_class < 1) throw ValueError("per_class must be >= 1");
    std::vector<int> idx0, idx1;
    for (int i = 0; i < static_cast<int>(dataset.patterns.size()); ++i)
        (dataset.patterns[i].label == 1 ? idx1 : idx0).push_back(i);
    if (static_cast<int>(idx0.size()) < per_class || static_cast<int>(idx1.size()) < per_class)
        throw ValueError("balance: need " + std::to_string(per_class) +
                         " patterns per class, have y=0: " + std::to_string(idx0.size()) +
                         ", y=1: " + std::to_string(idx1.size()));

    Rng rng(seed);
    auto shuffle = [&](std::vector<int>& v) {
        for (size_t i = v.size(); i > 1; --i)
            std::swap(v[i - 1], v[rng.below(i)]);
    };
    shuffle(idx0);
    shuffle(idx1);
    std::vector<int> keep(idx0.begin(), idx0.begin() + per_class);
    keep.insert(keep.end(), idx1.begin(), idx1.begin() + per_class);
    shuffle(keep);

    Dataset out;
    out.n = dataset.n;
    out.c = dataset.c;
    out.topology_fingerprint = dataset.topology_fingerprint;
    out.config_fingerprint = dataset.config_fingerprint;
    out.patterns.reserve(keep.size());
    for (int i : keep) out.patterns.push_back(dataset.patterns[i]);
    return out;
}

std::vector<Fold> split_folds(const Dataset& dataset, int folds, std::uint64_t seed) {
    if (folds < 2) throw ValueError("folds must be >= 2");
    int total = static_cast<int>(dataset.patterns.size());
    if (total == 0 || total % folds != 0)
        throw ValueError("dataset size " + std::to_string(total) + " not divisible by " +
                         std::to_string(folds) + " folds");
    std::vector<int> idx0, idx1;
    for (int i = 0; i < total; ++i)
        (dataset.patterns[i].label == 1 ? idx1 : idx0).push_back(i);
    if (idx0.size() % folds != 0 || idx1.size() % folds != 0)
        throw ValueError("per-class counts (" + std::to_string(idx0.size()) + ", " +
                         std::to_string(idx1.size()) + ") not divisible by folds");

    Rng rng(seed);
    auto shuffle = [&](std::vector<int>& v) {
        for (size_t i = v.size(); i > 1; --i)
            std::swap(v[i - 1], v[rng.below(i)]);
    };
    shuffle(idx0);
    shuffle(idx1);

    std::vector<Fold> out(folds);
    for (int f = 0; f < folds; ++f) {
        auto take = [&](const std::vector<int>& pool) {
            size_t per = pool.size() / folds;
            for (size_t k = f * per; k < (f + 1) * per; ++k) out[f].test.push_back(pool[k]);
        };
        take(idx0);
        take(idx1);
        std::sort(out[f].test.begin(), out[f].test.end());
    }
    for (int f = 0; f < folds; ++f) {
        std::vector<char> in_test(total, 0);
        for (int i : out[f].test) in_test[i] = 1;
        for (int i = 0; i < total; ++i)
            if (!in_test[i]) out[f].train.push_back(i);
    }
    return out;
}

namespace {

std::string fmt9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

} // namespace

void write_dataset(std::ostream& out, const Dataset& dataset) {
    out << "qot-dataset v1\n";
    out << "n " << dataset.n << "\n";
    out << "c " << dataset.c << "\n";
    out << "count " << dataset.patterns.size() << "\n";
    out << "topology " << dataset.topology_fingerprint << "\n";
    out << "config " << dataset.config_fingerprint << "\n";
    for (const auto& p : dataset.patterns) {
        out << "pattern " << p.request_id << " " << p.label << " " << p.active_count() << "\n";
        out << "edges " << p.edges.size() << "\n";
        for (const auto& [i, j] : p.edges) out << i << " " << j << "\n";
        for (int k = 0; k < p.active_count(); ++k) {
            out << "row " << p.active[k];
            for (int c = 0; c < kFeatureCount; ++c) out << " " << fmt9(p.features(k, c));
            out << "\n";
        }
    }
}

void write_dataset_file(const std::string& path, const Dataset& dataset) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open '" + path + "' for writing");
    write_dataset(out, dataset);
}

namespace {

struct LineReader {
    std::istream& in;
    int lineno = 0;
    std::string line;

    bool next() {
        if (!std::getline(in, line)) return false;
        ++lineno;
        return true;
    }
    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError("line " + std::to_string(lineno) + ": " + msg);
    }
    void expect() {
        if (!next()) throw ParseError("line " + std::to_string(lineno + 1) + ": unexpected end of file");
    }
};

} // namespace

Dataset read_dataset(std::istream& in) {
    LineReader r{in};
    r.expect();
    if (r.line != "qot-dataset v1") r.fail("expected header 'qot-dataset v1'");

    Dataset d;
    auto read_kv = [&](const char* key, auto& dst) {
        r.expect();
        std::istringstream ls(r.line);
        std::string k;
        if (!(ls >> k >> dst) || k != key) r.fail(std::string("expected '") + key + " <value>'");
    };
    size_t count = 0;
    read_kv("n", d.n);
    read_kv("c", d.c);
    read_kv("count", count);
    read_kv("topology", d.topology_fingerprint);
    read_kv("config", d.config_fingerprint);
    if (d.c != kFeatureCount) r.fail("unsupported feature count");
    if (d.n < 1) r.fail("n must be positive");

    for (size_t pi = 0; pi < count; ++pi) {
        Pattern p;
        int n_active = 0;
        {
            r.expect();
            std::istringstream ls(r.line);
            std::string k;
            if (!(ls >> k >> p.request_id >> p.label >> n_active) || k != "pattern")
                r.fail("expected 'pattern <s> <label> <n_active>'");
            if (p.label != 0 && p.label != 1) r.fail("label must be 0 or 1");
            if (n_active < 0 || n_active > d.n) r.fail("n_active out of range");
        }
        size_t m = 0;
        {
            r.expect();
            std::istringstream ls(r.line);
            std::string k;
            if (!(ls >> k >> m) || k != "edges") r.fail("expected 'edges <m>'");
        }
        for (size_t e = 0; e < m; ++e) {
            r.expect();
            std::istringstream ls(r.line);
            int i, j;
            if (!(ls >> i >> j)) r.fail("expected edge '<i> <j>'");
            if (i < 1 || j < 1 || i > d.n || j > d.n || i >= j) r.fail("bad edge endpoints");
            p.edges.push_back({i, j});
        }
        p.features.resize(n_active, kFeatureCount);
        for (int k = 0; k < n_active; ++k) {
            r.expect();
            std::istringstream ls(r.line);
            std::string kw;
            int conn;
            if (!(ls >> kw >> conn) || kw != "row") r.fail("expected 'row <i> <f1..f9>'");
            if (conn < 1 || conn > d.n) r.fail("row connection index out of range");
            if (!p.active.empty() && conn <= p.active.back()) r.fail("rows must be sorted by index");
            p.active.push_back(conn);
            for (int c = 0; c < kFeatureCount; ++c)
                if (!(ls >> p.features(k, c))) r.fail("row needs 9 features");
        }
        // every edge endpoint must be an active row
        for (const auto& [i, j] : p.edges)
            if (!std::binary_search(p.active.begin(), p.active.end(), i) ||
                !std::binary_search(p.active.begin(), p.active.end(), j))
                r.fail("edge references inactive connection");
        d.patterns.push_back(std::move(p));
    }
    return d;
}

Dataset read_dataset_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open dataset file '" + path + "'");
    return read_dataset(in);
}

} // namespace qot
