#include "qot/topology.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <queue>
#include <set>
#include <sstream>

namespace qot {

std::string fingerprint_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

namespace {

struct RawLink {
    std::string u, v;
    double length_km;
    int line;
};

[[noreturn]] void fail(int line, const std::string& msg) {
    throw ParseError("line " + std::to_string(line) + ": " + msg);
}

} // namespace

Topology Topology::parse(std::istream& in) {
    std::set<std::string> node_set;
    std::vector<RawLink> raw_links;
    int cores = -1, slots = -1;
    double span_km = -1.0;

    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string kw;
        if (!(ls >> kw)) continue;
        if (kw == "node") {
            std::string name;
            if (!(ls >> name)) fail(lineno, "node record needs an id");
            if (!node_set.insert(name).second) fail(lineno, "duplicate node '" + name + "'");
        } else if (kw == "link") {
            RawLink l;
            if (!(ls >> l.u >> l.v >> l.length_km))
                fail(lineno, "link record needs <u> <v> <length_km>");
            if (l.length_km <= 0.0) fail(lineno, "link length must be positive");
            l.line = lineno;
            raw_links.push_back(l);
        } else if (kw == "cores") {
            if (!(ls >> cores) || cores < 1) fail(lineno, "cores must be a positive integer");
        } else if (kw == "slots") {
            if (!(ls >> slots) || slots < 1) fail(lineno, "slots must be a positive integer");
        } else if (kw == "span_km") {
            if (!(ls >> span_km) || span_km <= 0.0) fail(lineno, "span_km must be positive");
        } else {
            fail(lineno, "unknown record '" + kw + "'");
        }
        std::string extra;
        if (ls >> extra) fail(lineno, "trailing tokens after record");
    }

    if (cores < 1) throw ParseError("missing 'cores' header");
    if (slots < 1) throw ParseError("missing 'slots' header");
    if (span_km <= 0.0) throw ParseError("missing 'span_km' header");
    if (node_set.size() < 2) throw ParseError("topology needs at least 2 nodes");

    Topology t;
    t.cores_ = cores;
    t.slots_ = slots;
    t.span_km_ = span_km;
    t.names_.assign(node_set.begin(), node_set.end()); // sorted: set order
    std::map<std::string, int> ids;
    for (int i = 0; i < t.node_count(); ++i) ids[t.names_[i]] = i;

    std::set<std::pair<int, int>> seen;
    for (const auto& rl : raw_links) {
        auto iu = ids.find(rl.u);
        if (iu == ids.end()) fail(rl.line, "unknown node '" + rl.u + "' in link");
        auto iv = ids.find(rl.v);
        if (iv == ids.end()) fail(rl.line, "unknown node '" + rl.v + "' in link");
        int u = iu->second, v = iv->second;
        if (u == v) fail(rl.line, "self-loop on node '" + rl.u + "'");
        if (u > v) std::swap(u, v);
        if (!seen.insert({u, v}).second)
            fail(rl.line, "duplicate link " + rl.u + " - " + rl.v);
        t.links_.push_back({u, v, rl.length_km});
    }
    std::sort(t.links_.begin(), t.links_.end(), [](const Link& a, const Link& b) {
        return std::tie(a.u, a.v) < std::tie(b.u, b.v);
    });

    t.adj_.assign(t.node_count(), {});
    for (int li = 0; li < t.link_count(); ++li) {
        t.adj_[t.links_[li].u].push_back({t.links_[li].v, li});
        t.adj_[t.links_[li].v].push_back({t.links_[li].u, li});
    }
    for (auto& a : t.adj_) std::sort(a.begin(), a.end());

    // connectivity
    std::vector<char> vis(t.node_count(), 0);
    std::queue<int> q;
    q.push(0);
    vis[0] = 1;
    int reached = 1;
    while (!q.empty()) {
        int x = q.front();
        q.pop();
        for (auto [y, li] : t.adj_[x])
            if (!vis[y]) {
                vis[y] = 1;
                ++reached;
                q.push(y);
            }
    }
    if (reached != t.node_count()) {
        for (int i = 0; i < t.node_count(); ++i)
            if (!vis[i])
                throw ParseError("graph is disconnected: node '" + t.names_[i] +
                                 "' unreachable from '" + t.names_[0] + "'");
    }
    return t;
}

Topology Topology::parse_string(const std::string& text) {
    std::istringstream in(text);
    return parse(in);
}

Topology Topology::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open topology file '" + path + "'");
    return parse(in);
}

int Topology::node_id(const std::string& name) const {
    auto it = std::lower_bound(names_.begin(), names_.end(), name);
    if (it == names_.end() || *it != name)
        throw ValueError("unknown node '" + name + "'");
    return static_cast<int>(it - names_.begin());
}

int Topology::find_link(int u, int v) const {
    if (u > v) std::swap(u, v);
    for (auto [y, li] : adj_.at(u))
        if (y == v) return li;
    return -1;
}

int Topology::connection_count() const {
    int n = node_count();
    return n * (n - 1) / 2;
}

int Topology::connection_index(int u, int v) const {
    int n = node_count();
    if (u < 0 || u >= n || v < 0 || v >= n) throw ValueError("node id out of range");
    if (u == v) throw ValueError("connection endpoints must differ");
    if (u > v) std::swap(u, v);
    // pairs (0,1),(0,2),...,(0,n-1),(1,2),... in order, 1-based result
    return u * n - u * (u + 1) / 2 + (v - u);
}

int Topology::connection_index(const std::string& u, const std::string& v) const {
    return connection_index(node_id(u), node_id(v));
}

std::pair<int, int> Topology::connection_pair(int index) const {
    int n = node_count();
    if (index < 1 || index > connection_count())
        throw ValueError("connection index out of range");
    int rem = index;
    for (int u = 0; u < n - 1; ++u) {
        int row = n - 1 - u;
        if (rem <= row) return {u, u + rem};
        rem -= row;
    }
    throw ValueError("connection index out of range"); // unreachable
}

namespace {

// (length, hops, node sequence): the deterministic path order used everywhere.
bool path_less(const RoutePath& a, const RoutePath& b) {
    if (a.length_km != b.length_km) return a.length_km < b.length_km;
    if (a.hops() != b.hops()) return a.hops() < b.hops();
    return a.nodes < b.nodes;
}

} // namespace

std::vector<RoutePath> Topology::k_shortest_paths(int u, int v, int k) const {
    if (k < 1) throw ValueError("k must be >= 1");
    if (u == v) throw ValueError("path endpoints must differ");

    // Dijkstra with (dist, hops, lex nodes) labels; label-correcting with a
    // plain priority queue, graphs here are small.
    auto shortest = [&](int src, int dst, const std::vector<char>& node_banned,
                        const std::set<std::pair<int, int>>& edge_banned) -> RoutePath {
        struct Label {
            double dist;
            int hops;
            std::vector<int> nodes;
            std::vector<int> links;
        };
        auto cmp = [](const Label& a, const Label& b) {
            if (a.dist != b.dist) return a.dist > b.dist;
            if (a.hops != b.hops) return a.hops > b.hops;
            return a.nodes > b.nodes;
        };
        std::priority_queue<Label, std::vector<Label>, decltype(cmp)> pq(cmp);
        std::vector<char> done(node_count(), 0);
        pq.push({0.0, 0, {src}, {}});
        while (!pq.empty()) {
            Label cur = pq.top();
            pq.pop();
            int x = cur.nodes.back();
            if (done[x]) continue;
            done[x] = 1;
            if (x == dst) return {cur.nodes, cur.links, cur.dist};
            for (auto [y, li] : adj_[x]) {
                if (done[y] || node_banned[y]) continue;
                int a = std::min(x, y), b = std::max(x, y);
                if (edge_banned.count({a, b})) continue;
                Label nxt = cur;
                nxt.dist += links_[li].length_km;
                nxt.hops += 1;
                nxt.nodes.push_back(y);
                nxt.links.push_back(li);
                pq.push(std::move(nxt));
            }
        }
        return {}; // empty = unreachable
    };

    std::vector<char> no_ban(node_count(), 0);
    std::vector<RoutePath> result;
    RoutePath first = shortest(u, v, no_ban, {});
    if (first.nodes.empty()) return result;
    result.push_back(first);

    auto cand_cmp = [](const RoutePath& a, const RoutePath& b) {
        if (path_less(a, b)) return true;
        if (path_less(b, a)) return false;
        return a.nodes < b.nodes;
    };
    std::set<RoutePath, decltype(cand_cmp)> candidates(cand_cmp);

    while (static_cast<int>(result.size()) < k) {
        const RoutePath& prev = result.back();
        for (size_t spur = 0; spur + 1 < prev.nodes.size(); ++spur) {
            std::vector<int> root_nodes(prev.nodes.begin(), prev.nodes.begin() + spur + 1);
            std::set<std::pair<int, int>> edge_banned;
            for (const auto& p : result) {
                if (p.nodes.size() > spur &&
                    std::equal(root_nodes.begin(), root_nodes.end(), p.nodes.begin())) {
                    if (p.nodes.size() > spur + 1) {
                        int a = std::min(p.nodes[spur], p.nodes[spur + 1]);
                        int b = std::max(p.nodes[spur], p.nodes[spur + 1]);
                        edge_banned.insert({a, b});
                    }
                }
            }
            std::vector<char> node_banned(node_count(), 0);
            for (size_t i = 0; i < spur; ++i) node_banned[root_nodes[i]] = 1;

            RoutePath tail = shortest(prev.nodes[spur], v, node_banned, edge_banned);
            if (tail.nodes.empty()) continue;

            RoutePath full;
            full.nodes = root_nodes;
            full.nodes.insert(full.nodes.end(), tail.nodes.begin() + 1, tail.nodes.end());
            full.links.assign(prev.links.begin(), prev.links.begin() + spur);
            full.links.insert(full.links.end(), tail.links.begin(), tail.links.end());
            full.length_km = 0.0;
            for (int li : full.links) full.length_km += links_[li].length_km;
            bool dup = false;
            for (const auto& p : result)
                if (p.nodes == full.nodes) { dup = true; break; }
            if (!dup) candidates.insert(std::move(full));
        }
        if (candidates.empty()) break;
        result.push_back(*candidates.begin());
        candidates.erase(candidates.begin());
    }
    std::sort(result.begin(), result.end(), path_less);
    return result;
}

std::string Topology::canonical_text() const {
    std::ostringstream os;
    os << "cores " << cores_ << "\nslots " << slots_ << "\nspan_km " << span_km_ << "\n";
    for (const auto& n : names_) os << "node " << n << "\n";
    for (const auto& l : links_)
        os << "link " << names_[l.u] << " " << names_[l.v] << " " << l.length_km << "\n";
    return os.str();
}

std::string Topology::fingerprint() const {
    return fingerprint_hex(fnv1a(canonical_text()));
}

} // namespace qot
