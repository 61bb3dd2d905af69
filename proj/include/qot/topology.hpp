#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "qot/common.hpp"

namespace qot {

struct Link {
    int u = -1;
    int v = -1; // u < v always
    double length_km = 0.0;
};

struct RoutePath {
    std::vector<int> nodes;
    std::vector<int> links; // links[i] joins nodes[i] and nodes[i+1]
    double length_km = 0.0;

    int hops() const { return static_cast<int>(links.size()); }
};

// Physical network: nodes, undirected weighted links, uniform core and slot
// counts, EDFA span length. Immutable after parse; node ids are assigned in
// lexicographic order of their names so connection indices are reproducible
// regardless of file order.
class Topology {
public:
    static Topology parse(std::istream& in);
    static Topology parse_string(const std::string& text);
    static Topology parse_file(const std::string& path);

    int node_count() const { return static_cast<int>(names_.size()); }
    int link_count() const { return static_cast<int>(links_.size()); }
    int cores() const { return cores_; }
    int slots() const { return slots_; }
    double span_km() const { return span_km_; }

    int node_id(const std::string& name) const; // throws ValueError if unknown
    const std::string& node_name(int id) const { return names_.at(id); }
    const std::vector<Link>& links() const { return links_; }
    const Link& link(int idx) const { return links_.at(idx); }

    // (neighbor node, link index) pairs, sorted by neighbor id.
    const std::vector<std::pair<int, int>>& neighbors(int node) const {
        return adj_.at(node);
    }
    int find_link(int u, int v) const; // -1 if absent

    // Connection enumeration: unordered node pairs in lexicographic order,
    // 1-based. n = |V|(|V|-1)/2.
    int connection_count() const;
    int connection_index(int u, int v) const;
    int connection_index(const std::string& u, const std::string& v) const;
    std::pair<int, int> connection_pair(int index) const; // (u, v), u < v

    // Yen's k-shortest loop-free paths. Sorted by length, then hop count,
    // then lexicographic node sequence. Returns fewer than k if fewer exist.
    std::vector<RoutePath> k_shortest_paths(int u, int v, int k) const;

    // Canonical serialization, also the fingerprint input.
    std::string canonical_text() const;
    std::string fingerprint() const;

private:
    std::vector<std::string> names_;
    std::vector<Link> links_;
    std::vector<std::vector<std::pair<int, int>>> adj_;
    int cores_ = 0;
    int slots_ = 0;
    double span_km_ = 0.0;
};

} // namespace qot
