#include "qot/rsca.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

namespace qot {

std::string RscaConfig::canonical_text() const {
    std::ostringstream os;
    os << "k_paths " << k_paths << "\nslot_gbps_per_bit " << slot_gbps_per_bit
       << "\nslot_width_ghz " << slot_width_ghz << "\nreach";
    for (int m = 1; m <= 4; ++m) os << " " << reach_km[m];
    os << "\n";
    return os.str();
}

std::optional<ModulationPlan> modulation_and_slots(double path_length_km, double bitrate_gbps,
                                                   const RscaConfig& config) {
    if (path_length_km <= 0.0) throw ValueError("path length must be positive");
    if (bitrate_gbps <= 0.0) throw ValueError("bitrate must be positive");
    for (int m = 4; m >= 1; --m) {
        if (config.reach_km[m] >= path_length_km) {
            double per_slot = config.slot_gbps_per_bit * m;
            int slots = static_cast<int>(std::ceil(bitrate_gbps / per_slot));
            return ModulationPlan{static_cast<Modulation>(m), slots};
        }
    }
    return std::nullopt;
}

NetworkState::NetworkState(const Topology& topology, RscaConfig config)
    : topology_(&topology), config_(config) {
    grid_.assign(static_cast<size_t>(topology.link_count()) * topology.cores() * topology.slots(), 0);
}

bool NetworkState::range_free(int link, int core, int start_slot, int slot_count) const {
    for (int s = start_slot; s < start_slot + slot_count; ++s)
        if (grid_[cell(link, core, s)] != 0) return false;
    return true;
}

bool NetworkState::any_occupied(int link, int core, int start_slot, int slot_count) const {
    return !range_free(link, core, start_slot, slot_count);
}

const LightpathRecord& NetworkState::lightpath(int connection) const {
    auto it = lightpaths_.find(connection);
    if (it == lightpaths_.end())
        throw ValueError("connection " + std::to_string(connection) + " not established");
    return it->second;
}

AllocationResult NetworkState::allocate(const Event& request) const {
    const Topology& topo = *topology_;
    int conn = topo.connection_index(request.src, request.dst);
    if (is_active(conn))
        throw ValueError("connection " + std::to_string(conn) + " already established");

    auto paths = topo.k_shortest_paths(request.src, request.dst, config_.k_paths);
    bool reach_failed = false;
    for (const auto& path : paths) {
        auto plan = modulation_and_slots(path.length_km, request.bitrate_gbps, config_);
        if (!plan) {
            reach_failed = true;
            continue;
        }
        const int sc = plan->slot_count;
        for (int core = 1; core <= topo.cores(); ++core) {
            for (int start = 1; start + sc - 1 <= topo.slots(); ++start) {
                bool ok = true;
                for (int li : path.links) {
                    if (!range_free(li, core, start, sc)) { ok = false; break; }
                }
                if (!ok) continue;
                LightpathRecord rec;
                rec.connection = conn;
                rec.route_nodes = path.nodes;
                rec.route_links = path.links;
                rec.core = core;
                rec.start_slot = start;
                rec.slot_count = sc;
                rec.modulation = plan->modulation;
                rec.length_km = path.length_km;
                rec.max_link_km = 0.0;
                for (int li : path.links)
                    rec.max_link_km = std::max(rec.max_link_km, topo.link(li).length_km);
                rec.link_count = static_cast<int>(path.links.size());
                rec.edfa_count = 0;
                for (int li : path.links)
                    rec.edfa_count += static_cast<int>(std::ceil(topo.link(li).length_km / topo.span_km()));
                return rec;
            }
        }
    }
    if (paths.empty()) return Blocked{"no route"};
    if (reach_failed && std::none_of(paths.begin(), paths.end(), [&](const RoutePath& p) {
            return modulation_and_slots(p.length_km, request.bitrate_gbps, config_).has_value();
        }))
        return Blocked{"beyond transparent reach on all candidate paths"};
    return Blocked{"no contiguous slots on any path/core"};
}

void NetworkState::commit(const LightpathRecord& lightpath) {
    if (is_active(lightpath.connection))
        throw ValueError("connection " + std::to_string(lightpath.connection) + " already established");
    for (int li : lightpath.route_links)
        if (!range_free(li, lightpath.core, lightpath.start_slot, lightpath.slot_count))
            throw ValueError("commit would overlap an existing allocation on link " +
                             std::to_string(li));
    for (int li : lightpath.route_links)
        for (int s = lightpath.start_slot; s < lightpath.start_slot + lightpath.slot_count; ++s)
            grid_[cell(li, lightpath.core, s)] = lightpath.connection;
    lightpaths_[lightpath.connection] = lightpath;
}

void NetworkState::release(int connection) {
    auto it = lightpaths_.find(connection);
    if (it == lightpaths_.end())
        throw ValueError("release of unknown connection " + std::to_string(connection));
    const LightpathRecord& rec = it->second;
    for (int li : rec.route_links)
        for (int s = rec.start_slot; s < rec.start_slot + rec.slot_count; ++s)
            grid_[cell(li, rec.core, s)] = 0;
    lightpaths_.erase(it);
}

bool NetworkState::consistent() const {
    std::vector<int> expect(grid_.size(), 0);
    for (const auto& [conn, rec] : lightpaths_)
        for (int li : rec.route_links)
            for (int s = rec.start_slot; s < rec.start_slot + rec.slot_count; ++s) {
                size_t c = cell(li, rec.core, s);
                if (expect[c] != 0) return false; // two owners
                expect[c] = conn;
            }
    return expect == grid_;
}

void NetworkState::write_snapshot(std::ostream& out) const {
    for (const auto& [conn, rec] : lightpaths_) {
        out << conn << " " << rec.core << " " << rec.start_slot << " " << rec.slot_count << " "
            << static_cast<int>(rec.modulation);
        for (int nd : rec.route_nodes) out << " " << topology_->node_name(nd);
        out << "\n";
    }
}

} // namespace qot
