#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "qot/topology.hpp"
#include "qot/traffic.hpp"

namespace qot {

enum class Modulation : int { BPSK = 1, QPSK = 2, QAM8 = 3, QAM16 = 4 };

inline int bits_per_symbol(Modulation m) { return static_cast<int>(m); }

struct RscaConfig {
    int k_paths = 3;
    // capacity per slot = slot_gbps_per_bit * bits_per_symbol
    double slot_gbps_per_bit = 25.0;
    double slot_width_ghz = 12.5;
    // transparent reach, km, indexed by modulation order 1..4
    double reach_km[5] = {0.0, 4000.0, 2000.0, 1000.0, 500.0};

    std::string canonical_text() const;
};

struct ModulationPlan {
    Modulation modulation;
    int slot_count;
};

// Highest-order modulation whose reach covers the path, and the contiguous
// slot demand for the bitrate. nullopt when even BPSK cannot reach.
std::optional<ModulationPlan> modulation_and_slots(double path_length_km, double bitrate_gbps,
                                                   const RscaConfig& config);

struct LightpathRecord {
    int connection = 0; // 1-based connection index
    std::vector<int> route_nodes;
    std::vector<int> route_links;
    int core = 0;       // 1-based
    int start_slot = 0; // 1-based
    int slot_count = 0;
    Modulation modulation = Modulation::BPSK;
    double length_km = 0.0;
    double max_link_km = 0.0;
    int edfa_count = 0;
    int link_count = 0;
};

struct Blocked {
    std::string reason;
};

using AllocationResult = std::variant<LightpathRecord, Blocked>;

// Established lightpaths plus the (link, core, slot) occupancy grid. Single
// writer; allocate() is const and only proposes a candidate.
class NetworkState {
public:
    explicit NetworkState(const Topology& topology, RscaConfig config = {});

    const Topology& topology() const { return *topology_; }
    const RscaConfig& config() const { return config_; }

    // First feasible (path, core, first-fit slot) in path-major scan order.
    // Does not mutate the state.
    AllocationResult allocate(const Event& request) const;

    void commit(const LightpathRecord& lightpath);
    void release(int connection);

    bool is_active(int connection) const { return lightpaths_.count(connection) != 0; }
    const std::map<int, LightpathRecord>& lightpaths() const { return lightpaths_; }
    const LightpathRecord& lightpath(int connection) const;

    // 0 = free, otherwise owning connection index. core/slot 1-based.
    int owner(int link, int core, int slot) const {
        return grid_[cell(link, core, slot)];
    }
    bool range_free(int link, int core, int start_slot, int slot_count) const;
    bool any_occupied(int link, int core, int start_slot, int slot_count) const;

    // Grid equals the union of live records (test/debug oracle).
    bool consistent() const;

    void write_snapshot(std::ostream& out) const;

private:
    size_t cell(int link, int core, int slot) const {
        return (static_cast<size_t>(link) * topology_->cores() + (core - 1)) * topology_->slots() +
               (slot - 1);
    }

    const Topology* topology_;
    RscaConfig config_;
    std::map<int, LightpathRecord> lightpaths_;
    std::vector<int> grid_;
};

} // namespace qot
