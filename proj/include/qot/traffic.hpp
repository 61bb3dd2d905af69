#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "qot/topology.hpp"

namespace qot {

struct BitrateChoice {
    double gbps;
    double prob;
};

struct TrafficConfig {
    double load_erlangs = 400.0;
    double mean_holding = 1.0;
    int request_count = 20000;
    std::vector<BitrateChoice> bitrate_choices = {{100.0, 1.0 / 3}, {200.0, 1.0 / 3}, {400.0, 1.0 / 3}};
    std::uint64_t seed = 1;

    std::string canonical_text() const;
};

enum class EventKind { Arrival, Departure };

struct Event {
    double time;
    EventKind kind;
    int request_id; // 1-based arrival order
    int src, dst;   // node ids, src < dst
    double bitrate_gbps;
};

// Seeded RNG helpers shared by the simulation modules. mt19937_64 with
// explicit inverse-CDF sampling so streams are identical across platforms
// (std::*_distribution output is implementation defined).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    double uniform01() { // [0, 1)
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }
    double exponential(double mean) {
        return -mean * std::log1p(-uniform01());
    }
    std::uint64_t below(std::uint64_t bound) { // uniform in [0, bound)
        return static_cast<std::uint64_t>((static_cast<unsigned __int128>(eng_()) * bound) >> 64);
    }

private:
    std::mt19937_64 eng_;
};

// Poisson arrivals at rate load/mean_holding, exponential holding times,
// uniform source-destination pairs. Chronologically sorted, deterministic
// per seed.
std::vector<Event> generate_events(const TrafficConfig& config, const Topology& topology);

void write_event_trace(std::ostream& out, const std::vector<Event>& events, const Topology& topology);

} // namespace qot
