#include "qot/traffic.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

namespace qot {

std::string TrafficConfig::canonical_text() const {
    std::ostringstream os;
    os << "load " << load_erlangs << "\nmean_holding " << mean_holding
       << "\nrequests " << request_count << "\nseed " << seed << "\nbitrates";
    for (const auto& b : bitrate_choices) os << " " << b.gbps << ":" << b.prob;
    os << "\n";
    return os.str();
}

std::vector<Event> generate_events(const TrafficConfig& config, const Topology& topology) {
    if (config.load_erlangs <= 0.0) throw ValueError("load_erlangs must be positive");
    if (config.mean_holding <= 0.0) throw ValueError("mean_holding must be positive");
    if (config.request_count < 0) throw ValueError("request_count must be non-negative");
    if (config.bitrate_choices.empty()) throw ValueError("bitrate_choices must be non-empty");
    double psum = 0.0;
    for (const auto& b : config.bitrate_choices) {
        if (b.gbps <= 0.0 || b.prob < 0.0) throw ValueError("invalid bitrate choice");
        psum += b.prob;
    }
    if (std::abs(psum - 1.0) > 1e-9) throw ValueError("bitrate probabilities must sum to 1");

    const double mean_interarrival = config.mean_holding / config.load_erlangs;
    const int n = topology.connection_count();

    Rng rng(config.seed);
    std::vector<Event> events;
    events.reserve(2 * static_cast<size_t>(config.request_count));

    double t = 0.0;
    for (int s = 1; s <= config.request_count; ++s) {
        t += rng.exponential(mean_interarrival);
        int conn = static_cast<int>(rng.below(static_cast<std::uint64_t>(n))) + 1;
        auto [u, v] = topology.connection_pair(conn);
        double r = rng.uniform01();
        double acc = 0.0;
        double bitrate = config.bitrate_choices.back().gbps;
        for (const auto& b : config.bitrate_choices) {
            acc += b.prob;
            if (r < acc) { bitrate = b.gbps; break; }
        }
        double hold = rng.exponential(config.mean_holding);
        events.push_back({t, EventKind::Arrival, s, u, v, bitrate});
        events.push_back({t + hold, EventKind::Departure, s, u, v, bitrate});
    }

    std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
        if (a.time != b.time) return a.time < b.time;
        if (a.request_id != b.request_id) return a.request_id < b.request_id;
        return a.kind == EventKind::Arrival && b.kind == EventKind::Departure;
    });
    return events;
}

void write_event_trace(std::ostream& out, const std::vector<Event>& events, const Topology& topology) {
    char buf[64];
    for (const auto& e : events) {
        std::snprintf(buf, sizeof buf, "%.9g", e.time);
        out << buf << " " << (e.kind == EventKind::Arrival ? "arrival" : "departure") << " "
            << e.request_id << " " << topology.node_name(e.src) << " "
            << topology.node_name(e.dst) << " " << e.bitrate_gbps << "\n";
    }
}

} // namespace qot
