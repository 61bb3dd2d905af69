#include "qot/qot_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <unordered_map>

namespace qot {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

std::string OracleConfig::canonical_text() const {
    std::ostringstream os;
    os << "launch_power_dbm " << fmt(launch_power_dbm) << "\n"
       << "edfa_noise_figure_db " << fmt(edfa_noise_figure_db) << "\n"
       << "span_loss_db_per_km " << fmt(span_loss_db_per_km) << "\n"
       << "xt_coupling_h_per_km " << fmt(xt_coupling_h_per_km) << "\n"
       << "ber_threshold " << fmt(ber_threshold) << "\n"
       << "reference_bandwidth_ghz " << fmt(reference_bandwidth_ghz) << "\n"
       << "nli_margin_db_per_span " << fmt(nli_margin_db_per_span) << "\n";
    return os.str();
}

void OracleConfig::write(std::ostream& out) const { out << canonical_text(); }

OracleConfig OracleConfig::read(std::istream& in) {
    OracleConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string key;
        if (!(ls >> key)) continue;
        double val;
        if (!(ls >> val))
            throw ParseError("line " + std::to_string(lineno) + ": expected '<key> <value>'");
        if (key == "launch_power_dbm") cfg.launch_power_dbm = val;
        else if (key == "edfa_noise_figure_db") cfg.edfa_noise_figure_db = val;
        else if (key == "span_loss_db_per_km") cfg.span_loss_db_per_km = val;
        else if (key == "xt_coupling_h_per_km") cfg.xt_coupling_h_per_km = val;
        else if (key == "ber_threshold") cfg.ber_threshold = val;
        else if (key == "reference_bandwidth_ghz") cfg.reference_bandwidth_ghz = val;
        else if (key == "nli_margin_db_per_span") cfg.nli_margin_db_per_span = val;
        else if (key == "achieved_infeasible_fraction") { /* informational, from calibrate */ }
        else
            throw ParseError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    cfg.validate();
    return cfg;
}

OracleConfig OracleConfig::read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open oracle config '" + path + "'");
    return read(in);
}

void OracleConfig::validate() const {
    if (edfa_noise_figure_db <= 0 || span_loss_db_per_km <= 0 || reference_bandwidth_ghz <= 0)
        throw ValueError("oracle config values must be positive");
    if (xt_coupling_h_per_km <= 0) throw ValueError("xt_coupling_h_per_km must be positive");
    if (nli_margin_db_per_span < 0) throw ValueError("nli_margin_db_per_span must be non-negative");
    if (ber_threshold <= 0.0 || ber_threshold >= 0.5)
        throw ValueError("ber_threshold must be in (0, 0.5)");
}

double QotReport::ber_of(int connection) const {
    for (const auto& lp : lightpaths)
        if (lp.connection == connection) return lp.ber;
    throw ValueError("connection " + std::to_string(connection) + " not in report");
}

double snr_to_ber(double snr_linear, Modulation modulation) {
    if (snr_linear <= 0.0) throw ValueError("snr must be positive");
    double ber;
    switch (modulation) {
        case Modulation::BPSK:
            ber = 0.5 * std::erfc(std::sqrt(snr_linear));
            break;
        case Modulation::QPSK:
            ber = 0.5 * std::erfc(std::sqrt(snr_linear / 2.0));
            break;
        case Modulation::QAM8:
        case Modulation::QAM16: {
            double M = modulation == Modulation::QAM8 ? 8.0 : 16.0;
            double k = std::log2(M);
            ber = (2.0 / k) * (1.0 - 1.0 / std::sqrt(M)) *
                  std::erfc(std::sqrt(3.0 * snr_linear / (2.0 * (M - 1.0))));
            break;
        }
        default:
            throw ValueError("unknown modulation");
    }
    return std::clamp(ber, 1e-300, 0.5 - 1e-16);
}

bool cores_adjacent(int a, int b, int core_count) {
    if (a == b) return false;
    if (core_count == 1) return false;
    if (core_count != 7) {
        // generic fallback: ring layout
        int ra = a - 1, rb = b - 1;
        int d = std::abs(ra - rb);
        return d == 1 || d == core_count - 1;
    }
    // 7-core hex: core 1 in the center, cores 2..7 on the ring
    if (a == 1 || b == 1) return true;
    int ra = a - 2, rb = b - 2; // ring positions 0..5
    int d = std::abs(ra - rb);
    return d == 1 || d == 5;
}

double aggregate_xt(const NetworkState& state, const LightpathRecord& lightpath,
                    const OracleConfig& config) {
    const Topology& topo = state.topology();
    double xt = 0.0;
    for (int li : lightpath.route_links) {
        double len = topo.link(li).length_km;
        for (int core = 1; core <= topo.cores(); ++core) {
            if (!cores_adjacent(core, lightpath.core, topo.cores())) continue;
            if (state.any_occupied(li, core, lightpath.start_slot, lightpath.slot_count))
                xt += 1.0 - std::exp(-2.0 * config.xt_coupling_h_per_km * len);
        }
    }
    return xt;
}

QotReport evaluate_state(const NetworkState& state, const OracleConfig& config) {
    const Topology& topo = state.topology();
    const double slot_width_ghz = state.config().slot_width_ghz;
    QotReport report;
    report.lightpaths.reserve(state.lightpaths().size());
    for (const auto& [conn, rec] : state.lightpaths()) {
        int spans = std::max(rec.edfa_count, 1);
        double span_loss_db = config.span_loss_db_per_km * topo.span_km();
        double osnr_db = 58.0 + config.launch_power_dbm - span_loss_db -
                         config.edfa_noise_figure_db - 10.0 * std::log10(static_cast<double>(spans));
        double symbol_rate_ghz = slot_width_ghz * rec.slot_count;
        double snr_ase_db = osnr_db + 10.0 * std::log10(config.reference_bandwidth_ghz / symbol_rate_ghz);
        double snr_ase = std::pow(10.0, snr_ase_db / 10.0);
        // per-span nonlinear margin folded in as an extra noise term
        double margin = std::pow(10.0, config.nli_margin_db_per_span * spans / 10.0);
        double xt = aggregate_xt(state, rec, config);
        double snr_total = 1.0 / (margin / snr_ase + xt);
        double ber = snr_to_ber(snr_total, rec.modulation);
        report.lightpaths.push_back({conn, snr_total, xt, ber});
        report.worst_ber = std::max(report.worst_ber, ber);
    }
    report.label = report.worst_ber <= config.ber_threshold ? 1 : 0;
    return report;
}

double pilot_infeasible_fraction(const Topology& topology, const TrafficConfig& traffic,
                                 const OracleConfig& oracle, const RscaConfig& rsca) {
    auto events = generate_events(traffic, topology);
    NetworkState state(topology, rsca);
    Rng resample_rng(traffic.seed ^ 0x9e3779b97f4a7c15ull);
    std::unordered_map<int, int> established; // request id -> connection index
    long emitted = 0, infeasible = 0;
    for (const auto& ev : events) {
        if (ev.kind == EventKind::Departure) {
            auto it = established.find(ev.request_id);
            if (it != established.end()) {
                state.release(it->second);
                established.erase(it);
            }
            continue;
        }
        Event req = ev;
        int conn = topology.connection_index(req.src, req.dst);
        bool found = true;
        for (int tries = 0; state.is_active(conn); ++tries) {
            if (tries >= 2000) { found = false; break; }
            conn = static_cast<int>(resample_rng.below(topology.connection_count())) + 1;
        }
        if (!found) continue;
        auto [u, v] = topology.connection_pair(conn);
        req.src = u;
        req.dst = v;
        auto result = state.allocate(req);
        if (std::holds_alternative<Blocked>(result)) continue;
        const auto& rec = std::get<LightpathRecord>(result);
        state.commit(rec);
        QotReport report = evaluate_state(state, oracle);
        ++emitted;
        if (report.label == 1) {
            established[ev.request_id] = conn;
        } else {
            ++infeasible;
            state.release(conn);
        }
    }
    if (emitted == 0) return 0.0;
    return static_cast<double>(infeasible) / static_cast<double>(emitted);
}

CalibrationResult calibrate(const OracleConfig& config, const Topology& topology,
                            const TrafficConfig& traffic, const RscaConfig& rsca,
                            const CalibrationOptions& options) {
    if (options.h_lo <= 0.0 || options.h_hi <= options.h_lo)
        throw ValueError("calibration h range must satisfy 0 < h_lo < h_hi");
    TrafficConfig pilot = traffic;
    pilot.request_count = std::max(options.pilot_requests, 2000);

    auto fraction_at = [&](double h) {
        OracleConfig c = config;
        c.xt_coupling_h_per_km = h;
        return pilot_infeasible_fraction(topology, pilot, c, rsca);
    };

    double f_hi = fraction_at(options.h_hi);
    if (f_hi < options.target_lo)
        throw ValueError("calibration failed: infeasible fraction at h_hi=" +
                         std::to_string(options.h_hi) + " is only " + std::to_string(f_hi));
    if (f_hi <= options.target_hi)
        return {options.h_hi, f_hi, pilot.request_count};
    double f_lo = fraction_at(options.h_lo);
    if (f_lo > options.target_hi)
        throw ValueError("calibration failed: infeasible fraction at h_lo=" +
                         std::to_string(options.h_lo) + " is already " + std::to_string(f_lo));
    if (f_lo >= options.target_lo)
        return {options.h_lo, f_lo, pilot.request_count};

    // bisect in log space; fraction is monotone in h for a fixed seed
    double lo = options.h_lo, hi = options.h_hi;
    for (int it = 0; it < options.max_iterations; ++it) {
        double mid = std::exp(0.5 * (std::log(lo) + std::log(hi)));
        double f = fraction_at(mid);
        if (f >= options.target_lo && f <= options.target_hi)
            return {mid, f, pilot.request_count};
        if (f < options.target_lo) lo = mid;
        else hi = mid;
    }
    throw ValueError("calibration failed: h range exhausted after " +
                     std::to_string(options.max_iterations) + " bisections (last band [" +
                     std::to_string(lo) + ", " + std::to_string(hi) + "])");
}

void write_qot_report(std::ostream& out, const QotReport& report) {
    for (const auto& lp : report.lightpaths) {
        double snr_db = 10.0 * std::log10(lp.snr_linear);
        char buf[96];
        std::snprintf(buf, sizeof buf, "%d %.9g %.9g\n", lp.connection, snr_db, lp.ber);
        out << buf;
    }
}

} // namespace qot
