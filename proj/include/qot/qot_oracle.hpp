#pragma once

#include <iosfwd>
#include <vector>

#include "qot/rsca.hpp"

namespace qot {

struct OracleConfig {
    double launch_power_dbm = 0.0;
    double edfa_noise_figure_db = 5.0;
    double span_loss_db_per_km = 0.2;
    double xt_coupling_h_per_km = 1e-5;
    double ber_threshold = 1e-3;
    double reference_bandwidth_ghz = 12.5;
    double nli_margin_db_per_span = 0.1;

    std::string canonical_text() const;
    static OracleConfig read(std::istream& in);
    static OracleConfig read_file(const std::string& path);
    void write(std::ostream& out) const;
    void validate() const;
};

struct LightpathQot {
    int connection;
    double snr_linear;
    double xt_linear;
    double ber;
};

struct QotReport {
    std::vector<LightpathQot> lightpaths; // ordered by connection index
    int label = 1;                        // 1 iff every ber <= threshold
    double worst_ber = 0.0;

    double ber_of(int connection) const; // throws if absent
};

// Closed-form BER of the square/cross constellations at per-symbol SNR.
// Strictly decreasing in snr, range (0, 0.5).
double snr_to_ber(double snr_linear, Modulation modulation);

// Total inter-core crosstalk power ratio picked up by lightpath i: per route
// link, per core adjacent to i's core in the 7-core hex layout, add
// 1 - exp(-2 h L) when that core carries any spectrally overlapping
// allocation on the link.
double aggregate_xt(const NetworkState& state, const LightpathRecord& lightpath,
                    const OracleConfig& config);

// Ground-truth labeler: ASE accumulation over EDFA spans, a fixed per-span
// nonlinear margin, and aggregated crosstalk, mapped to BER per modulation.
QotReport evaluate_state(const NetworkState& state, const OracleConfig& config);

bool cores_adjacent(int a, int b, int core_count);

struct CalibrationResult {
    double h_per_km;
    double infeasible_fraction;
    int pilot_requests;
};

struct CalibrationOptions {
    double h_lo = 1e-9;
    double h_hi = 1e-1;
    double target_lo = 0.2;
    double target_hi = 0.5;
    int pilot_requests = 2000;
    int max_iterations = 40;
};

// Fraction of emitted patterns labeled infeasible in a pilot simulation run
// (no dataset is stored).
double pilot_infeasible_fraction(const Topology& topology, const TrafficConfig& traffic,
                                 const OracleConfig& oracle, const RscaConfig& rsca);

// Binary-search the coupling coefficient h until the pilot infeasible
// fraction lands in [target_lo, target_hi]. Throws ValueError with
// diagnostics when the range cannot reach the band.
CalibrationResult calibrate(const OracleConfig& config, const Topology& topology,
                            const TrafficConfig& traffic, const RscaConfig& rsca = {},
                            const CalibrationOptions& options = {});

void write_qot_report(std::ostream& out, const QotReport& report);

} // namespace qot
