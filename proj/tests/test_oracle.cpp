#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "qot/qot_oracle.hpp"

using namespace qot;

namespace {

const char* kTwoLink = R"(
cores 7
slots 160
span_km 80
node a
node b
node c
link a b 100
link b c 100
)";

LightpathRecord make_record(int conn, std::vector<int> links, int core, int start, int count,
                            Modulation mod, const Topology& t) {
    LightpathRecord r;
    r.connection = conn;
    r.route_links = links;
    r.core = core;
    r.start_slot = start;
    r.slot_count = count;
    r.modulation = mod;
    r.length_km = 0;
    for (int li : links) {
        r.length_km += t.link(li).length_km;
        r.max_link_km = std::max(r.max_link_km, t.link(li).length_km);
    }
    r.link_count = static_cast<int>(links.size());
    r.edfa_count = 0;
    for (int li : links) r.edfa_count += static_cast<int>(std::ceil(t.link(li).length_km / t.span_km()));
    return r;
}

} // namespace

TEST_CASE("snr_to_ber closed forms") {
    // BPSK: 0.5 erfc(sqrt(snr)); sqrt(snr) = 2.185 gives ber ~ 1e-3
    double snr = 2.185 * 2.185;
    CHECK(snr_to_ber(snr, Modulation::BPSK) == doctest::Approx(1e-3).epsilon(0.02));
    CHECK(snr_to_ber(snr, Modulation::BPSK) == doctest::Approx(0.5 * std::erfc(2.185)));

    // asymptote
    CHECK(snr_to_ber(1e6, Modulation::QAM16) < 1e-12);
    CHECK(snr_to_ber(1e-9, Modulation::BPSK) < 0.5);
    CHECK_THROWS_AS(snr_to_ber(0.0, Modulation::BPSK), ValueError);
    CHECK_THROWS_AS(snr_to_ber(-3.0, Modulation::QPSK), ValueError);
}

TEST_CASE("ber strictly decreasing in snr for every modulation") {
    for (auto mod : {Modulation::BPSK, Modulation::QPSK, Modulation::QAM8, Modulation::QAM16}) {
        double prev = 1.0;
        for (double snr_db = -3.0; snr_db <= 26.0; snr_db += 0.25) {
            double ber = snr_to_ber(std::pow(10.0, snr_db / 10.0), mod);
            CHECK(ber < prev);
            prev = ber;
        }
    }
}

TEST_CASE("ber non-decreasing in modulation order at fixed snr") {
    for (double snr : {0.5, 1.0, 2.0, 5.0, 10.0, 50.0, 200.0, 1000.0}) {
        double prev = 0.0;
        for (auto mod : {Modulation::BPSK, Modulation::QPSK, Modulation::QAM8, Modulation::QAM16}) {
            double ber = snr_to_ber(snr, mod);
            CHECK(ber >= prev);
            prev = ber;
        }
    }
}

TEST_CASE("7-core hex adjacency") {
    // center touches all, ring cores touch center and two ring neighbors
    for (int outer = 2; outer <= 7; ++outer) {
        CHECK(cores_adjacent(1, outer, 7));
        CHECK(cores_adjacent(outer, 1, 7));
    }
    CHECK(cores_adjacent(2, 3, 7));
    CHECK(cores_adjacent(2, 7, 7)); // ring wrap
    CHECK(!cores_adjacent(2, 4, 7));
    CHECK(!cores_adjacent(2, 5, 7));
    CHECK(!cores_adjacent(3, 3, 7));
}

TEST_CASE("empty state is feasible") {
    Topology t = Topology::parse_string(kTwoLink);
    NetworkState state(t);
    OracleConfig cfg;
    auto report = evaluate_state(state, cfg);
    CHECK(report.lightpaths.empty());
    CHECK(report.label == 1);
}

TEST_CASE("single short lightpath: no crosstalk, feasible") {
    Topology t = Topology::parse_string(kTwoLink);
    NetworkState state(t);
    state.commit(make_record(1, {0}, 1, 1, 1, Modulation::QAM16, t));
    OracleConfig cfg;
    auto report = evaluate_state(state, cfg);
    REQUIRE(report.lightpaths.size() == 1);
    CHECK(report.lightpaths[0].xt_linear == 0.0);
    CHECK(report.lightpaths[0].ber < 1e-3);
    CHECK(report.label == 1);

    // independent closed-form recomputation
    // spans = ceil(100/80) = 2; osnr = 58 + 0 - 16 - 5 - 10log10(2)
    double osnr_db = 58.0 - 0.2 * 80.0 - 5.0 - 10.0 * std::log10(2.0);
    double snr_db = osnr_db + 10.0 * std::log10(12.5 / 12.5) - 0.1 * 2;
    double snr = std::pow(10.0, snr_db / 10.0);
    CHECK(report.lightpaths[0].snr_linear == doctest::Approx(snr).epsilon(1e-9));
    CHECK(report.lightpaths[0].ber == doctest::Approx(snr_to_ber(snr, Modulation::QAM16)));
}

TEST_CASE("adjacent-core overlap produces the closed-form crosstalk") {
    Topology t = Topology::parse_string(kTwoLink);
    OracleConfig cfg;
    cfg.xt_coupling_h_per_km = 1e-4;

    NetworkState state(t);
    state.commit(make_record(1, {0}, 1, 1, 4, Modulation::QAM16, t));
    state.commit(make_record(2, {0}, 2, 3, 4, Modulation::QAM16, t)); // overlap slots 3-4
    double expect = 1.0 - std::exp(-2.0 * 1e-4 * 100.0);
    CHECK(aggregate_xt(state, state.lightpath(1), cfg) == doctest::Approx(expect));
    CHECK(aggregate_xt(state, state.lightpath(2), cfg) == doctest::Approx(expect));

    // disjoint slot ranges: no crosstalk
    NetworkState s2(t);
    s2.commit(make_record(1, {0}, 1, 1, 4, Modulation::QAM16, t));
    s2.commit(make_record(2, {0}, 2, 5, 4, Modulation::QAM16, t));
    CHECK(aggregate_xt(s2, s2.lightpath(1), cfg) == 0.0);

    // non-adjacent cores (2 and 4): no crosstalk either
    NetworkState s3(t);
    s3.commit(make_record(1, {0}, 2, 1, 4, Modulation::QAM16, t));
    s3.commit(make_record(2, {0}, 4, 1, 4, Modulation::QAM16, t));
    CHECK(aggregate_xt(s3, s3.lightpath(1), cfg) == 0.0);
}

TEST_CASE("strong coupling drives the state infeasible") {
    Topology t = Topology::parse_string(kTwoLink);
    NetworkState state(t);
    state.commit(make_record(1, {0, 1}, 1, 1, 4, Modulation::QAM16, t));
    state.commit(make_record(2, {0, 1}, 2, 1, 4, Modulation::QAM16, t));

    OracleConfig weak;
    weak.xt_coupling_h_per_km = 1e-9;
    CHECK(evaluate_state(state, weak).label == 1);

    OracleConfig strong;
    strong.xt_coupling_h_per_km = 1e-2;
    CHECK(evaluate_state(state, strong).label == 0);

    // ber monotone in h (parameter sweep)
    double prev = 0.0;
    for (double h : {1e-9, 1e-7, 1e-5, 1e-4, 1e-3, 1e-2}) {
        OracleConfig c;
        c.xt_coupling_h_per_km = h;
        double ber = evaluate_state(state, c).worst_ber;
        CHECK(ber >= prev);
        prev = ber;
    }
}

TEST_CASE("adding an overlapping neighbor never lowers ber; distance monotone") {
    Topology t = Topology::parse_string(kTwoLink);
    OracleConfig cfg;
    cfg.xt_coupling_h_per_km = 1e-4;

    NetworkState state(t);
    state.commit(make_record(1, {0}, 1, 1, 4, Modulation::QPSK, t));
    double lone = evaluate_state(state, cfg).ber_of(1);
    state.commit(make_record(2, {0}, 2, 1, 4, Modulation::QPSK, t));
    double crowded = evaluate_state(state, cfg).ber_of(1);
    CHECK(crowded >= lone);

    // ber monotone in path length (more spans, same modulation)
    NetworkState s1(t);
    s1.commit(make_record(1, {0}, 1, 1, 4, Modulation::QPSK, t));
    NetworkState s2(t);
    s2.commit(make_record(1, {0, 1}, 1, 1, 4, Modulation::QPSK, t));
    CHECK(evaluate_state(s2, cfg).ber_of(1) > evaluate_state(s1, cfg).ber_of(1));
}

TEST_CASE("evaluate_state invariant to insertion order") {
    Topology t = Topology::parse_string(kTwoLink);
    OracleConfig cfg;
    cfg.xt_coupling_h_per_km = 1e-4;
    auto r1 = make_record(1, {0}, 1, 1, 4, Modulation::QAM16, t);
    auto r2 = make_record(2, {0}, 2, 3, 4, Modulation::QPSK, t);
    auto r3 = make_record(3, {1}, 1, 1, 2, Modulation::QAM8, t);

    NetworkState a(t), b(t);
    a.commit(r1); a.commit(r2); a.commit(r3);
    b.commit(r3); b.commit(r2); b.commit(r1);
    auto ra = evaluate_state(a, cfg), rb = evaluate_state(b, cfg);
    REQUIRE(ra.lightpaths.size() == rb.lightpaths.size());
    for (size_t i = 0; i < ra.lightpaths.size(); ++i) {
        CHECK(ra.lightpaths[i].connection == rb.lightpaths[i].connection);
        CHECK(ra.lightpaths[i].ber == rb.lightpaths[i].ber);
    }
}

TEST_CASE("oracle config round trip and validation") {
    OracleConfig cfg;
    cfg.xt_coupling_h_per_km = 3.25e-5;
    std::stringstream ss;
    cfg.write(ss);
    OracleConfig back = OracleConfig::read(ss);
    CHECK(back.xt_coupling_h_per_km == cfg.xt_coupling_h_per_km);
    CHECK(back.ber_threshold == cfg.ber_threshold);

    std::istringstream bad("ber_threshold 0.7\n");
    CHECK_THROWS_AS(OracleConfig::read(bad), ValueError);
    std::istringstream junk("no_such_key 1\n");
    CHECK_THROWS_AS(OracleConfig::read(junk), ParseError);
}

TEST_CASE("pilot infeasible fraction is monotone in h and zero-ish at tiny h") {
    Topology t = Topology::parse_string(R"(
cores 7
slots 4
span_km 80
node a
node b
node c
node d
link a b 200
link b c 200
link c d 200
link a d 200
link a c 300
)");
    TrafficConfig traffic;
    traffic.load_erlangs = 40.0;
    traffic.request_count = 600;
    traffic.seed = 21;
    RscaConfig rsca;

    OracleConfig weak;
    weak.xt_coupling_h_per_km = 1e-9;
    double f_weak = pilot_infeasible_fraction(t, traffic, weak, rsca);
    CHECK(f_weak == 0.0);

    double prev = -1.0;
    for (double h : {1e-6, 1e-4, 1e-2}) {
        OracleConfig c;
        c.xt_coupling_h_per_km = h;
        double f = pilot_infeasible_fraction(t, traffic, c, rsca);
        CHECK(f >= prev);
        prev = f;
    }
}

TEST_CASE("calibrate lands in the target band on a small network") {
    Topology t = Topology::parse_string(R"(
cores 7
slots 4
span_km 80
node a
node b
node c
node d
link a b 200
link b c 200
link c d 200
link a d 200
link a c 300
)");
    TrafficConfig traffic;
    traffic.load_erlangs = 40.0;
    traffic.seed = 13;
    CalibrationOptions opts;
    opts.pilot_requests = 2000;
    OracleConfig cfg;
    auto result = calibrate(cfg, t, traffic, {}, opts);
    CHECK(result.infeasible_fraction >= opts.target_lo);
    CHECK(result.infeasible_fraction <= opts.target_hi);
    CHECK(result.h_per_km > 0.0);

    // inverted range rejected
    CalibrationOptions badr;
    badr.h_lo = 1.0;
    badr.h_hi = 0.5;
    CHECK_THROWS_AS(calibrate(cfg, t, traffic, {}, badr), ValueError);
}
