#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>

#include "rangan/synthgen.hpp"

using namespace rangan;

TEST_CASE("spec validation") {
    ScenarioSpec spec = default_benchmark_spec(1);
    spec.contention_events[1].start = spec.contention_events[0].start;  // overlap
    CHECK_THROWS_AS(spec.validate(), ConfigError);

    spec = default_benchmark_spec(1);
    spec.contention_events[0].severity = 1.5;
    CHECK_THROWS_AS(spec.validate(), ConfigError);

    spec = default_benchmark_spec(1);
    spec.ue_profiles.push_back(TrafficProfile::of(TrafficProfile::Kind::VideoStream));
    CHECK_THROWS_AS(spec.validate(), ConfigError);  // six UEs

    TrafficProfile udp = TrafficProfile::of(TrafficProfile::Kind::UdpDl);
    udp.rate_mbps = 20.0;
    CHECK_THROWS_AS(udp.validate(), ConfigError);  // UDP is pinned to 10 Mbps
}

TEST_CASE("zero events means zero labels") {
    ScenarioSpec spec = default_benchmark_spec(3);
    spec.contention_events.clear();
    GeneratedScenario s = generate(spec);
    for (auto l : s.frame.labels) CHECK(l == 0);
}

TEST_CASE("label mass equals the exact sum of event lengths") {
    ScenarioSpec spec = default_benchmark_spec(7);
    GeneratedScenario s = generate(spec);
    std::size_t mass = 0;
    for (auto l : s.frame.labels) mass += l;
    std::size_t want = 0;
    for (const auto& e : spec.contention_events) want += e.length;
    CHECK(mass == want);

    // labels sit exactly on the event ranges
    for (const auto& e : spec.contention_events) {
        CHECK(s.frame.labels[e.start] == 1);
        CHECK(s.frame.labels[e.start + e.length - 1] == 1);
        if (e.start > 0) CHECK(s.frame.labels[e.start - 1] == 0);
        if (e.start + e.length < spec.duration_steps)
            CHECK(s.frame.labels[e.start + e.length] == 0);
    }
}

TEST_CASE("full-severity contention crushes downlink throughput") {
    ScenarioSpec spec = default_benchmark_spec(5);
    spec.contention_events = {{4000, 120, 1.0}};
    GeneratedScenario s = generate(spec);

    double inside = 0.0, outside = 0.0;
    std::size_t n_in = 0, n_out = 0;
    for (std::size_t t = 0; t < spec.duration_steps; ++t) {
        if (s.frame.labels[t]) {
            inside += s.frame.at(t, 1);
            ++n_in;
        } else {
            outside += s.frame.at(t, 1);
            ++n_out;
        }
    }
    inside /= static_cast<double>(n_in);
    outside /= static_cast<double>(n_out);
    CHECK(inside < 0.5 * outside);
}

TEST_CASE("same seed, bit-identical frames") {
    GeneratedScenario a = generate(default_benchmark_spec(9));
    GeneratedScenario b = generate(default_benchmark_spec(9));
    CHECK(a.frame.features == b.frame.features);
    CHECK(a.frame.labels == b.frame.labels);

    GeneratedScenario c = generate(default_benchmark_spec(10));
    CHECK(a.frame.features != c.frame.features);
}

TEST_CASE("out-of-event features are stationary across thirds") {
    GeneratedScenario s = generate(default_benchmark_spec(7));
    const std::size_t t_total = s.frame.size();
    for (std::size_t f = 0; f < s.frame.feature_count(); ++f) {
        if (f == 3) continue;  // the PTP offset is mean-zero by design
        double mean[3] = {0, 0, 0};
        std::size_t count[3] = {0, 0, 0};
        for (std::size_t t = 0; t < t_total; ++t) {
            if (s.frame.labels[t]) continue;
            const std::size_t third = std::min<std::size_t>(2, 3 * t / t_total);
            mean[third] += s.frame.at(t, f);
            ++count[third];
        }
        for (int i = 0; i < 3; ++i) mean[i] /= static_cast<double>(count[i]);
        const double grand = (mean[0] + mean[1] + mean[2]) / 3.0;
        for (int i = 0; i < 3; ++i) {
            INFO("feature ", f, " third ", i, " mean ", mean[i], " grand ", grand);
            CHECK(std::abs(mean[i] - grand) <= 0.10 * std::abs(grand));
        }
    }
}

TEST_CASE("feature ranges: non-negative, traffic bounded by nominal + noise") {
    ScenarioSpec spec = default_benchmark_spec(11);
    GeneratedScenario s = generate(spec);
    double dl_nominal = 0.0, ul_nominal = 0.0;
    using K = TrafficProfile::Kind;
    for (const auto& p : spec.ue_profiles) {
        const bool dl = p.kind == K::TcpDl || p.kind == K::UdpDl || p.kind == K::FileDownload ||
                        p.kind == K::VideoStream || p.kind == K::WebTraffic;
        (dl ? dl_nominal : ul_nominal) += p.rate_mbps;
    }
    const double bound_dl = dl_nominal * 0.016 + 3 * 0.004;
    const double bound_ul = ul_nominal * 0.016 + 3 * 0.004;
    for (std::size_t t = 0; t < s.frame.size(); ++t) {
        CHECK(s.frame.at(t, 0) >= 0.0);
        CHECK(s.frame.at(t, 1) >= 0.0);
        CHECK(s.frame.at(t, 0) <= bound_ul);
        CHECK(s.frame.at(t, 1) <= bound_dl);
        CHECK(s.frame.at(t, 2) >= 0.0);
        CHECK(s.frame.at(t, 2) <= 1.0);
        CHECK(s.frame.at(t, 4) >= 0.0);
    }
}

TEST_CASE("default benchmark spec shape") {
    ScenarioSpec spec = default_benchmark_spec(7);
    CHECK(spec.duration_steps == 10000);
    CHECK(spec.ue_profiles.size() == 5);
    std::set<TrafficProfile::Kind> kinds;
    for (const auto& p : spec.ue_profiles) kinds.insert(p.kind);
    CHECK(kinds.size() == 5);  // distinct profiles

    REQUIRE(spec.contention_events.size() == 8);
    std::size_t total = 0;
    bool in_train = false, in_test = false;
    for (const auto& e : spec.contention_events) {
        CHECK(e.length >= 50);
        CHECK(e.length <= 200);
        CHECK(e.severity >= 0.4);
        CHECK(e.severity <= 0.9);
        total += e.length;
        if (e.start < 6000) in_train = true;
        if (e.start >= 6000) in_test = true;
    }
    CHECK(total >= 300);  // about 5% of 10000
    CHECK(total <= 700);
    CHECK(in_train);
    CHECK(in_test);
    spec.validate();  // non-overlap etc.

    // the scaled variant matches the default at the default duration
    ScenarioSpec scaled = benchmark_spec(7, 10000);
    for (std::size_t i = 0; i < 8; ++i) {
        CHECK(scaled.contention_events[i].start == spec.contention_events[i].start);
        CHECK(scaled.contention_events[i].length == spec.contention_events[i].length);
    }
    benchmark_spec(3, 2000).validate();
}
