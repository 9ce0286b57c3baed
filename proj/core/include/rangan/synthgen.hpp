#pragma once

#include <cstdint>
#include <vector>

#include "rangan/frame.hpp"

namespace rangan {

/// Traffic shapes assignable to a simulated UE. UDP kinds run at a fixed
/// nominal 10 Mbps; the other rates are per-profile defaults.
struct TrafficProfile {
    enum class Kind {
        TcpDl,
        TcpUl,
        UdpDl,
        UdpUl,
        FileDownload,
        FileUpload,
        VideoStream,
        WebTraffic,
        RandomPing,
    };

    Kind kind = Kind::TcpDl;
    double rate_mbps = 0.0;  // nominal peak rate

    static TrafficProfile of(Kind kind);
    void validate() const;
};

struct ContentionEvent {
    std::size_t start = 0;
    std::size_t length = 0;
    double severity = 0.5;  // in (0, 1]
};

struct ScenarioSpec {
    std::uint64_t seed = 0;
    std::size_t duration_steps = 0;
    std::vector<TrafficProfile> ue_profiles;      // up to 5
    std::vector<ContentionEvent> contention_events;  // non-overlapping, within [0, T)

    void validate() const;
};

struct GeneratedScenario {
    KpiFrame frame;  // features: fronthaul UL/DL Gbps, CPU runtime fraction,
                     // PTP offset, PTP RMS; labels 1 exactly on event ranges
};

/// Deterministic KPI scenario for a spec. Baselines follow each profile's
/// shape (constant UDP, sawtooth file transfers, diurnal-modulated web and
/// video, bursty ping) plus seeded Gaussian noise. Inside a contention
/// event the fronthaul throughput is multiplicatively depressed by the
/// severity, CPU runtime is pushed toward 1 and PTP noise is inflated; the
/// effect ramps over 3 steps at the event edges (and decays 2 steps past
/// the end, which is what produces false alarms shortly after an event).
GeneratedScenario generate(const ScenarioSpec& spec);

/// Canonical desk-scale benchmark: T = 10000, five distinct profiles and
/// eight contention events of 50-200 steps totaling about 5% of the
/// duration, severities in [0.4, 0.9].
ScenarioSpec default_benchmark_spec(std::uint64_t seed);

/// default_benchmark_spec scaled to another duration (eight events, the
/// same ~5% anomaly budget). Identical to the default at 10000 steps.
ScenarioSpec benchmark_spec(std::uint64_t seed, std::size_t duration_steps);

}  // namespace rangan
