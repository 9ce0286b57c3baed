#include "rangan/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "rangan/rng.hpp"

namespace rangan {
namespace {

constexpr double kDiurnalPeriod = 1250.0;  // several cycles per split
constexpr double kMbpsToGbps = 0.016;      // fronthaul overhead on user traffic
constexpr double kCpuCapacityMbps = 300.0;

bool is_downlink(TrafficProfile::Kind kind) {
    using K = TrafficProfile::Kind;
    return kind == K::TcpDl || kind == K::UdpDl || kind == K::FileDownload ||
           kind == K::VideoStream || kind == K::WebTraffic;
}

// Per-UE nominal trace in Mbps, before noise, clamped to [0, rate].
double profile_shape(const TrafficProfile& p, std::size_t t, double phase, double saw_period) {
    using K = TrafficProfile::Kind;
    const double tt = static_cast<double>(t);
    const double diurnal =
        std::sin(2.0 * std::numbers::pi * tt / kDiurnalPeriod + phase);
    switch (p.kind) {
        case K::UdpDl:
        case K::UdpUl:
            return p.rate_mbps;
        case K::TcpDl:
        case K::TcpUl:
            return p.rate_mbps * (0.65 + 0.3 * diurnal);
        case K::FileDownload:
        case K::FileUpload: {
            const double pos = std::fmod(tt + phase * saw_period, saw_period) / saw_period;
            return p.rate_mbps * pos;  // ramp up, then reset
        }
        case K::VideoStream:
            return p.rate_mbps * (0.75 + 0.2 * diurnal);
        case K::WebTraffic:
            return p.rate_mbps * (0.55 + 0.4 * diurnal);
        case K::RandomPing:
            return 0.0;  // bursts are injected stochastically
    }
    return 0.0;
}

}  // namespace

TrafficProfile TrafficProfile::of(Kind kind) {
    using K = TrafficProfile::Kind;
    TrafficProfile p;
    p.kind = kind;
    switch (kind) {
        case K::TcpDl: p.rate_mbps = 80.0; break;
        case K::TcpUl: p.rate_mbps = 40.0; break;
        case K::UdpDl:
        case K::UdpUl: p.rate_mbps = 10.0; break;
        case K::FileDownload: p.rate_mbps = 120.0; break;
        case K::FileUpload: p.rate_mbps = 60.0; break;
        case K::VideoStream: p.rate_mbps = 25.0; break;
        case K::WebTraffic: p.rate_mbps = 30.0; break;
        case K::RandomPing: p.rate_mbps = 15.0; break;
    }
    return p;
}

void TrafficProfile::validate() const {
    using K = TrafficProfile::Kind;
    if ((kind == K::UdpDl || kind == K::UdpUl) && rate_mbps != 10.0)
        throw ConfigError("scenario.ue_profiles: UDP profiles run at a fixed 10 Mbps");
    if (rate_mbps <= 0.0) throw ConfigError("scenario.ue_profiles: rate_mbps must be positive");
}

void ScenarioSpec::validate() const {
    if (duration_steps == 0) throw ConfigError("scenario.duration_steps must be positive");
    if (ue_profiles.empty() || ue_profiles.size() > 5)
        throw ConfigError("scenario.ue_profiles must hold between 1 and 5 profiles");
    for (const auto& p : ue_profiles) p.validate();
    std::vector<ContentionEvent> sorted = contention_events;
    std::sort(sorted.begin(), sorted.end(),
              [](const ContentionEvent& a, const ContentionEvent& b) { return a.start < b.start; });
    std::size_t prev_end = 0;
    for (const auto& e : sorted) {
        if (e.length == 0) throw ConfigError("scenario.contention_events: length must be positive");
        if (e.severity <= 0.0 || e.severity > 1.0)
            throw ConfigError("scenario.contention_events: severity must lie in (0, 1]");
        if (e.start + e.length > duration_steps)
            throw ConfigError("scenario.contention_events: event exceeds the duration");
        if (e.start < prev_end)
            throw ConfigError("scenario.contention_events: events must not overlap");
        prev_end = e.start + e.length;
    }
}

GeneratedScenario generate(const ScenarioSpec& spec) {
    spec.validate();
    const std::size_t t_total = spec.duration_steps;
    Rng master(spec.seed);

    // contention intensity per step: ramps up over the first 3 in-event
    // steps and decays for 2 steps past the end (unlabeled aftermath)
    std::vector<double> intensity(t_total, 0.0);
    std::vector<std::uint8_t> labels(t_total, 0);
    for (const auto& e : spec.contention_events) {
        for (std::size_t t = e.start; t < e.start + e.length; ++t) {
            const double ramp =
                std::min(1.0, static_cast<double>(t - e.start + 1) / 3.0);
            intensity[t] = std::max(intensity[t], e.severity * ramp);
            labels[t] = 1;
        }
        for (std::size_t off = 0; off < 2; ++off) {
            const std::size_t t = e.start + e.length + off;
            if (t >= t_total) break;
            const double decay = (2.0 - static_cast<double>(off)) / 3.0;
            intensity[t] = std::max(intensity[t], e.severity * decay);
        }
    }

    // per-UE traffic in Mbps
    std::vector<double> dl_mbps(t_total, 0.0), ul_mbps(t_total, 0.0);
    for (std::size_t u = 0; u < spec.ue_profiles.size(); ++u) {
        const TrafficProfile& p = spec.ue_profiles[u];
        Rng rng = master.child(100 + u);
        const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double saw_period = rng.uniform(500.0, 900.0);
        const double noise_sd = 0.04 * p.rate_mbps;

        double burst_left = 0.0;  // random-ping state
        double ar = 0.0;          // smooth per-UE fluctuation
        for (std::size_t t = 0; t < t_total; ++t) {
            ar = 0.9 * ar + rng.normal(0.0, noise_sd);
            double v = profile_shape(p, t, phase, saw_period) + ar;
            if (p.kind == TrafficProfile::Kind::RandomPing) {
                if (burst_left > 0.0) {
                    v += p.rate_mbps * 0.8;
                    burst_left -= 1.0;
                } else if (rng.uniform() < 0.02) {
                    burst_left = 1.0 + static_cast<double>(rng.below(6));
                }
                v = std::abs(v);
            }
            v = std::clamp(v, 0.0, p.rate_mbps);
            if (is_downlink(p.kind))
                dl_mbps[t] += v;
            else
                ul_mbps[t] += v;
        }
    }

    // assemble the KPI channels
    KpiFrame frame;
    frame.feature_names = {"fronthaul_ul_gbps", "fronthaul_dl_gbps", "cpu_runtime",
                           "ptp_offset_us", "ptp_rms_us"};
    frame.timestamps.resize(t_total);
    frame.features.resize(t_total * 5);
    frame.labels = labels;

    Rng kpi_rng = master.child(7);
    double ptp_ar = 0.0, cpu_ar = 0.0;
    for (std::size_t t = 0; t < t_total; ++t) {
        frame.timestamps[t] = static_cast<std::int64_t>(t);
        const double s = intensity[t];

        // contention: throughput multiplicatively depressed; measurement noise
        // clamped to 3 sigma so the nominal-rate bound is hard
        const double ul_noise = std::clamp(kpi_rng.normal(0.0, 0.004), -0.012, 0.012);
        const double dl_noise = std::clamp(kpi_rng.normal(0.0, 0.004), -0.012, 0.012);
        const double ul = std::max(0.0, (ul_mbps[t] * (1.0 - s)) * kMbpsToGbps + ul_noise);
        const double dl = std::max(0.0, (dl_mbps[t] * (1.0 - s)) * kMbpsToGbps + dl_noise);

        // CPU tracks offered load in normal operation, rises toward 1 under
        // contention even though the carried traffic collapses
        cpu_ar = 0.85 * cpu_ar + kpi_rng.normal(0.0, 0.012);
        double cpu = 0.18 + 0.55 * (ul_mbps[t] + dl_mbps[t]) / kCpuCapacityMbps + cpu_ar;
        cpu += (0.97 - cpu) * (0.85 * s);
        cpu = std::clamp(cpu, 0.0, 1.0);

        // PTP wander; variance inflated while threads contend
        const double ptp_sd = 0.5 * (1.0 + 4.0 * s);
        ptp_ar = 0.8 * ptp_ar + kpi_rng.normal(0.0, ptp_sd);
        const double rms =
            std::max(0.0, 0.8 + std::abs(kpi_rng.normal(0.0, 0.15)) * (1.0 + 3.0 * s) +
                              0.8 * s);

        frame.at(t, 0) = ul;
        frame.at(t, 1) = dl;
        frame.at(t, 2) = cpu;
        frame.at(t, 3) = ptp_ar;
        frame.at(t, 4) = rms;
    }

    GeneratedScenario out;
    out.frame = std::move(frame);
    out.frame.validate();
    return out;
}

ScenarioSpec default_benchmark_spec(std::uint64_t seed) { return benchmark_spec(seed, 10000); }

ScenarioSpec benchmark_spec(std::uint64_t seed, std::size_t duration_steps) {
    if (duration_steps < 1600)
        throw ConfigError("scenario.duration_steps: the benchmark needs at least 1600 steps");
    ScenarioSpec spec;
    spec.seed = seed;
    spec.duration_steps = duration_steps;
    using K = TrafficProfile::Kind;
    spec.ue_profiles = {
        TrafficProfile::of(K::TcpDl),        TrafficProfile::of(K::TcpUl),
        TrafficProfile::of(K::UdpDl),        TrafficProfile::of(K::FileDownload),
        TrafficProfile::of(K::WebTraffic),
    };

    // eight events in equal slots: no overlap, both splits covered,
    // lengths total about 5% of the duration
    Rng rng = Rng(seed).child(42);
    const std::size_t slot = duration_steps / 8;
    const std::size_t base = duration_steps / 200;  // 50 at the default duration
    const std::size_t margin = 3 * slot / 25;       // 150 at the default duration
    for (std::size_t i = 0; i < 8; ++i) {
        ContentionEvent e;
        e.length = i == 3 ? 9 * base / 5 + rng.below(2 * base / 5 + 1)  // one longer episode
                          : base + rng.below(2 * base / 5 + 1);
        e.start = i * slot + margin + rng.below(slot - e.length - 2 * margin);
        e.severity = rng.uniform(0.4, 0.9);
        spec.contention_events.push_back(e);
    }
    return spec;
}

}  // namespace rangan
