#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "rangan/frame.hpp"
#include "rangan/rng.hpp"
#include "rangan/windowing.hpp"
#include "support/oracles.hpp"

using namespace rangan;
namespace fs = std::filesystem;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
    const std::string path = (fs::temp_directory_path() / name).string();
    std::ofstream out(path);
    out << content;
    return path;
}

KpiFrame random_frame(std::size_t t, std::size_t f, Rng& rng, bool labeled) {
    KpiFrame frame;
    for (std::size_t j = 0; j < f; ++j) frame.feature_names.push_back("k" + std::to_string(j));
    for (std::size_t i = 0; i < t; ++i) {
        frame.timestamps.push_back(static_cast<std::int64_t>(i));
        for (std::size_t j = 0; j < f; ++j) frame.features.push_back(rng.uniform(-5, 5));
        if (labeled) frame.labels.push_back(rng.uniform() < 0.15 ? 1 : 0);
    }
    return frame;
}

}  // namespace

TEST_CASE("load_csv parses a well-formed file") {
    const std::string path = write_temp("rangan_ok.csv",
                                        "timestamp,a,b,label\n"
                                        "0,1.5,2,0\n"
                                        "1,2.5,3,0\n"
                                        "2,3.5,4,0\n");
    KpiFrame f = load_csv(path);
    CHECK(f.size() == 3);
    CHECK(f.feature_count() == 2);
    CHECK(f.feature_names[0] == "a");
    CHECK(f.at(2, 0) == 3.5);
    CHECK(f.has_labels());
    for (auto l : f.labels) CHECK(l == 0);
}

TEST_CASE("load_csv forward-fills an empty KPI cell") {
    const std::string path = write_temp("rangan_ff.csv",
                                        "timestamp,a,b\n"
                                        "0,1.0,7\n"
                                        "1,,8\n"
                                        "2,3.0,9\n");
    KpiFrame f = load_csv(path);
    CHECK(f.at(1, 0) == 1.0);  // filled from the previous row
    CHECK(f.at(1, 1) == 8.0);

    // a leading gap has no previous value: zero-filled
    const std::string path2 = write_temp("rangan_ff2.csv",
                                         "timestamp,a\n"
                                         "0,\n"
                                         "1,4\n");
    CHECK(load_csv(path2).at(0, 0) == 0.0);
}

TEST_CASE("load_csv rejects malformed input with the line number") {
    const std::string bad_ts = write_temp("rangan_ts.csv",
                                          "timestamp,a\n"
                                          "5,1\n"
                                          "5,2\n");
    CHECK_THROWS_WITH_AS(load_csv(bad_ts), doctest::Contains("line 3"), ParseError);

    const std::string ragged = write_temp("rangan_rag.csv",
                                          "timestamp,a,b\n"
                                          "0,1,2\n"
                                          "1,3\n");
    CHECK_THROWS_WITH_AS(load_csv(ragged), doctest::Contains("line 3"), ParseError);

    const std::string text = write_temp("rangan_txt.csv",
                                        "timestamp,a\n"
                                        "0,banana\n");
    CHECK_THROWS_AS(load_csv(text), ParseError);
}

TEST_CASE("csv round-trip preserves values and labels") {
    Rng rng(3);
    KpiFrame f = random_frame(40, 3, rng, true);
    const std::string path = (fs::temp_directory_path() / "rangan_rt.csv").string();
    save_csv(f, path);
    KpiFrame g = load_csv(path);
    REQUIRE(g.size() == f.size());
    for (std::size_t i = 0; i < f.features.size(); ++i) CHECK(g.features[i] == f.features[i]);
    CHECK(g.labels == f.labels);
}

TEST_CASE("min-max normalization") {
    KpiFrame f;
    f.feature_names = {"a", "b"};
    f.timestamps = {0, 1, 2};
    f.features = {2, 5, 4, 5, 6, 5};  // a: [2,4,6], b: constant 5
    NormalizationParams p = fit_minmax(f);
    CHECK(p.min[0] == 2.0);
    CHECK(p.max[0] == 6.0);

    KpiFrame n = apply_minmax(f, p);
    CHECK(n.at(0, 0) == 0.0);
    CHECK(n.at(1, 0) == 0.5);
    CHECK(n.at(2, 0) == 1.0);
    for (int t = 0; t < 3; ++t) CHECK(n.at(t, 1) == 0.0);  // constant feature maps to 0

    KpiFrame test;
    test.feature_names = f.feature_names;
    test.timestamps = {10};
    test.features = {100.0, 5.0};  // beyond the training max
    CHECK(apply_minmax(test, p).at(0, 0) == 1.0);
}

TEST_CASE("apply_minmax output stays in [0,1] for arbitrary data") {
    Rng rng(17);
    KpiFrame train = random_frame(60, 4, rng, false);
    KpiFrame test = random_frame(60, 4, rng, false);
    for (auto& v : test.features) v *= 3.0;  // push outside the training range
    NormalizationParams p = fit_minmax(train);
    KpiFrame n = apply_minmax(test, p);
    for (double v : n.features) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("slide analytic counts") {
    Rng rng(1);
    KpiFrame f100 = random_frame(100, 2, rng, false);
    CHECK(slide(f100, 60, 1).count() == 41);

    KpiFrame f10 = random_frame(10, 2, rng, false);
    WindowSet whole = slide(f10, 10, 1);
    REQUIRE(whole.count() == 1);
    for (std::size_t i = 0; i < whole.window_len(); ++i)
        CHECK(whole.windows[i] == f10.features[i]);

    CHECK(slide(f10, 11, 1).count() == 0);  // too short: empty, not an error
    CHECK_THROWS_AS(slide(f10, 0, 1), ContractError);
    CHECK_THROWS_AS(slide(f10, 2, 0), ContractError);
}

TEST_CASE("slide fuzz against the naive oracle") {
    Rng rng(99);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t t = 1 + rng.below(120);
        const int w = 1 + static_cast<int>(rng.below(40));
        const int s = 1 + static_cast<int>(rng.below(10));
        KpiFrame frame = random_frame(t, 1 + rng.below(3), rng, true);
        WindowSet got = slide(frame, w, s);
        oracle::NaiveWindows want = oracle::naive_slide(frame, w, s);

        REQUIRE(got.count() == want.windows.size());
        if (t >= static_cast<std::size_t>(w))
            CHECK(got.count() == (t - static_cast<std::size_t>(w)) /
                                         static_cast<std::size_t>(s) +
                                     1);
        for (std::size_t i = 0; i < got.count(); ++i) {
            CHECK(got.origin_index[i] == want.origins[i]);
            CHECK(got.window_labels[i] == want.labels[i]);
            for (std::size_t j = 0; j < got.window_len(); ++j)
                CHECK(got.window(i)[j] == want.windows[i][j]);
        }
    }
}

TEST_CASE("stride == window tiles the truncated source exactly") {
    Rng rng(5);
    KpiFrame frame = random_frame(103, 2, rng, false);
    const int w = 10;
    WindowSet set = slide(frame, w, w);
    REQUIRE(set.count() == 10);
    std::size_t flat = 0;
    for (std::size_t i = 0; i < set.count(); ++i)
        for (std::size_t j = 0; j < set.window_len(); ++j, ++flat)
            CHECK(set.window(i)[j] == frame.features[flat]);
}

TEST_CASE("window label monotonicity: adding an anomaly never clears labels") {
    Rng rng(21);
    KpiFrame frame = random_frame(80, 2, rng, true);
    WindowSet before = slide(frame, 12, 3);
    frame.labels[40] = 1;
    WindowSet after = slide(frame, 12, 3);
    for (std::size_t i = 0; i < before.count(); ++i)
        CHECK(after.window_labels[i] >= before.window_labels[i]);
}

TEST_CASE("chronological split") {
    Rng rng(2);
    KpiFrame f = random_frame(10, 2, rng, true);
    auto [a, b] = split(f, 0.6);
    CHECK(a.size() == 6);
    CHECK(b.size() == 4);
    CHECK(a.timestamps.back() < b.timestamps.front());
    CHECK(b.at(0, 0) == f.at(6, 0));
    CHECK_THROWS_AS(split(f, 0.0), ContractError);
    CHECK_THROWS_AS(split(f, 1.0), ContractError);
}

TEST_CASE("kpi include-list selection") {
    Rng rng(4);
    KpiFrame f = random_frame(5, 3, rng, true);
    KpiFrame sel = f.select({"k2", "k0"});
    CHECK(sel.feature_count() == 2);
    CHECK(sel.at(3, 0) == f.at(3, 2));
    CHECK(sel.at(3, 1) == f.at(3, 0));
    CHECK_THROWS_AS(f.select({"nope"}), ConfigError);
}
