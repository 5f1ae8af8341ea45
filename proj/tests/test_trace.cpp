#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "msdash/errors.hpp"
#include "msdash/trace.hpp"
#include "support.hpp"

using namespace msdash;

namespace {

BandwidthTrace two_step() { return BandwidthTrace("t", {{0.0, 1000.0}, {10.0, 500.0}}); }

// Mean over one replay period, recomputed from the raw samples.
double period_mean(const BandwidthTrace& t) {
    const auto s = t.samples();
    double area = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double end = i + 1 < s.size() ? s[i + 1].offset_s : s[i].offset_s + t.granularity_s();
        area += s[i].kbps * (end - s[i].offset_s);
    }
    return area / t.duration_s();
}

} // namespace

TEST_CASE("canonical parse infers granularity") {
    const auto t = parse_canonical_trace("0,1500\n10,800\n", "x", "mem");
    CHECK(t.samples().size() == 2);
    CHECK(t.granularity_s() == 10.0);
    CHECK(t.duration_s() == 20.0);
    CHECK(t.mean_kbps() == doctest::Approx(1150.0));
    CHECK(t.min_kbps() == 800.0);
    CHECK(t.max_kbps() == 1500.0);

    const auto ws = parse_canonical_trace("# comment\n5 100\n6 200\n\n7 300\n", "y", "mem");
    CHECK(ws.samples().front().offset_s == 0.0);
    CHECK(ws.samples().size() == 3);
}

TEST_CASE("canonical parse errors carry the line number") {
    try {
        parse_canonical_trace("0,100\n1,abc\n", "x", "file.txt");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
        CHECK(std::string(e.what()).find("file.txt:2") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_canonical_trace("", "x", "f"), ParseError);
    CHECK_THROWS_AS(parse_canonical_trace("0,100\n0,200\n", "x", "f"), ParseError);
    CHECK_THROWS_AS(parse_canonical_trace("0,-5\n", "x", "f"), ParseError);
}

TEST_CASE("vendor adapters place samples on their native grid") {
    testing::TempDir dir;
    const auto fcc = dir.path / "fcc.csv";
    std::ofstream(fcc) << "unit_id,bytes_sec\n7,125000\n7,250000\n7,0\n9,62500\n9,62500\n";
    const auto traces = load_traces(fcc, TraceFormat::Fcc);
    REQUIRE(traces.size() == 2);
    CHECK(traces[0].id() == "fcc:7");
    CHECK(traces[0].granularity_s() == 10.0);
    const auto s = traces[0].samples();
    CHECK(s[0].offset_s == 0.0);
    CHECK(s[1].offset_s == 10.0);
    CHECK(s[2].offset_s == 20.0);
    CHECK(s[0].kbps == doctest::Approx(1000.0));
    CHECK(s[1].kbps == doctest::Approx(2000.0));
    CHECK(s[2].kbps == 1.0);
    CHECK(traces[1].mean_kbps() == doctest::Approx(500.0));

    const auto lte = dir.path / "lte.csv";
    std::ofstream(lte) << "Timestamp,DL_bitrate,UL_bitrate\na,900,1\nb,1100,1\nc,1000,1\n";
    const auto l = load_traces(lte, TraceFormat::Lte);
    REQUIRE(l.size() == 1);
    CHECK(l[0].granularity_s() == 1.0);
    CHECK(l[0].samples()[2].offset_s == 2.0);
    CHECK(l[0].mean_kbps() == doctest::Approx(1000.0));

    const auto bad = dir.path / "bad.csv";
    std::ofstream(bad) << "unit_id,speed\n1,2\n";
    CHECK_THROWS_AS(load_traces(bad, TraceFormat::Fcc), ParseError);
    CHECK_THROWS_AS(load_traces(dir.path / "missing.csv", TraceFormat::Fcc), ParseError);
}

TEST_CASE("directory load is sorted and round-trips canonical files") {
    testing::TempDir dir;
    write_canonical_trace(BandwidthTrace("b", {{0, 200}, {1, 300}}), dir.path / "b.txt");
    write_canonical_trace(BandwidthTrace("a", {{0, 100}, {2, 400}}), dir.path / "a.txt");
    const auto traces = load_traces(dir.path);
    REQUIRE(traces.size() == 2);
    CHECK(traces[0].id() == "a");
    CHECK(traces[0].granularity_s() == 2.0);
    CHECK(traces[1].samples()[1].kbps == 300.0);

    testing::TempDir empty;
    CHECK_THROWS_AS(load_traces(empty.path), ParseError);
}

TEST_CASE("bandwidth lookup circulates") {
    const auto t = two_step();
    CHECK(t.duration_s() == 20.0);
    CHECK(t.bandwidth_at(5.0) == 1000.0);
    CHECK(t.bandwidth_at(15.0) == 500.0);
    CHECK(t.bandwidth_at(25.0) == 1000.0);
    CHECK(t.bandwidth_at(39.999) == 500.0);
    const auto c = synth::constant("c", 750.0, 30.0);
    for (double x : {0.0, 3.3, 29.9, 30.0, 1234.5}) {
        CHECK(c.bandwidth_at(x) == 750.0);
    }
    CHECK_THROWS_AS(t.bandwidth_at(-1.0), UsageError);
}

TEST_CASE("download duration integrates the trace") {
    const auto c = synth::constant("c", 1000.0, 600.0);
    CHECK(c.download_duration(0.0, 125000.0, 0.0) == doctest::Approx(1.0));
    CHECK(c.download_duration(0.0, 125000.0, 0.05) == doctest::Approx(1.05));

    // 1 s at 1000 Kbps then 1000 Kbit at 500 Kbps
    const auto t = two_step();
    CHECK(std::abs(t.download_duration(9.0, 250000.0, 0.0) - 3.0) <= 1e-9);
    // wraps past the end of the period into the 1000 Kbps segment again
    CHECK(t.download_duration(18.0, 250000.0, 0.0) == doctest::Approx(3.0));
    // rtt shifts the transfer start
    CHECK(t.download_duration(8.0, 250000.0, 1.0) == doctest::Approx(4.0));

    CHECK(t.kbit_between(9.0, 12.0) == doctest::Approx(2000.0));
    CHECK(t.kbit_between(0.0, 40.0) == doctest::Approx(30000.0));
    CHECK_THROWS_AS(t.download_duration(0.0, 0.0, 0.0), UsageError);
}

TEST_CASE("download duration agrees with a fine-step integrator") {
    Rng rng = make_rng({99});
    const auto walk = synth::random_walk("w", 100.0, 3000.0, 500.0, 37.0, 1.0, rng);
    for (int k = 0; k < 50; ++k) {
        const double start = uniform_real(rng, 0.0, 100.0);
        const double bytes = uniform_real(rng, 1e4, 2e6);
        const double d = walk.download_duration(start, bytes, 0.0);
        // oracle: step in 1 ms increments until the target is delivered
        const double target = 8.0 * bytes / 1000.0;
        double delivered = 0.0;
        double t = start;
        const double dt = 1e-3;
        while (delivered + walk.bandwidth_at(t) * dt < target) {
            delivered += walk.bandwidth_at(t) * dt;
            t += dt;
        }
        t += (target - delivered) / walk.bandwidth_at(t);
        CHECK(d == doctest::Approx(t - start).epsilon(1e-3));
    }
}

TEST_CASE("mean filter") {
    std::vector<BandwidthTrace> traces{synth::constant("a", 1000.0, 10.0), synth::constant("b", 3000.0, 10.0),
                                       BandwidthTrace("c", {{0, 50}, {1, 350}}), BandwidthTrace("d", {{0, 1500}, {4, 3000}})};
    const auto kept = filter_by_mean(traces, 100.0, 2000.0);
    std::set<std::string> ids;
    for (const auto& t : kept) {
        ids.insert(t.id());
    }
    std::set<std::string> expected;
    for (const auto& t : traces) {
        const double m = period_mean(t);
        if (m >= 100.0 && m <= 2000.0) {
            expected.insert(t.id());
        }
    }
    CHECK(ids == expected);
    CHECK(ids.count("a") == 1);
    CHECK(ids.count("b") == 0);
    CHECK_THROWS_AS(filter_by_mean(traces, 10.0, 10.0), UsageError);
}

TEST_CASE("train/test split") {
    std::vector<BandwidthTrace> ten;
    for (int i = 0; i < 10; ++i) {
        ten.push_back(synth::constant("t" + std::to_string(i), 100.0 + i, 10.0));
    }
    const auto a = split({ten, 42, 0.8});
    CHECK(a.train.size() == 8);
    CHECK(a.test.size() == 2);
    std::set<std::string> seen;
    for (const auto* part : {&a.train, &a.test}) {
        for (const auto& t : *part) {
            CHECK(seen.insert(t.id()).second);
        }
    }
    CHECK(seen.size() == 10);

    auto shuffled = ten;
    std::reverse(shuffled.begin(), shuffled.end());
    const auto b = split({shuffled, 42, 0.8});
    for (std::size_t i = 0; i < a.test.size(); ++i) {
        CHECK(a.test[i].id() == b.test[i].id());
    }

    std::vector<BandwidthTrace> five(ten.begin(), ten.begin() + 5);
    const auto c = split({five, 42, 0.8});
    CHECK(c.train.size() == 4);
    CHECK(c.test.size() == 1);

    CHECK_THROWS_AS(split({{ten[0]}, 42, 0.8}), UsageError);
}

TEST_CASE("episode start offsets are uniform over the trace") {
    const auto t = synth::constant("c", 1000.0, 100.0);
    Rng a = make_rng({5});
    Rng b = make_rng({5});
    CHECK(sample_episode_start(t, a) == sample_episode_start(t, b));

    Rng rng = make_rng({11});
    const int draws = 20000;
    std::vector<int> bins(10, 0);
    for (int i = 0; i < draws; ++i) {
        const double x = sample_episode_start(t, rng);
        REQUIRE(x >= 0.0);
        REQUIRE(x < t.duration_s());
        ++bins[static_cast<std::size_t>(x / 10.0)];
    }
    const double expected = draws / 10.0;
    double chi2 = 0.0;
    for (int n : bins) {
        chi2 += (n - expected) * (n - expected) / expected;
    }
    // chi-square critical value for 9 degrees of freedom at p = 0.001
    CHECK(chi2 < 27.877);
}

TEST_CASE("random walks stay inside their band") {
    const auto pool = synth::random_walk_pool("w", 5, 500.0, 1000.0, 200.0, 600.0, 1.0, 3);
    REQUIRE(pool.size() == 5);
    for (const auto& t : pool) {
        CHECK(t.min_kbps() >= 500.0);
        CHECK(t.max_kbps() <= 1000.0);
        CHECK(t.samples().size() == 600);
    }
    const auto again = synth::random_walk_pool("w", 5, 500.0, 1000.0, 200.0, 600.0, 1.0, 3);
    CHECK(again[4].samples()[599].kbps == pool[4].samples()[599].kbps);

    const auto sq = synth::square_wave("s", 2000.0, 500.0, 5.0, 20.0);
    CHECK(sq.bandwidth_at(1.0) == 2000.0);
    CHECK(sq.bandwidth_at(6.0) == 500.0);
}
