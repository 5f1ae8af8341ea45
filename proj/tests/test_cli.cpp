#include <doctest.h>

#include <fstream>
#include <sstream>

#include "msdash/cli.hpp"
#include "support.hpp"

using namespace msdash;
using nlohmann::json;

namespace {

struct CliResult {
    int code;
    std::string out;
    std::string err;
};

CliResult cli(std::vector<std::string> args) {
    args.insert(args.begin(), "msdash");
    std::vector<const char*> argv;
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<json> records(const std::filesystem::path& p) {
    std::vector<json> out;
    std::ifstream in(p);
    std::string line;
    while (std::getline(in, line)) {
        out.push_back(json::parse(line));
    }
    return out;
}

// Two constant 2 Mbps paths with zero RTT.
std::filesystem::path write_constant_config(const std::filesystem::path& dir) {
    const auto path = dir / "env.json";
    std::ofstream(path) << R"({
        "rtt_ms": [0, 0],
        "paths": [
            {"synthetic": {"count": 3, "min_kbps": 2000, "max_kbps": 2000, "step_kbps": 0}},
            {"synthetic": {"count": 3, "min_kbps": 2000, "max_kbps": 2000, "step_kbps": 0}}
        ]
    })";
    return path;
}

} // namespace

TEST_CASE("throughput on constant 2 Mbps paths never rebuffers") {
    testing::TempDir dir;
    const auto cfg = write_constant_config(dir.path);
    const auto out = dir.path / "run.jsonl";
    const auto r = cli({"run", "--config", cfg.string(), "--policy", "throughput", "--episodes", "10", "--out",
                        out.string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("throughput") != std::string::npos);
    const auto recs = records(out);
    REQUIRE_FALSE(recs.empty());
    CHECK(recs.front()["type"] == "header");
    CHECK(recs.front().contains("seed"));
    int episodes = 0;
    for (const auto& rec : recs) {
        if (rec["type"] == "episode") {
            ++episodes;
            CHECK(rec["rebuffer_penalty"].get<double>() == 0.0);
            CHECK(rec["complete"].get<bool>());
        }
        if (rec["type"] == "chunk") {
            CHECK(rec["stall_samples"].get<int>() == 0);
        }
    }
    CHECK(episodes == 10);
    const auto& summary = recs.back();
    REQUIRE(summary["type"] == "summary");
    const double reward = summary["reward"]["mean"];
    const double utility = summary["utility"]["mean"];
    const double sw = summary["switch_penalty"]["mean"];
    const double rb = summary["rebuffer_penalty"]["mean"];
    CHECK(reward == doctest::Approx(utility - sw - rb));
}

TEST_CASE("runs are byte-identical when repeated, whatever the worker count") {
    testing::TempDir dir;
    const auto a = dir.path / "a.jsonl";
    const auto b = dir.path / "b.jsonl";
    REQUIRE(cli({"run", "--policy", "random", "bola", "--episodes", "6", "--seed", "3", "--out", a.string()}).code == 0);
    REQUIRE(cli({"run", "--policy", "random", "bola", "--episodes", "6", "--seed", "3", "--jobs", "3", "--out",
                 b.string()})
                .code == 0);
    CHECK(slurp(a) == slurp(b));
    CHECK(records(a).front()["seed"] == 3);
}

TEST_CASE("exit codes") {
    CHECK(cli({"run", "--policy", "mpc"}).code == kExitUsage);
    CHECK(cli({"run", "--policy", "external"}).code == kExitUsage);
    CHECK(cli({"frobnicate"}).code == kExitUsage);
    CHECK(cli({"run", "--episodes", "-1"}).code == kExitUsage);
    CHECK(cli({"run", "--config", "/nonexistent/env.json"}).code == kExitConfig);
    CHECK(cli({"run", "--policy", "scripted:/nonexistent/script.txt"}).code == kExitData);
    CHECK(cli({"inspect-trace", "/nonexistent/trace.txt"}).code == kExitData);

    testing::TempDir dir;
    std::ofstream(dir.path / "script.txt") << "1,0\n1,0\n";
    CHECK(cli({"run", "--policy", "scripted:" + (dir.path / "script.txt").string(), "--episodes", "1"}).code ==
          kExitContract);
    std::ofstream(dir.path / "empty.cfg.json") << R"({"paths": [{"synthetic": {"count": 2, "min_kbps": 100, "max_kbps": 100}, "mean_kbps": [500, 600]}]})";
    CHECK(cli({"run", "--config", (dir.path / "empty.cfg.json").string()}).code == kExitConfig);
}

TEST_CASE("inspect-trace") {
    testing::TempDir dir;
    write_canonical_trace(synth::constant("flat", 1000.0, 50.0), dir.path / "flat.txt");
    auto r = cli({"inspect-trace", (dir.path / "flat.txt").string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("flat") != std::string::npos);
    CHECK(r.out.find("1000.00") != std::string::npos);

    const auto stats = trace_stats(load_traces(dir.path / "flat.txt"));
    REQUIRE(stats.size() == 1);
    CHECK(stats[0].mean_kbps == 1000.0);
    CHECK(stats[0].min_kbps == 1000.0);
    CHECK(stats[0].max_kbps == 1000.0);

    write_canonical_trace(synth::constant("high", 3000.0, 50.0), dir.path / "high.txt");
    r = cli({"inspect-trace", dir.path.string(), "--bins", "4"});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("high") != std::string::npos);
    const auto two = trace_stats(load_traces(dir.path));
    const auto hist = mean_histogram(two, 4);
    REQUIRE(hist.size() == 4);
    CHECK(hist.front().count == 1);
    CHECK(hist.back().count == 1);

    std::ofstream(dir.path / "empty.txt").flush();
    r = cli({"inspect-trace", (dir.path / "empty.txt").string()});
    CHECK(r.code == kExitData);
    CHECK(r.err.find("empty.txt") != std::string::npos);
}

TEST_CASE("timeline series") {
    testing::TempDir dir;
    const auto cfg = write_constant_config(dir.path);
    const auto out = dir.path / "tl.jsonl";
    REQUIRE(cli({"timeline", "--config", cfg.string(), "--policy", "fixed:3", "--out", out.string()}).code == 0);
    const auto recs = records(out);
    CHECK(recs.front()["type"] == "header");
    int expected_index = 1;
    int buffer_points = 0;
    for (const auto& rec : recs) {
        if (rec["type"] == "request") {
            CHECK(rec["level"] == 3);
            CHECK(rec["index"] == expected_index++);
        }
        if (rec["type"] == "buffer") {
            ++buffer_points;
            CHECK(rec["buffer_s"].get<double>() <= 34.0);
        }
    }
    CHECK(expected_index == 61);
    CHECK(buffer_points > 60);
}

TEST_CASE("gen-traces writes loadable pools") {
    testing::TempDir dir;
    auto r = cli({"gen-traces", "--out", (dir.path / "walk").string(), "--count", "3", "--duration", "60"});
    REQUIRE(r.code == 0);
    CHECK(load_traces(dir.path / "walk").size() == 3);
    r = cli({"gen-traces", "--out", (dir.path / "sc").string(), "--scenario", "p2-below-500", "--count", "4"});
    REQUIRE(r.code == 0);
    for (const auto& t : load_traces(dir.path / "sc" / "path2")) {
        CHECK(t.mean_kbps() <= 500.0);
    }
    CHECK(cli({"gen-traces"}).code == kExitUsage);
}

TEST_CASE("summary statistics use the sample deviation") {
    const std::vector<double> xs{1.0, 2.0, 3.0, 4.0};
    const MeanStd s = mean_std(xs);
    CHECK(s.mean == 2.5);
    CHECK(s.stddev == doctest::Approx(std::sqrt(5.0 / 3.0)));
    const std::vector<double> one{7.0};
    CHECK(mean_std(one).stddev == 0.0);
}
