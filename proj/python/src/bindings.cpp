#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "msdash/actions.hpp"
#include "msdash/cli.hpp"
#include "msdash/env.hpp"
#include "msdash/errors.hpp"
#include "msdash/media.hpp"
#include "msdash/policy.hpp"
#include "msdash/trace.hpp"

namespace py = pybind11;
using namespace msdash;

namespace {

EnvConfig config_from(const std::optional<std::string>& json_text, const std::optional<std::string>& scenario) {
    EnvConfig cfg = json_text ? env_config_from_json(nlohmann::json::parse(*json_text, nullptr, true, true))
                              : default_env_config();
    if (scenario) {
        cfg = scenario_config(*scenario, cfg);
    }
    return cfg;
}

py::dict breakdown_dict(const EpisodeBreakdown& b) {
    py::dict d;
    d["reward"] = b.reward;
    d["utility"] = b.utility;
    d["switch_penalty"] = b.switch_penalty;
    d["rebuffer_penalty"] = b.rebuffer_penalty;
    d["rebuffer_s"] = b.rebuffer_s;
    d["startup_delay_s"] = b.startup_delay_s;
    return d;
}

py::dict info_dict(const EnvInfo& info) {
    py::dict d;
    d["path"] = info.path;
    d["time"] = info.time;
    d["substituted"] = info.substituted;
    d["trace_ids"] = info.trace_ids;
    d["raw_observation"] = info.raw_observation;
    d["episode"] = info.episode ? py::object(breakdown_dict(*info.episode)) : py::object(py::none());
    return d;
}

py::tuple step_tuple(const EnvStep& s) {
    return py::make_tuple(s.observation, s.mask.bits, s.reward, s.done, info_dict(s.info));
}

ChunkSet chunk_set(int num_chunks, const std::vector<int>& indices) {
    ChunkSet set(num_chunks);
    for (int i : indices) {
        if (i < 1 || i > num_chunks) {
            throw UsageError("chunk index " + std::to_string(i) + " outside 1.." + std::to_string(num_chunks));
        }
        set.insert(i);
    }
    return set;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Multi-source DASH streaming simulator core";

    py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_RuntimeError);
    py::register_exception<ParseError>(m, "ParseError", PyExc_RuntimeError);
    py::register_exception<ContractViolation>(m, "ContractViolation", PyExc_RuntimeError);

    m.def("default_bitrates_kbps", [] { return default_bitrates_kbps(); });

    py::class_<QualityLadder>(m, "QualityLadder")
        .def(py::init<std::vector<double>>(), py::arg("bitrates_kbps"))
        .def("__len__", &QualityLadder::size)
        .def("bitrate_kbps", &QualityLadder::bitrate_kbps)
        .def("utility", &QualityLadder::utility);
    m.def("utility_of", &utility_of, py::arg("ladder"), py::arg("level"));

    py::class_<RewardConfig>(m, "RewardConfig")
        .def(py::init<>())
        .def_readwrite("beta", &RewardConfig::beta)
        .def_readwrite("gamma", &RewardConfig::gamma)
        .def_readwrite("delta", &RewardConfig::delta)
        .def_readwrite("buffer_min_s", &RewardConfig::buffer_min_s);
    m.def(
        "step_reward",
        [](const std::vector<std::pair<double, double>>& played, double rebuffer_s, const RewardConfig& cfg) {
            std::vector<PlayedUtility> p;
            for (const auto& [q, prev] : played) {
                p.push_back({q, prev});
            }
            return step_reward(p, rebuffer_s, cfg);
        },
        py::arg("played"), py::arg("rebuffer_s"), py::arg("cfg") = RewardConfig{});
    m.def("single_source_reward", &single_source_reward, py::arg("utility"), py::arg("prev_utility"),
          py::arg("rebuffer_s"), py::arg("buffer_s"), py::arg("cfg") = RewardConfig{});
    m.def("single_source_rebuffer", &single_source_rebuffer);

    py::class_<BandwidthTrace>(m, "BandwidthTrace")
        .def(py::init([](std::string id, const std::vector<std::pair<double, double>>& samples, double gran) {
                 std::vector<TraceSample> s;
                 for (const auto& [t, k] : samples) {
                     s.push_back({t, k});
                 }
                 return BandwidthTrace(std::move(id), std::move(s), gran);
             }),
             py::arg("id"), py::arg("samples"), py::arg("granularity_s") = 0.0)
        .def_property_readonly("id", &BandwidthTrace::id)
        .def_property_readonly("duration_s", &BandwidthTrace::duration_s)
        .def_property_readonly("granularity_s", &BandwidthTrace::granularity_s)
        .def_property_readonly("mean_kbps", &BandwidthTrace::mean_kbps)
        .def_property_readonly("min_kbps", &BandwidthTrace::min_kbps)
        .def_property_readonly("max_kbps", &BandwidthTrace::max_kbps)
        .def("bandwidth_at", &BandwidthTrace::bandwidth_at)
        .def("download_duration", &BandwidthTrace::download_duration, py::arg("start_s"), py::arg("bytes"),
             py::arg("rtt_s") = 0.0);
    m.def(
        "load_traces",
        [](const std::filesystem::path& path, const std::string& format) {
            return load_traces(path, parse_trace_format(format));
        },
        py::arg("path"), py::arg("format") = "canonical");
    m.def("random_walk_pool", &synth::random_walk_pool, py::arg("prefix"), py::arg("count"), py::arg("min_kbps"),
          py::arg("max_kbps"), py::arg("step_kbps"), py::arg("duration_s"), py::arg("granularity_s"),
          py::arg("seed"));
    m.def(
        "filter_by_mean",
        [](const std::vector<BandwidthTrace>& traces, double lo, double hi) { return filter_by_mean(traces, lo, hi); });
    m.def(
        "split_ids",
        [](const std::vector<BandwidthTrace>& traces, std::uint64_t seed, double fraction) {
            const TraceSplit s = split({traces, seed, fraction});
            std::vector<std::string> train, test;
            for (const auto& t : s.train) {
                train.push_back(t.id());
            }
            for (const auto& t : s.test) {
                test.push_back(t.id());
            }
            return py::make_tuple(train, test);
        },
        py::arg("traces"), py::arg("seed") = 42, py::arg("train_fraction") = 0.8);

    m.def(
        "compute_mask",
        [](const std::string& space, int window, int levels, int playing_index, const std::vector<int>& requested,
           int num_chunks) {
            const ActionSpace s{parse_action_space(space), window, levels};
            return compute_mask(s, playing_index, chunk_set(num_chunks, requested), num_chunks).bits;
        },
        py::arg("space"), py::arg("window"), py::arg("levels"), py::arg("playing_index"), py::arg("requested"),
        py::arg("num_chunks"));
    m.def(
        "greedy_next_index",
        [](int playing_index, const std::vector<int>& requested, int num_chunks, int window) {
            return greedy_next_index(playing_index, chunk_set(num_chunks, requested), num_chunks, window);
        },
        py::arg("playing_index"), py::arg("requested"), py::arg("num_chunks"), py::arg("window"));
    m.def(
        "throughput_rule",
        [](const std::vector<double>& history, const QualityLadder& ladder) { return throughput_rule(history, ladder); },
        py::arg("history_kbps"), py::arg("ladder"));
    m.def(
        "bola_rule",
        [](double buffer_s, const QualityLadder& ladder, double chunk_length_s, double top_buffer_s) {
            return bola_rule(buffer_s, ladder, derive_bola_params(ladder, chunk_length_s, top_buffer_s));
        },
        py::arg("buffer_s"), py::arg("ladder"), py::arg("chunk_length_s") = 4.0, py::arg("top_buffer_s") = 24.0);

    m.def("scenario_names", &scenario_names);
    m.def("default_config_json", [] { return env_config_to_json(default_env_config()).dump(); });

    py::class_<StreamingEnv>(m, "StreamingEnv")
        .def(py::init([](std::optional<std::string> config_json, std::optional<std::string> scenario) {
                 return StreamingEnv(config_from(config_json, scenario));
             }),
             py::arg("config_json") = py::none(), py::arg("scenario") = py::none())
        .def(
            "reset",
            [](StreamingEnv& env, std::uint64_t seed) {
                const EnvStep s = env.reset(seed);
                return py::make_tuple(s.observation, s.mask.bits, info_dict(s.info));
            },
            py::arg("seed") = 0)
        .def("step", [](StreamingEnv& env, int action) { return step_tuple(env.step(action)); }, py::arg("action"))
        .def_property_readonly("observation_size", &StreamingEnv::observation_size)
        .def_property_readonly("action_size", [](const StreamingEnv& env) { return env.action_space().size(); })
        .def_property_readonly("done", &StreamingEnv::done)
        .def("observation_scales", &StreamingEnv::observation_scales)
        .def("episode_log_jsonl", [](const StreamingEnv& env) {
            std::ostringstream out;
            write_jsonl(out, env.engine().log());
            return out.str();
        });

    m.def(
        "run_policy",
        [](const std::string& policy, int episodes, std::optional<std::string> config_json,
           std::optional<std::string> scenario, int jobs) {
            const EnvConfig cfg = config_from(config_json, scenario);
            std::vector<EpisodeResult> results;
            {
                py::gil_scoped_release release;
                results = run_batch(cfg, policy, episodes, jobs);
            }
            py::list out;
            for (const auto& r : results) {
                py::dict d = breakdown_dict(r.log.breakdown);
                d["episode"] = r.episode;
                d["step_reward_sum"] = r.step_reward_sum;
                out.append(d);
            }
            return out;
        },
        py::arg("policy"), py::arg("episodes"), py::arg("config_json") = py::none(), py::arg("scenario") = py::none(),
        py::arg("jobs") = 1);

    m.def(
        "run_cli",
        [](std::vector<std::string> args) {
            args.insert(args.begin(), "msdash");
            std::vector<const char*> argv;
            for (const auto& a : args) {
                argv.push_back(a.c_str());
            }
            std::ostringstream out, err;
            const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"));
}
