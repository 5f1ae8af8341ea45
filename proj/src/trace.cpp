#include "msdash/trace.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "msdash/errors.hpp"

namespace msdash {

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

bool parse_double(const std::string& text, double& out) {
    if (text.empty()) {
        return false;
    }
    errno = 0;
    char* end = nullptr;
    out = std::strtod(text.c_str(), &end);
    return errno == 0 && end == text.c_str() + text.size() && std::isfinite(out);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ParseError(path.string(), 0, "cannot open file");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (char ch : line) {
        if (ch == '"') {
            quoted = !quoted;
        } else if (ch == ',' && !quoted) {
            fields.push_back(trim(field));
            field.clear();
        } else {
            field.push_back(ch);
        }
    }
    fields.push_back(trim(field));
    return fields;
}

std::vector<BandwidthTrace> load_vendor_csv(const std::filesystem::path& path, const AdapterConfig& adapter) {
    const std::string origin = path.string();
    const std::string text = read_file(path);
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;

    std::vector<std::string> header;
    while (header.empty() && std::getline(in, line)) {
        ++line_no;
        if (!trim(line).empty()) {
            header = split_csv_row(line);
        }
    }
    if (header.empty()) {
        throw ParseError(origin, line_no, "empty trace file");
    }
    auto column = [&](const std::string& name) -> std::ptrdiff_t {
        if (name.empty()) {
            return -1;
        }
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) {
            throw ParseError(origin, 1, "missing column '" + name + "'");
        }
        return it - header.begin();
    };
    const auto id_col = column(adapter.id_column);
    const auto time_col = column(adapter.time_column);
    const auto value_col = column(adapter.value_column);
    if (value_col < 0) {
        throw ParseError(origin, 1, "adapter names no value column");
    }

    struct Group {
        std::vector<TraceSample> samples;
        std::size_t first_line;
    };
    std::vector<std::string> order;
    std::map<std::string, Group> groups;

    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        const auto fields = split_csv_row(line);
        const auto need = static_cast<std::size_t>(std::max({id_col, time_col, value_col})) + 1;
        if (fields.size() < need) {
            throw ParseError(origin, line_no, "expected at least " + std::to_string(need) + " columns");
        }
        double value = 0.0;
        if (!parse_double(fields[static_cast<std::size_t>(value_col)], value)) {
            throw ParseError(origin, line_no, "bad value '" + fields[static_cast<std::size_t>(value_col)] + "'");
        }
        double kbps = value * adapter.value_scale;
        if (!(kbps > 0.0)) {
            kbps = adapter.floor_kbps;
        }
        const std::string key = id_col >= 0 ? fields[static_cast<std::size_t>(id_col)] : std::string{};
        auto [it, inserted] = groups.try_emplace(key, Group{{}, line_no});
        if (inserted) {
            order.push_back(key);
        }
        auto& samples = it->second.samples;
        double offset = static_cast<double>(samples.size()) * adapter.granularity_s;
        if (time_col >= 0) {
            if (!parse_double(fields[static_cast<std::size_t>(time_col)], offset)) {
                throw ParseError(origin, line_no, "bad time '" + fields[static_cast<std::size_t>(time_col)] + "'");
            }
            if (!samples.empty() && !(offset > samples.back().offset_s)) {
                throw ParseError(origin, line_no, "time offsets must be strictly increasing");
            }
        }
        samples.push_back({offset, kbps});
    }
    if (order.empty()) {
        throw ParseError(origin, line_no, "empty trace");
    }

    const std::string stem = path.stem().string();
    std::vector<BandwidthTrace> traces;
    traces.reserve(order.size());
    for (const auto& key : order) {
        auto& g = groups.at(key);
        traces.emplace_back(key.empty() ? stem : stem + ":" + key, std::move(g.samples), adapter.granularity_s);
    }
    return traces;
}

} // namespace

BandwidthTrace::BandwidthTrace(std::string id, std::vector<TraceSample> samples, double granularity_s)
    : id_(std::move(id)), samples_(std::move(samples)), granularity_(granularity_s) {
    if (samples_.empty()) {
        throw ConfigError("trace '" + id_ + "' is empty");
    }
    const double origin = samples_.front().offset_s;
    for (std::size_t i = 0; i < samples_.size(); ++i) {
        auto& s = samples_[i];
        s.offset_s -= origin;
        if (!(s.kbps > 0.0) || !std::isfinite(s.kbps)) {
            throw ConfigError("trace '" + id_ + "' has a non-positive bandwidth sample");
        }
        if (i > 0 && !(s.offset_s > samples_[i - 1].offset_s)) {
            throw ConfigError("trace '" + id_ + "' offsets are not strictly increasing");
        }
    }
    if (!(granularity_ > 0.0)) {
        granularity_ = samples_.size() > 1 ? samples_[1].offset_s : 1.0;
    }
    duration_ = samples_.back().offset_s + granularity_;

    double sum = 0.0;
    min_ = max_ = samples_.front().kbps;
    for (const auto& s : samples_) {
        sum += s.kbps;
        min_ = std::min(min_, s.kbps);
        max_ = std::max(max_, s.kbps);
    }
    mean_ = sum / static_cast<double>(samples_.size());
}

std::size_t BandwidthTrace::segment_at(double wrapped) const {
    const auto it = std::upper_bound(samples_.begin(), samples_.end(), wrapped,
                                     [](double t, const TraceSample& s) { return t < s.offset_s; });
    return it == samples_.begin() ? 0 : static_cast<std::size_t>(it - samples_.begin()) - 1;
}

double BandwidthTrace::segment_end(std::size_t i) const {
    return i + 1 < samples_.size() ? samples_[i + 1].offset_s : duration_;
}

double BandwidthTrace::bandwidth_at(double t) const {
    if (!(t >= 0.0)) {
        throw UsageError("bandwidth_at requires t >= 0");
    }
    double wrapped = std::fmod(t, duration_);
    return samples_[segment_at(wrapped)].kbps;
}

double BandwidthTrace::download_duration(double start_s, double bytes, double rtt_s) const {
    if (!(bytes > 0.0)) {
        throw UsageError("download size must be positive");
    }
    if (!(rtt_s >= 0.0) || !(start_s >= 0.0)) {
        throw UsageError("download start and rtt must be non-negative");
    }
    double remaining = 8.0 * bytes / 1000.0;
    double pos = std::fmod(start_s + rtt_s, duration_);
    std::size_t i = segment_at(pos);
    double elapsed = 0.0;
    for (;;) {
        const double bw = samples_[i].kbps;
        const double span = segment_end(i) - pos;
        const double capacity = bw * span;
        if (capacity >= remaining) {
            elapsed += remaining / bw;
            break;
        }
        remaining -= capacity;
        elapsed += span;
        i = (i + 1) % samples_.size();
        pos = samples_[i].offset_s;
    }
    return rtt_s + elapsed;
}

double BandwidthTrace::kbit_between(double from_s, double to_s) const {
    if (!(from_s >= 0.0) || to_s < from_s) {
        throw UsageError("kbit_between requires 0 <= from <= to");
    }
    double left = to_s - from_s;
    double pos = std::fmod(from_s, duration_);
    std::size_t i = segment_at(pos);
    double kbit = 0.0;
    while (left > 0.0) {
        const double span = std::min(segment_end(i) - pos, left);
        kbit += samples_[i].kbps * span;
        left -= span;
        i = (i + 1) % samples_.size();
        pos = samples_[i].offset_s;
    }
    return kbit;
}

TraceFormat parse_trace_format(const std::string& name) {
    if (name == "canonical") {
        return TraceFormat::Canonical;
    }
    if (name == "fcc") {
        return TraceFormat::Fcc;
    }
    if (name == "lte") {
        return TraceFormat::Lte;
    }
    throw UsageError("unknown trace format '" + name + "' (expected canonical, fcc or lte)");
}

std::string to_string(TraceFormat format) {
    switch (format) {
    case TraceFormat::Canonical: return "canonical";
    case TraceFormat::Fcc: return "fcc";
    case TraceFormat::Lte: return "lte";
    }
    return "canonical";
}

AdapterConfig AdapterConfig::fcc_default() {
    // FCC "download speed" exports: one row per 10 s measurement, bytes/s per unit.
    return {"unit_id", "", "bytes_sec", 8.0 / 1000.0, 10.0, 1.0};
}

AdapterConfig AdapterConfig::lte_default() {
    // Irish 4G dataset: one file per session, 1 s rows, DL_bitrate already in Kbps.
    return {"", "", "DL_bitrate", 1.0, 1.0, 1.0};
}

AdapterConfig AdapterConfig::defaults_for(TraceFormat format) {
    switch (format) {
    case TraceFormat::Fcc: return fcc_default();
    case TraceFormat::Lte: return lte_default();
    case TraceFormat::Canonical: break;
    }
    return {};
}

BandwidthTrace parse_canonical_trace(const std::string& text, const std::string& id, const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    std::vector<TraceSample> samples;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream row(line);
        std::vector<std::string> fields;
        for (std::string f; row >> f;) {
            fields.push_back(f);
        }
        if (fields.empty()) {
            continue;
        }
        if (fields.size() != 2) {
            throw ParseError(origin, line_no, "expected 'offset_seconds,bandwidth_kbps'");
        }
        TraceSample s{};
        if (!parse_double(fields[0], s.offset_s) || !parse_double(fields[1], s.kbps)) {
            throw ParseError(origin, line_no, "non-numeric field");
        }
        if (!(s.kbps > 0.0)) {
            throw ParseError(origin, line_no, "bandwidth must be positive");
        }
        if (!samples.empty() && !(s.offset_s > samples.back().offset_s)) {
            throw ParseError(origin, line_no, "offsets must be strictly increasing");
        }
        samples.push_back(s);
    }
    if (samples.empty()) {
        throw ParseError(origin, line_no, "empty trace");
    }
    return BandwidthTrace(id, std::move(samples));
}

std::vector<BandwidthTrace> load_traces(const std::filesystem::path& path, TraceFormat format,
                                        const AdapterConfig& adapter) {
    namespace fs = std::filesystem;
    if (fs::is_directory(path)) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(path)) {
            if (entry.is_regular_file() && entry.path().filename().string().front() != '.') {
                files.push_back(entry.path());
            }
        }
        std::sort(files.begin(), files.end());
        if (files.empty()) {
            throw ParseError(path.string(), 0, "directory contains no trace files");
        }
        std::vector<BandwidthTrace> all;
        for (const auto& f : files) {
            auto part = load_traces(f, format, adapter);
            std::move(part.begin(), part.end(), std::back_inserter(all));
        }
        return all;
    }
    if (format == TraceFormat::Canonical) {
        std::vector<BandwidthTrace> one;
        one.push_back(parse_canonical_trace(read_file(path), path.stem().string(), path.string()));
        return one;
    }
    return load_vendor_csv(path, adapter);
}

std::vector<BandwidthTrace> load_traces(const std::filesystem::path& path, TraceFormat format) {
    return load_traces(path, format, AdapterConfig::defaults_for(format));
}

void write_canonical_trace(const BandwidthTrace& trace, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw ConfigError("cannot write " + path.string());
    }
    out << "# id: " << trace.id() << "\n# offset_seconds,bandwidth_kbps\n";
    out.precision(17);
    for (const auto& s : trace.samples()) {
        out << s.offset_s << ',' << s.kbps << '\n';
    }
}

std::vector<BandwidthTrace> filter_by_mean(std::span<const BandwidthTrace> traces, double low_kbps,
                                           double high_kbps) {
    if (!(low_kbps < high_kbps)) {
        throw UsageError("filter_by_mean requires low < high");
    }
    std::vector<BandwidthTrace> kept;
    for (const auto& t : traces) {
        if (t.mean_kbps() >= low_kbps && t.mean_kbps() <= high_kbps) {
            kept.push_back(t);
        }
    }
    return kept;
}

TraceSplit split(const TraceSet& set) {
    const auto n = set.traces.size();
    if (n < 2) {
        throw UsageError("split needs at least two traces");
    }
    if (!(set.train_fraction > 0.0 && set.train_fraction < 1.0)) {
        throw UsageError("train fraction must lie in (0, 1)");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return set.traces[a].id() < set.traces[b].id(); });
    Rng rng = make_rng({set.split_seed});
    for (std::size_t i = n - 1; i > 0; --i) {
        std::swap(order[i], order[uniform_index(rng, i + 1)]);
    }
    const auto n_train = static_cast<std::size_t>(std::floor(set.train_fraction * static_cast<double>(n)));
    TraceSplit out;
    for (std::size_t i = 0; i < n; ++i) {
        (i < n_train ? out.train : out.test).push_back(set.traces[order[i]]);
    }
    return out;
}

double sample_episode_start(const BandwidthTrace& trace, Rng& rng) {
    return uniform01(rng) * trace.duration_s();
}

namespace synth {

namespace {
std::size_t sample_count(double duration_s, double granularity_s) {
    if (!(duration_s > 0.0) || !(granularity_s > 0.0)) {
        throw UsageError("synthetic trace duration and granularity must be positive");
    }
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(duration_s / granularity_s - 1e-9)));
}
} // namespace

BandwidthTrace constant(std::string id, double kbps, double duration_s, double granularity_s) {
    std::vector<TraceSample> samples;
    const auto n = sample_count(duration_s, granularity_s);
    for (std::size_t i = 0; i < n; ++i) {
        samples.push_back({static_cast<double>(i) * granularity_s, kbps});
    }
    return BandwidthTrace(std::move(id), std::move(samples), granularity_s);
}

BandwidthTrace square_wave(std::string id, double high_kbps, double low_kbps, double half_period_s,
                           double duration_s, double granularity_s) {
    if (!(half_period_s > 0.0)) {
        throw UsageError("square wave half period must be positive");
    }
    std::vector<TraceSample> samples;
    const auto n = sample_count(duration_s, granularity_s);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) * granularity_s;
        const bool high = static_cast<long long>(std::floor(t / half_period_s + 1e-9)) % 2 == 0;
        samples.push_back({t, high ? high_kbps : low_kbps});
    }
    return BandwidthTrace(std::move(id), std::move(samples), granularity_s);
}

BandwidthTrace random_walk(std::string id, double min_kbps, double max_kbps, double step_kbps, double duration_s,
                           double granularity_s, Rng& rng) {
    if (!(min_kbps > 0.0) || !(max_kbps >= min_kbps) || !(step_kbps >= 0.0)) {
        throw UsageError("random walk needs 0 < min <= max and step >= 0");
    }
    std::vector<TraceSample> samples;
    const auto n = sample_count(duration_s, granularity_s);
    double x = uniform_real(rng, min_kbps, max_kbps);
    for (std::size_t i = 0; i < n; ++i) {
        samples.push_back({static_cast<double>(i) * granularity_s, x});
        x += uniform_real(rng, -step_kbps, step_kbps);
        if (x > max_kbps) {
            x = 2.0 * max_kbps - x;
        }
        if (x < min_kbps) {
            x = 2.0 * min_kbps - x;
        }
        x = std::clamp(x, min_kbps, max_kbps);
    }
    return BandwidthTrace(std::move(id), std::move(samples), granularity_s);
}

std::vector<BandwidthTrace> random_walk_pool(const std::string& prefix, int count, double min_kbps,
                                             double max_kbps, double step_kbps, double duration_s,
                                             double granularity_s, std::uint64_t seed) {
    Rng rng = make_rng({seed});
    std::vector<BandwidthTrace> pool;
    for (int i = 0; i < count; ++i) {
        pool.push_back(random_walk(prefix + "-" + std::to_string(i), min_kbps, max_kbps, step_kbps, duration_s,
                                   granularity_s, rng));
    }
    return pool;
}

} // namespace synth

} // namespace msdash
