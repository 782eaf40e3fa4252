#include "ems/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "text_io.hpp"

namespace ems {

namespace {

constexpr double kRangeTolerance = 1e-6;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool is_data_line(std::string_view line) { return !detail::trim(line).empty(); }

// Fills non-finite entries by linear interpolation between the nearest finite
// neighbours; leading/trailing gaps take the nearest finite value.
bool impute_gaps(std::vector<double>& v)
{
    std::vector<std::size_t> valid;
    for (std::size_t i = 0; i < v.size(); ++i)
        if (std::isfinite(v[i]))
            valid.push_back(i);
    if (valid.empty())
        return false;
    if (valid.size() == v.size())
        return true;

    for (std::size_t i = 0; i < valid.front(); ++i)
        v[i] = v[valid.front()];
    for (std::size_t i = valid.back() + 1; i < v.size(); ++i)
        v[i] = v[valid.back()];
    for (std::size_t k = 0; k + 1 < valid.size(); ++k) {
        const std::size_t a = valid[k], b = valid[k + 1];
        for (std::size_t i = a + 1; i < b; ++i) {
            const double t = static_cast<double>(i - a) / static_cast<double>(b - a);
            v[i] = v[a] + t * (v[b] - v[a]);
        }
    }
    return true;
}

void check_fps(double fps)
{
    if (!(fps > 0.0) || !std::isfinite(fps))
        throw Error(ErrorCode::InvalidArgument, "fps must be finite and > 0");
}

} // namespace

FeatureSeries make_feature_series(Matrix data, double fps)
{
    check_fps(fps);
    if (data.cols() != kChannelCount)
        throw Error(ErrorCode::MissingChannel,
                    "expected " + std::to_string(kChannelCount) + " channels, got " +
                        std::to_string(data.cols()));
    for (std::size_t r = 0; r < data.rows(); ++r)
        for (std::size_t c = 0; c < data.cols(); ++c)
            if (!std::isfinite(data(r, c)))
                throw Error(ErrorCode::MalformedRow, "non-finite value at frame " + std::to_string(r));
    return FeatureSeries{std::move(data), fps};
}

AnnotationTrace make_annotation_trace(EmotionState state, std::vector<double> values, double fps)
{
    check_fps(fps);
    if (values.size() < 2)
        throw Error(ErrorCode::TooShort, "annotation trace needs at least 2 frames");
    for (std::size_t i = 0; i < values.size(); ++i) {
        double& v = values[i];
        if (!std::isfinite(v) || std::abs(v) > 1.0 + kRangeTolerance) {
            std::ostringstream msg;
            msg << "(" << i << ", " << v << ")";
            throw Error(ErrorCode::OutOfRange, msg.str());
        }
        v = std::clamp(v, -1.0, 1.0);
    }
    return AnnotationTrace{state, std::move(values), fps};
}

FeatureSeries read_feature_series(std::istream& in, double fps)
{
    check_fps(fps);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_data_line(line))
            break;
    }
    if (!is_data_line(line))
        throw Error(ErrorCode::EmptyFile, "feature file has no header");

    const auto header = detail::split(line, ',');
    std::vector<int> target(header.size(), -1); // file column -> canonical channel
    int frame_col = -1;
    std::array<bool, kChannelCount> seen{};
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == "frame") {
            frame_col = static_cast<int>(i);
            continue;
        }
        if (auto idx = channel_index(header[i])) {
            if (seen[*idx])
                throw Error(ErrorCode::MalformedRow, "duplicate column " + std::string(header[i]));
            seen[*idx] = true;
            target[i] = static_cast<int>(*idx);
        }
    }
    for (std::size_t c = 0; c < kChannelCount; ++c)
        if (!seen[c])
            throw Error(ErrorCode::MissingChannel, std::string(kChannelNames[c]));

    std::array<std::vector<double>, kChannelCount> columns;
    double last_frame = -std::numeric_limits<double>::infinity();
    while (std::getline(in, line)) {
        ++line_no;
        if (!is_data_line(line))
            continue;
        const auto cells = detail::split(line, ',');
        if (cells.size() != header.size())
            throw Error(ErrorCode::MalformedRow, "line " + std::to_string(line_no));
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (static_cast<int>(i) == frame_col) {
                auto f = detail::parse_double(cells[i]);
                if (!f || !(*f > last_frame))
                    throw Error(ErrorCode::MalformedRow,
                                "line " + std::to_string(line_no) + ": frame column not monotone");
                last_frame = *f;
                continue;
            }
            if (target[i] < 0)
                continue;
            double v = kNaN;
            if (!cells[i].empty()) {
                auto parsed = detail::parse_double(cells[i]);
                if (!parsed) {
                    // tolerate textual non-finite markers as gaps
                    const std::string_view s = cells[i];
                    if (s != "nan" && s != "NaN" && s != "NA" && s != "inf" && s != "-inf")
                        throw Error(ErrorCode::MalformedRow, "line " + std::to_string(line_no));
                } else {
                    v = *parsed;
                }
            }
            columns[static_cast<std::size_t>(target[i])].push_back(v);
        }
    }
    const std::size_t frames = columns[0].size();
    if (frames == 0)
        throw Error(ErrorCode::EmptyFile, "feature file has no rows");

    Matrix data(frames, kChannelCount);
    for (std::size_t c = 0; c < kChannelCount; ++c) {
        if (!impute_gaps(columns[c]))
            throw Error(ErrorCode::MissingChannel,
                        std::string(kChannelNames[c]) + " has no valid values");
        for (std::size_t r = 0; r < frames; ++r)
            data(r, c) = columns[c][r];
    }
    return FeatureSeries{std::move(data), fps};
}

FeatureSeries load_feature_series(const std::filesystem::path& path, double fps)
{
    auto in = detail::open_input(path);
    return read_feature_series(in, fps);
}

void write_feature_series(const FeatureSeries& series, std::ostream& out)
{
    out << "frame";
    for (auto name : kChannelNames)
        out << ',' << name;
    out << '\n';
    for (std::size_t r = 0; r < series.frames(); ++r) {
        out << r;
        for (double v : series.data.row(r))
            out << ',' << detail::format_double(v);
        out << '\n';
    }
}

void save_feature_series(const FeatureSeries& series, const std::filesystem::path& path)
{
    auto out = detail::open_output(path);
    write_feature_series(series, out);
}

AnnotationTrace read_annotation_trace(std::istream& in, EmotionState state, double fps)
{
    std::string line;
    std::size_t line_no = 0;
    int rating_col = -1;
    std::size_t expected_cells = 0;
    std::vector<double> values;
    while (std::getline(in, line)) {
        ++line_no;
        if (!is_data_line(line))
            continue;
        const auto cells = detail::split(line, ',');
        if (rating_col < 0) {
            // header or first data row decides the layout
            expected_cells = cells.size();
            if (cells.size() == 1) {
                rating_col = 0;
                if (cells[0] == "rating")
                    continue;
            } else if (cells.size() == 2 && cells[0] == "frame" && cells[1] == "rating") {
                rating_col = 1;
                continue;
            } else if (cells.size() == 2 && detail::parse_double(cells[0]) &&
                       detail::parse_double(cells[1])) {
                rating_col = 1;
            } else {
                throw Error(ErrorCode::MalformedRow, "line " + std::to_string(line_no));
            }
        }
        if (cells.size() != expected_cells)
            throw Error(ErrorCode::MalformedRow, "line " + std::to_string(line_no));
        auto v = detail::parse_double(cells[static_cast<std::size_t>(rating_col)]);
        if (!v)
            throw Error(ErrorCode::MalformedRow, "line " + std::to_string(line_no));
        values.push_back(*v);
    }
    if (values.empty())
        throw Error(ErrorCode::EmptyFile, "trace file has no rows");
    return make_annotation_trace(state, std::move(values), fps);
}

AnnotationTrace load_annotation_trace(const std::filesystem::path& path, EmotionState state, double fps)
{
    auto in = detail::open_input(path);
    return read_annotation_trace(in, state, fps);
}

void write_annotation_trace(const AnnotationTrace& trace, std::ostream& out)
{
    out << "frame,rating\n";
    for (std::size_t i = 0; i < trace.values.size(); ++i)
        out << i << ',' << detail::format_double(trace.values[i]) << '\n';
}

void save_annotation_trace(const AnnotationTrace& trace, const std::filesystem::path& path)
{
    auto out = detail::open_output(path);
    write_annotation_trace(trace, out);
}

std::pair<FeatureSeries, AnnotationTrace> align(const FeatureSeries& features,
                                                const AnnotationTrace& trace)
{
    if (features.frames() == 0 || trace.frames() == 0)
        throw Error(ErrorCode::EmptyInput, "align needs nonempty inputs");
    const double ratio = features.fps / trace.fps;
    if (!std::isfinite(ratio) || !(ratio > 0.0))
        throw Error(ErrorCode::IncompatibleRates, "feature/trace fps ratio is not finite and positive");

    AnnotationTrace resampled = trace;
    if (ratio != 1.0) {
        const std::size_t len = trace.frames();
        const auto target = static_cast<std::size_t>(std::llround(static_cast<double>(len) * ratio));
        resampled.values.assign(std::max<std::size_t>(target, 1), 0.0);
        for (std::size_t i = 0; i < resampled.values.size(); ++i) {
            const double pos = std::min(static_cast<double>(i) / ratio, static_cast<double>(len - 1));
            const auto lo = static_cast<std::size_t>(std::floor(pos));
            const std::size_t hi = std::min(lo + 1, len - 1);
            const double t = pos - static_cast<double>(lo);
            resampled.values[i] = trace.values[lo] + t * (trace.values[hi] - trace.values[lo]);
        }
        resampled.fps = features.fps;
    }

    const std::size_t n = std::min(features.frames(), resampled.frames());
    FeatureSeries f = features;
    if (f.frames() > n) {
        std::vector<std::size_t> keep(n);
        for (std::size_t i = 0; i < n; ++i)
            keep[i] = i;
        f.data = f.data.select_rows(keep);
    }
    resampled.values.resize(n);
    return {std::move(f), std::move(resampled)};
}

// ---------------------------------------------------------------------------

std::string_view to_string(CouplingKind k)
{
    switch (k) {
    case CouplingKind::Independent: return "independent";
    case CouplingKind::Linear: return "linear";
    case CouplingKind::Quadratic: return "quadratic";
    case CouplingKind::Sinusoidal: return "sinusoidal";
    case CouplingKind::Cumulative: return "cumulative";
    }
    return "independent";
}

namespace {

std::optional<CouplingKind> parse_coupling_kind(std::string_view s)
{
    for (auto k : {CouplingKind::Independent, CouplingKind::Linear, CouplingKind::Quadratic,
                   CouplingKind::Sinusoidal, CouplingKind::Cumulative})
        if (to_string(k) == s)
            return k;
    return std::nullopt;
}

double coupling_response(const Coupling& c, double rating)
{
    switch (c.kind) {
    case CouplingKind::Independent: return 0.0;
    case CouplingKind::Linear:
    case CouplingKind::Cumulative: return rating;
    case CouplingKind::Quadratic: return rating * rating;
    case CouplingKind::Sinusoidal: return std::sin(2.0 * std::numbers::pi * c.frequency * rating);
    }
    return 0.0;
}

} // namespace

Session synth_session(const SynthConfig& cfg)
{
    check_fps(cfg.fps);
    if (cfg.n_frames < 2)
        throw Error(ErrorCode::InvalidPlan, "n_frames must be at least 2");
    if (!(cfg.noise >= 0.0))
        throw Error(ErrorCode::InvalidArgument, "noise must be >= 0");
    std::size_t total = 0;
    for (const auto& seg : cfg.plan)
        total += seg.frames;
    if (total != cfg.n_frames)
        throw Error(ErrorCode::InvalidPlan, "segment durations sum to " + std::to_string(total) +
                                                ", n_frames is " + std::to_string(cfg.n_frames));

    RegionLabels labels;
    std::vector<double> slopes;
    labels.reserve(cfg.n_frames);
    for (const auto& seg : cfg.plan) {
        labels.insert(labels.end(), seg.frames, seg.kind);
        slopes.insert(slopes.end(), seg.frames, seg.slope);
    }

    std::vector<double> rating(cfg.n_frames);
    rating[0] = std::clamp(cfg.initial, -1.0, 1.0);
    for (std::size_t i = 1; i < cfg.n_frames; ++i)
        rating[i] = std::clamp(rating[i - 1] + slopes[i - 1], -1.0, 1.0);

    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix data(cfg.n_frames, kChannelCount);
    std::array<double, kChannelCount> accumulated{};
    for (std::size_t i = 0; i < cfg.n_frames; ++i) {
        const auto region = static_cast<std::size_t>(labels[i]);
        for (std::size_t c = 0; c < kChannelCount; ++c) {
            const Coupling& cp = cfg.couplings[c];
            double v = cp.region_gain[region] * cp.gain * coupling_response(cp, rating[i]);
            if (cp.kind == CouplingKind::Cumulative) {
                // integrates the response over time; noise is not integrated
                if (i > 0)
                    accumulated[c] += v / cfg.fps;
                v = accumulated[c];
            }
            v += cp.offset;
            if (cfg.noise > 0.0)
                v += cfg.noise * gauss(rng);
            data(i, c) = v;
        }
    }

    Session s;
    s.id = cfg.id;
    s.features = FeatureSeries{std::move(data), cfg.fps};
    s.traces.emplace(cfg.state, AnnotationTrace{cfg.state, std::move(rating), cfg.fps});
    s.regions.emplace(cfg.state, std::move(labels));
    return s;
}

SynthConfig parse_synth_manifest(std::istream& in)
{
    SynthConfig cfg;
    std::string line;
    std::size_t line_no = 0;
    auto bad = [&](const std::string& why) {
        return Error(ErrorCode::InvalidArgument, "manifest line " + std::to_string(line_no) + ": " + why);
    };
    auto number = [&](std::string_view v) {
        auto d = detail::parse_double(v);
        if (!d)
            throw bad("expected a number, got '" + std::string(v) + "'");
        return *d;
    };
    auto count = [&](std::string_view v) {
        auto i = detail::parse_int(v);
        if (!i || *i < 0)
            throw bad("expected a non-negative integer, got '" + std::string(v) + "'");
        return static_cast<std::size_t>(*i);
    };

    while (std::getline(in, line)) {
        ++line_no;
        auto text = detail::trim(line);
        if (text.empty() || text.front() == '#')
            continue;
        const auto eq = text.find('=');
        if (eq == std::string_view::npos)
            throw bad("expected key=value");
        const auto key = detail::trim(text.substr(0, eq));
        const auto value = detail::trim(text.substr(eq + 1));

        if (key == "id") {
            cfg.id = std::string(value);
        } else if (key == "n_frames") {
            cfg.n_frames = count(value);
        } else if (key == "fps") {
            cfg.fps = number(value);
        } else if (key == "state") {
            auto s = parse_state(value);
            if (!s)
                throw bad("unknown state '" + std::string(value) + "'");
            cfg.state = *s;
        } else if (key == "initial") {
            cfg.initial = number(value);
        } else if (key == "noise") {
            cfg.noise = number(value);
        } else if (key == "seed") {
            auto i = detail::parse_int(value);
            if (!i)
                throw bad("bad seed");
            cfg.seed = static_cast<std::uint64_t>(*i);
        } else if (key == "plan") {
            cfg.plan.clear();
            for (auto item : detail::split(value, ',')) {
                const auto parts = detail::split(item, ':');
                if (parts.size() != 3)
                    throw bad("plan segment must be KIND:frames:slope");
                auto kind = parse_region(parts[0]);
                if (!kind)
                    throw bad("unknown region '" + std::string(parts[0]) + "'");
                cfg.plan.push_back(PlanSegment{*kind, count(parts[1]), number(parts[2])});
            }
        } else if (key.starts_with("couple.") || key.starts_with("gate.")) {
            const bool gate = key.starts_with("gate.");
            const auto channel = key.substr(gate ? 5 : 7);
            auto idx = channel_index(channel);
            if (!idx)
                throw bad("unknown channel '" + std::string(channel) + "'");
            Coupling& cp = cfg.couplings[*idx];
            if (gate) {
                const auto parts = detail::split(value, ',');
                if (parts.size() != 3)
                    throw bad("gate needs three region gains");
                for (std::size_t r = 0; r < 3; ++r)
                    cp.region_gain[r] = number(parts[r]);
            } else {
                const auto parts = detail::split(value, ':');
                auto kind = parse_coupling_kind(parts[0]);
                if (!kind || parts.size() > 4)
                    throw bad("coupling must be kind[:gain[:offset[:frequency]]]");
                cp.kind = *kind;
                if (parts.size() > 1)
                    cp.gain = number(parts[1]);
                if (parts.size() > 2)
                    cp.offset = number(parts[2]);
                if (parts.size() > 3)
                    cp.frequency = number(parts[3]);
            }
        } else {
            throw bad("unknown key '" + std::string(key) + "'");
        }
    }
    return cfg;
}

std::string format_synth_manifest(const SynthConfig& cfg)
{
    using detail::format_double;
    std::ostringstream out;
    out << "id=" << cfg.id << '\n'
        << "n_frames=" << cfg.n_frames << '\n'
        << "fps=" << format_double(cfg.fps) << '\n'
        << "state=" << to_string(cfg.state) << '\n'
        << "initial=" << format_double(cfg.initial) << '\n'
        << "noise=" << format_double(cfg.noise) << '\n'
        << "seed=" << cfg.seed << '\n'
        << "plan=";
    for (std::size_t i = 0; i < cfg.plan.size(); ++i) {
        const auto& seg = cfg.plan[i];
        out << (i ? "," : "") << to_string(seg.kind) << ':' << seg.frames << ':'
            << format_double(seg.slope);
    }
    out << '\n';
    for (std::size_t c = 0; c < kChannelCount; ++c) {
        const auto& cp = cfg.couplings[c];
        out << "couple." << kChannelNames[c] << '=' << to_string(cp.kind) << ':'
            << format_double(cp.gain) << ':' << format_double(cp.offset) << ':'
            << format_double(cp.frequency) << '\n';
        if (cp.region_gain != std::array<double, 3>{1.0, 1.0, 1.0})
            out << "gate." << kChannelNames[c] << '=' << format_double(cp.region_gain[0]) << ','
                << format_double(cp.region_gain[1]) << ',' << format_double(cp.region_gain[2]) << '\n';
    }
    return out.str();
}

std::array<Coupling, kChannelCount> BenchmarkConfig::default_benchmark_couplings()
{
    std::array<Coupling, kChannelCount> c{};
    // geometric channels sit near 1 (ratio to the reference shape), pose near 0
    for (std::size_t i = 0; i < 9; ++i)
        c[i].offset = 1.0;
    auto set = [&](std::string_view name, CouplingKind kind, double gain, double frequency = 1.0) {
        auto& cp = c[*channel_index(name)];
        cp.kind = kind;
        cp.gain = gain;
        cp.frequency = frequency;
    };
    set("Yaw", CouplingKind::Linear, 0.8);
    set("Pitch", CouplingKind::Quadratic, 0.6);
    set("LpCDt", CouplingKind::Linear, 0.15);
    set("oLipH", CouplingKind::Sinusoidal, 0.2, 0.35);
    set("Roll", CouplingKind::Linear, -0.5);
    // Roll tracks the rating with opposite signs while rising and decaying and
    // rests while sustained; Yaw only tracks it while sustained.
    c[*channel_index("Roll")].region_gain = {1.0, 0.0, -1.0};
    c[*channel_index("Yaw")].region_gain = {0.0, 1.0, 0.0};
    return c;
}

std::array<Coupling, kChannelCount> BenchmarkConfig::accumulating_couplings()
{
    std::array<Coupling, kChannelCount> c{};
    for (std::size_t i = 0; i < 9; ++i)
        c[i].offset = 1.0;
    c[*channel_index("Yaw")] = Coupling{CouplingKind::Cumulative, 1.0, 0.0, 1.0, {1.0, 1.0, 1.0}};
    c[*channel_index("Roll")] = Coupling{CouplingKind::Cumulative, -0.8, 0.0, 1.0, {1.0, 1.0, 1.0}};
    return c;
}

std::vector<PlanSegment> random_plan(std::size_t n_frames, std::size_t dynamics, double initial,
                                     std::uint64_t seed)
{
    if (dynamics < 2)
        throw Error(ErrorCode::InvalidArgument, "dynamics must be at least 2 frames");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double lo_len = 0.5 * static_cast<double>(dynamics);
    const double hi_len = 1.5 * static_cast<double>(dynamics);

    std::vector<PlanSegment> plan;
    std::size_t used = 0;
    double level = initial;
    Region previous = Region::Sustain;
    bool first = true;
    while (used < n_frames) {
        auto len = static_cast<std::size_t>(std::llround(lo_len + (hi_len - lo_len) * unit(rng)));
        len = std::max<std::size_t>(len, 2);
        if (n_frames - used < len + static_cast<std::size_t>(lo_len))
            len = n_frames - used;

        // choose a kind different from the previous one that keeps the level in range
        std::vector<Region> options;
        const double span = 0.25; // minimum travel of a changing segment
        for (Region r : kAllRegions) {
            if (!first && r == previous)
                continue;
            if (r == Region::Rise && level + span > 0.9)
                continue;
            if (r == Region::Decay && level - span < -0.9)
                continue;
            options.push_back(r);
        }
        const Region kind = options[std::min<std::size_t>(
            static_cast<std::size_t>(unit(rng) * static_cast<double>(options.size())), options.size() - 1)];

        double slope = 0.0;
        if (kind != Region::Sustain) {
            const double room = kind == Region::Rise ? 0.9 - level : level + 0.9;
            const double travel = span + (room - span) * unit(rng);
            const double steps = static_cast<double>(len);
            slope = (kind == Region::Rise ? travel : -travel) / steps;
            level += slope * steps;
        }
        plan.push_back(PlanSegment{kind, len, slope});
        used += len;
        previous = kind;
        first = false;
    }
    return plan;
}

std::vector<Session> synth_benchmark(const BenchmarkConfig& cfg)
{
    std::vector<Session> sessions;
    sessions.reserve(cfg.n_sessions);
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> start(-0.5, 0.5);
    for (std::size_t s = 0; s < cfg.n_sessions; ++s) {
        SynthConfig sc;
        char id[32];
        std::snprintf(id, sizeof(id), "session_%03zu", s);
        sc.id = id;
        sc.n_frames = cfg.n_frames;
        sc.fps = cfg.fps;
        sc.state = cfg.state;
        sc.initial = start(rng);
        sc.noise = cfg.noise;
        sc.couplings = cfg.couplings;
        sc.plan = random_plan(cfg.n_frames, cfg.dynamics, sc.initial, rng());
        sc.seed = rng();
        sessions.push_back(synth_session(sc));
    }
    return sessions;
}

// ---------------------------------------------------------------------------

void save_session(const Session& session, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    save_feature_series(session.features, dir / "features.csv");
    for (const auto& [state, trace] : session.traces)
        save_annotation_trace(trace, dir / (std::string(to_string(state)) + ".csv"));
    if (!session.regions.empty()) {
        auto out = detail::open_output(dir / "regions.csv");
        out << "frame";
        std::size_t n = 0;
        for (const auto& [state, labels] : session.regions) {
            out << ',' << to_string(state);
            n = std::max(n, labels.size());
        }
        out << '\n';
        for (std::size_t i = 0; i < n; ++i) {
            out << i;
            for (const auto& [state, labels] : session.regions)
                out << ',' << (i < labels.size() ? to_string(labels[i]) : "");
            out << '\n';
        }
    }
    auto meta = detail::open_output(dir / "meta.txt");
    meta << "id=" << session.id << '\n' << "fps=" << detail::format_double(session.features.fps) << '\n';
}

Session load_session(const std::filesystem::path& dir, double default_fps)
{
    Session s;
    s.id = dir.filename().string();
    double fps = default_fps;
    if (std::filesystem::exists(dir / "meta.txt")) {
        auto in = detail::open_input(dir / "meta.txt");
        std::string line;
        while (std::getline(in, line)) {
            const auto text = detail::trim(line);
            const auto eq = text.find('=');
            if (eq == std::string_view::npos)
                continue;
            const auto key = detail::trim(text.substr(0, eq));
            const auto value = detail::trim(text.substr(eq + 1));
            if (key == "fps") {
                auto v = detail::parse_double(value);
                if (!v)
                    throw Error(ErrorCode::MalformedRow, "meta.txt: bad fps");
                fps = *v;
            } else if (key == "id") {
                s.id = std::string(value);
            }
        }
    }
    s.features = load_feature_series(dir / "features.csv", fps);
    for (EmotionState st : kAllStates) {
        const auto path = dir / (std::string(to_string(st)) + ".csv");
        if (std::filesystem::exists(path))
            s.traces.emplace(st, load_annotation_trace(path, st, fps));
    }
    if (std::filesystem::exists(dir / "regions.csv")) {
        auto in = detail::open_input(dir / "regions.csv");
        std::string line;
        std::getline(in, line);
        const auto header = detail::split(line, ',');
        std::vector<std::optional<EmotionState>> cols;
        for (std::size_t i = 1; i < header.size(); ++i)
            cols.push_back(parse_state(header[i]));
        std::vector<RegionLabels> labels(cols.size());
        while (std::getline(in, line)) {
            if (!is_data_line(line))
                continue;
            const auto cells = detail::split(line, ',');
            for (std::size_t i = 1; i < cells.size() && i <= cols.size(); ++i) {
                if (cells[i].empty())
                    continue;
                auto r = parse_region(cells[i]);
                if (!r)
                    throw Error(ErrorCode::MalformedRow, "regions.csv: bad label " + std::string(cells[i]));
                labels[i - 1].push_back(*r);
            }
        }
        for (std::size_t i = 0; i < cols.size(); ++i)
            if (cols[i])
                s.regions.emplace(*cols[i], std::move(labels[i]));
    }
    return s;
}

std::vector<Session> load_sessions(const std::filesystem::path& root, double default_fps)
{
    if (!std::filesystem::is_directory(root))
        throw Error(ErrorCode::Io, root.string() + " is not a directory");
    std::vector<std::filesystem::path> dirs;
    for (const auto& entry : std::filesystem::directory_iterator(root))
        if (entry.is_directory() && std::filesystem::exists(entry.path() / "features.csv"))
            dirs.push_back(entry.path());
    std::sort(dirs.begin(), dirs.end());
    std::vector<Session> sessions;
    for (const auto& d : dirs)
        sessions.push_back(load_session(d, default_fps));
    if (sessions.empty())
        throw Error(ErrorCode::EmptyInput, "no session directories under " + root.string());
    return sessions;
}

} // namespace ems
