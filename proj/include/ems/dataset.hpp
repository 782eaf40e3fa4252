#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ems/types.hpp"

namespace ems {

/// Frames x 12 matrix of facial/pose channels in canonical order.
struct FeatureSeries {
    Matrix data;
    double fps = 25.0;

    std::size_t frames() const noexcept { return data.rows(); }
    std::vector<double> channel(std::size_t c) const { return data.column(c); }

    friend bool operator==(const FeatureSeries&, const FeatureSeries&) = default;
};

/// Per-frame continuous intensity in [-1, +1] for one state.
struct AnnotationTrace {
    EmotionState state = EmotionState::Concentration;
    std::vector<double> values;
    double fps = 25.0;

    std::size_t frames() const noexcept { return values.size(); }

    friend bool operator==(const AnnotationTrace&, const AnnotationTrace&) = default;
};

using RegionLabels = std::vector<Region>;

struct Session {
    std::string id;
    FeatureSeries features;
    std::map<EmotionState, AnnotationTrace> traces;
    std::map<EmotionState, RegionLabels> regions;

    friend bool operator==(const Session&, const Session&) = default;
};

/// Validates shape and finiteness. Throws MissingChannel / MalformedRow.
FeatureSeries make_feature_series(Matrix data, double fps);

/// Validates the rating range, clipping values within 1e-6 of the bounds.
/// Throws OutOfRange(frame, value), TooShort.
AnnotationTrace make_annotation_trace(EmotionState state, std::vector<double> values, double fps);

// Feature CSV: header naming the 12 channels in any order, optional leading
// `frame` column. Blank or non-finite cells are gaps filled by linear
// interpolation between the nearest valid frames (nearest value at the edges).
FeatureSeries read_feature_series(std::istream& in, double fps);
FeatureSeries load_feature_series(const std::filesystem::path& path, double fps);
void write_feature_series(const FeatureSeries& series, std::ostream& out);
void save_feature_series(const FeatureSeries& series, const std::filesystem::path& path);

// Trace CSV: `frame,rating`, a single `rating` column, or bare numbers.
AnnotationTrace read_annotation_trace(std::istream& in, EmotionState state, double fps);
AnnotationTrace load_annotation_trace(const std::filesystem::path& path, EmotionState state, double fps);
void write_annotation_trace(const AnnotationTrace& trace, std::ostream& out);
void save_annotation_trace(const AnnotationTrace& trace, const std::filesystem::path& path);

/// Resamples the trace to the feature frame rate by linear interpolation
/// (holding the last value past the end) and truncates both to the shorter.
std::pair<FeatureSeries, AnnotationTrace> align(const FeatureSeries& features,
                                                const AnnotationTrace& trace);

// ---------------------------------------------------------------------------
// Synthetic sessions

enum class CouplingKind { Independent, Linear, Quadratic, Sinusoidal, Cumulative };

std::string_view to_string(CouplingKind k);

/// channel = offset + region_gain[region] * gain * f(rating) + noise, with
/// f(r) = r, r^2 or sin(2*pi*frequency*r); independent channels are offset + noise.
/// Cumulative channels hold offset + the running sum of region_gain * gain * r / fps
/// over earlier frames, so their windowed velocity is a moving average of the rating.
struct Coupling {
    CouplingKind kind = CouplingKind::Independent;
    double gain = 1.0;
    double offset = 0.0;
    double frequency = 1.0;
    std::array<double, 3> region_gain{1.0, 1.0, 1.0};

    friend bool operator==(const Coupling&, const Coupling&) = default;
};

struct PlanSegment {
    Region kind = Region::Sustain;
    std::size_t frames = 0;
    double slope = 0.0; // rating units per frame

    friend bool operator==(const PlanSegment&, const PlanSegment&) = default;
};

struct SynthConfig {
    std::string id = "synth";
    std::size_t n_frames = 300;
    double fps = 25.0;
    EmotionState state = EmotionState::Concentration;
    double initial = 0.0;
    std::vector<PlanSegment> plan;
    std::array<Coupling, kChannelCount> couplings{};
    double noise = 0.0;
    std::uint64_t seed = 0;

    friend bool operator==(const SynthConfig&, const SynthConfig&) = default;
};

/// Deterministic for a fixed seed. Throws InvalidPlan when the plan does not
/// cover exactly n_frames.
Session synth_session(const SynthConfig& cfg);

/// key=value manifest: id, n_frames, fps, state, initial, noise, seed,
/// plan=KIND:frames:slope,..., couple.<Channel>=kind:gain[:offset[:frequency]],
/// gate.<Channel>=rise,sustain,decay. Unknown keys are rejected.
SynthConfig parse_synth_manifest(std::istream& in);
std::string format_synth_manifest(const SynthConfig& cfg);

/// Parameters for a randomized multi-session suite with planted couplings.
struct BenchmarkConfig {
    std::size_t n_sessions = 20;
    std::size_t n_frames = 240;
    double fps = 25.0;
    std::size_t dynamics = 40; // mean segment length, frames
    double noise = 0.02;
    EmotionState state = EmotionState::Concentration;
    std::uint64_t seed = 1;
    std::array<Coupling, kChannelCount> couplings = default_benchmark_couplings();

    static std::array<Coupling, kChannelCount> default_benchmark_couplings();
    /// Yaw and Roll integrate the rating, every other channel is independent;
    /// the rating is only visible through windowed velocities.
    static std::array<Coupling, kChannelCount> accumulating_couplings();
};

/// Random segment plan whose rating stays inside [-0.9, 0.9].
std::vector<PlanSegment> random_plan(std::size_t n_frames, std::size_t dynamics, double initial,
                                     std::uint64_t seed);
std::vector<Session> synth_benchmark(const BenchmarkConfig& cfg);

// Session directories hold features.csv, one <State>.csv trace per state,
// optionally regions.csv (frame + one label column per state) and meta.txt (fps).
void save_session(const Session& session, const std::filesystem::path& dir);
Session load_session(const std::filesystem::path& dir, double default_fps = 25.0);
/// Loads every subdirectory of root as a session, sorted by name.
std::vector<Session> load_sessions(const std::filesystem::path& root, double default_fps = 25.0);

} // namespace ems
