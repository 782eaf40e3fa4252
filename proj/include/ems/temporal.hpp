#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ems/dataset.hpp"
#include "ems/stats.hpp"

namespace ems {

/// Derived feature kinds: original (i), velocity (ii), up/down/unchanged
/// events (iii), events times velocity (iv).
enum class FeatureKind { Original = 0, Velocity = 1, Event = 2, EventVelocity = 3 };

inline constexpr std::array<FeatureKind, 4> kAllKinds = {FeatureKind::Original, FeatureKind::Velocity,
                                                          FeatureKind::Event, FeatureKind::EventVelocity};

std::string_view to_string(FeatureKind k);
std::optional<FeatureKind> parse_kind(std::string_view s);

struct WindowConfig {
    std::size_t size = 20;  // frames
    double deadband = 0.01; // |velocity| <= deadband counts as unchanged, units/s

    void validate() const;
    friend bool operator==(const WindowConfig&, const WindowConfig&) = default;
};

/// Window sizes selected per state: 20/40/20/40/40.
std::size_t default_window_size(EmotionState s);

/// Row r of every windowed output refers to the window ending at frame
/// r + size - 1.
///
/// Velocity at the last frame of each window: (F_last - F_first) / (T_last - T_first)
/// with T in seconds. Throws WindowTooLarge.
Matrix velocity(const FeatureSeries& series, const WindowConfig& w);
/// sign(velocity) in {+1, -1, 0}, with |velocity| <= deadband mapped to 0.
Matrix events(const FeatureSeries& series, const WindowConfig& w);
/// events * velocity elementwise.
Matrix event_velocity(const FeatureSeries& series, const WindowConfig& w);

struct ColumnTag {
    std::size_t channel = 0;
    FeatureKind kind = FeatureKind::Original;

    std::string name() const; // e.g. "Yaw:velocity"
    friend bool operator==(const ColumnTag&, const ColumnTag&) = default;
};

struct DesignMatrix {
    Matrix values;
    std::vector<ColumnTag> columns;
    std::vector<double> weights; // per-column factor already applied (1 when unweighted)
    std::size_t first_frame = 0; // frame of row 0 (window size - 1)
    bool weighted = false;

    std::size_t rows() const noexcept { return values.rows(); }
    std::size_t cols() const noexcept { return values.cols(); }
};

/// Concatenates the requested kinds (in i..iv order, 12 channels each) at
/// window-end frames. Throws EmptyKinds, WindowTooLarge.
DesignMatrix build_design_matrix(const FeatureSeries& series, const WindowConfig& w,
                                 std::span<const FeatureKind> kinds);

/// Columns of the given kinds, in the matrix's own column order.
std::vector<std::size_t> columns_of_kinds(const DesignMatrix& m, std::span<const FeatureKind> kinds);
DesignMatrix select_columns(const DesignMatrix& m, std::span<const std::size_t> cols);
DesignMatrix select_rows(const DesignMatrix& m, std::span<const std::size_t> rows);

/// Row name holding the MIC of a channel's velocity in a weight table.
std::string velocity_weight_name(std::size_t channel);

/// Weight applied to one column: MIC(channel, state) for originals, and
/// max(MIC(channel, state), MIC(channel velocity, state)) for derived kinds
/// (the velocity row is optional). Throws MissingWeight.
double column_weight(const ColumnTag& tag, const MicMatrix& weights, EmotionState state);

DesignMatrix weight_features(const DesignMatrix& m, const MicMatrix& weights, EmotionState state);

/// CSV with a two-row header: channel names, then kinds.
void write_design_matrix(const DesignMatrix& m, std::ostream& out);

} // namespace ems
