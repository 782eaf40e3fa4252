#include "ems/temporal.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "text_io.hpp"

namespace ems {

namespace {

constexpr std::array<std::string_view, 4> kKindNames = {"original", "velocity", "event", "event_velocity"};

void check_window(const FeatureSeries& series, const WindowConfig& w)
{
    w.validate();
    if (series.frames() < w.size)
        throw Error(ErrorCode::WindowTooLarge, "window of " + std::to_string(w.size) + " frames on a series of " +
                                                   std::to_string(series.frames()));
}

double event_of(double v, double deadband)
{
    if (std::abs(v) <= deadband)
        return 0.0;
    return v > 0.0 ? 1.0 : -1.0;
}

} // namespace

std::string_view to_string(FeatureKind k) { return kKindNames[static_cast<std::size_t>(k)]; }

std::optional<FeatureKind> parse_kind(std::string_view s)
{
    static constexpr std::array<std::string_view, 4> roman = {"i", "ii", "iii", "iv"};
    for (std::size_t i = 0; i < kKindNames.size(); ++i)
        if (kKindNames[i] == s || roman[i] == s)
            return static_cast<FeatureKind>(i);
    return std::nullopt;
}

void WindowConfig::validate() const
{
    if (size < 2)
        throw Error(ErrorCode::InvalidArgument, "window size must be >= 2");
    if (!(deadband >= 0.0))
        throw Error(ErrorCode::InvalidArgument, "deadband must be >= 0");
}

std::size_t default_window_size(EmotionState s)
{
    switch (s) {
    case EmotionState::Agreement: return 20;
    case EmotionState::Concentration: return 40;
    case EmotionState::Thoughtful: return 20;
    case EmotionState::Certain: return 40;
    case EmotionState::Interest: return 40;
    }
    return 20;
}

Matrix velocity(const FeatureSeries& series, const WindowConfig& w)
{
    check_window(series, w);
    const std::size_t rows = series.frames() - w.size + 1;
    const double dt = static_cast<double>(w.size - 1) / series.fps;
    Matrix out(rows, kChannelCount);
    for (std::size_t r = 0; r < rows; ++r) {
        const auto first = series.data.row(r);
        const auto last = series.data.row(r + w.size - 1);
        for (std::size_t c = 0; c < kChannelCount; ++c)
            out(r, c) = (last[c] - first[c]) / dt;
    }
    return out;
}

Matrix events(const FeatureSeries& series, const WindowConfig& w)
{
    Matrix v = velocity(series, w);
    for (std::size_t r = 0; r < v.rows(); ++r)
        for (double& x : v.row(r))
            x = event_of(x, w.deadband);
    return v;
}

Matrix event_velocity(const FeatureSeries& series, const WindowConfig& w)
{
    Matrix v = velocity(series, w);
    for (std::size_t r = 0; r < v.rows(); ++r)
        for (double& x : v.row(r))
            x = event_of(x, w.deadband) * x;
    return v;
}

std::string ColumnTag::name() const
{
    return std::string(kChannelNames[channel]) + ":" + std::string(to_string(kind));
}

DesignMatrix build_design_matrix(const FeatureSeries& series, const WindowConfig& w,
                                 std::span<const FeatureKind> kinds)
{
    if (kinds.empty())
        throw Error(ErrorCode::EmptyKinds, "no feature kinds requested");
    check_window(series, w);
    std::array<bool, 4> wanted{};
    for (auto k : kinds)
        wanted[static_cast<std::size_t>(k)] = true;

    const std::size_t rows = series.frames() - w.size + 1;
    const Matrix vel = velocity(series, w);

    DesignMatrix m;
    m.first_frame = w.size - 1;
    for (auto k : kAllKinds)
        if (wanted[static_cast<std::size_t>(k)])
            for (std::size_t c = 0; c < kChannelCount; ++c)
                m.columns.push_back(ColumnTag{c, k});
    m.weights.assign(m.columns.size(), 1.0);
    m.values = Matrix(rows, m.columns.size());
    for (std::size_t r = 0; r < rows; ++r) {
        const auto orig = series.data.row(r + m.first_frame);
        const auto v = vel.row(r);
        auto out = m.values.row(r);
        for (std::size_t j = 0; j < m.columns.size(); ++j) {
            const auto c = m.columns[j].channel;
            switch (m.columns[j].kind) {
            case FeatureKind::Original: out[j] = orig[c]; break;
            case FeatureKind::Velocity: out[j] = v[c]; break;
            case FeatureKind::Event: out[j] = event_of(v[c], w.deadband); break;
            case FeatureKind::EventVelocity: out[j] = event_of(v[c], w.deadband) * v[c]; break;
            }
        }
    }
    return m;
}

std::vector<std::size_t> columns_of_kinds(const DesignMatrix& m, std::span<const FeatureKind> kinds)
{
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < m.columns.size(); ++j)
        if (std::find(kinds.begin(), kinds.end(), m.columns[j].kind) != kinds.end())
            out.push_back(j);
    return out;
}

DesignMatrix select_columns(const DesignMatrix& m, std::span<const std::size_t> cols)
{
    DesignMatrix out;
    out.values = m.values.select_cols(cols);
    for (auto j : cols) {
        out.columns.push_back(m.columns.at(j));
        out.weights.push_back(m.weights.at(j));
    }
    out.first_frame = m.first_frame;
    out.weighted = m.weighted;
    return out;
}

DesignMatrix select_rows(const DesignMatrix& m, std::span<const std::size_t> rows)
{
    DesignMatrix out = m;
    out.values = m.values.select_rows(rows);
    return out;
}

std::string velocity_weight_name(std::size_t channel) { return std::string(kChannelNames[channel]) + ".vel"; }

double column_weight(const ColumnTag& tag, const MicMatrix& weights, EmotionState state)
{
    const auto parent = weights.find(kChannelNames[tag.channel], to_string(state));
    if (!parent)
        throw Error(ErrorCode::MissingWeight, std::string(kChannelNames[tag.channel]));
    if (tag.kind == FeatureKind::Original)
        return *parent;
    const auto vel = weights.find(velocity_weight_name(tag.channel), to_string(state));
    return vel ? std::max(*parent, *vel) : *parent;
}

DesignMatrix weight_features(const DesignMatrix& m, const MicMatrix& weights, EmotionState state)
{
    DesignMatrix out = m;
    for (std::size_t j = 0; j < m.columns.size(); ++j) {
        const double w = column_weight(m.columns[j], weights, state);
        for (std::size_t r = 0; r < out.rows(); ++r)
            out.values(r, j) *= w;
        out.weights[j] *= w;
    }
    out.weighted = true;
    return out;
}

void write_design_matrix(const DesignMatrix& m, std::ostream& out)
{
    out << "frame";
    for (const auto& c : m.columns)
        out << ',' << kChannelNames[c.channel];
    out << "\nkind";
    for (const auto& c : m.columns)
        out << ',' << to_string(c.kind);
    out << '\n';
    for (std::size_t r = 0; r < m.rows(); ++r) {
        out << r + m.first_frame;
        for (double v : m.values.row(r))
            out << ',' << detail::format_double(v);
        out << '\n';
    }
}

} // namespace ems
