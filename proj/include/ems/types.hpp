#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ems {

enum class EmotionState { Agreement, Concentration, Thoughtful, Certain, Interest };

inline constexpr std::array<EmotionState, 5> kAllStates = {
    EmotionState::Agreement, EmotionState::Concentration, EmotionState::Thoughtful,
    EmotionState::Certain, EmotionState::Interest};

std::string_view to_string(EmotionState s);
std::optional<EmotionState> parse_state(std::string_view name);

enum class Region : int { Rise = 0, Sustain = 1, Decay = 2 };

inline constexpr std::array<Region, 3> kAllRegions = {Region::Rise, Region::Sustain, Region::Decay};

std::string_view to_string(Region r);
std::optional<Region> parse_region(std::string_view name);

inline constexpr std::size_t kChannelCount = 12;

// Canonical channel order of a feature series.
inline constexpr std::array<std::string_view, kChannelCount> kChannelNames = {
    "inBrL", "inBrR", "otBrL", "otBrR", "eyeOL", "eyeOR",
    "oLipH", "iLipH", "LpCDt", "Yaw",   "Pitch", "Roll"};

/// Index of a channel name in canonical order.
std::optional<std::size_t> channel_index(std::string_view name);

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::vector<double> column(std::size_t c) const;

    /// Appends a row; the first row fixes the column count of an empty matrix.
    void append_row(std::span<const double> values);

    /// Rows selected by index, in the given order.
    Matrix select_rows(std::span<const std::size_t> indices) const;
    /// Columns selected by index, in the given order.
    Matrix select_cols(std::span<const std::size_t> indices) const;

    const std::vector<double>& data() const noexcept { return data_; }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

} // namespace ems
