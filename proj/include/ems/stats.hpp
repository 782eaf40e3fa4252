#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ems/dataset.hpp"
#include "ems/types.hpp"

namespace ems {

/// Pearson product-moment correlation. Throws LengthMismatch, TooShort,
/// ZeroVariance (constant input is an error, not 0).
double pearson(std::span<const double> x, std::span<const double> y);

// ---------------------------------------------------------------------------
// Maximal information coefficient

struct MicParams {
    double alpha = 0.6;    // grid budget B(n) = n^alpha
    int clump_factor = 15; // at most clump_factor * max_cols candidate column cuts

    void validate() const;
    friend bool operator==(const MicParams&, const MicParams&) = default;
};

/// Grid budget max(4, floor(n^alpha)); the floor of 4 keeps a 2x2 grid
/// available on tiny samples.
std::size_t grid_budget(std::size_t n, double alpha);

/// 1-based ranks; ties share the average rank.
std::vector<double> average_ranks(std::span<const double> values);

/// Splits already sorted values into at most `bins` contiguous groups of
/// near-equal size without separating equal values. Returns the group index
/// of each position.
std::vector<int> equipartition_sorted(std::span<const double> sorted_values, int bins);

/// Row index of every point (by original index) for an equipartition of the
/// axis with the given ranks; points are ordered by (rank, index).
std::vector<int> equipartition_axis(std::span<const double> ranks, int bins);

/// Best column partitions for a fixed row equipartition.
struct AxisPartition {
    int rows = 0;
    int max_cols = 0;
    std::size_t clumps = 0;  // candidate blocks the DP cut between
    std::vector<double> mutual_info;              // [l - 2] for l = 2..max_cols, bits
    std::vector<std::vector<std::size_t>> cuts;   // [l - 2]: column ends (point counts in x order), last = n

    double info(int cols) const { return mutual_info.at(static_cast<std::size_t>(cols - 2)); }
};

/// Maximizes empirical mutual information over column partitions of the x
/// axis (columns never split equal x values) with rows fixed to the
/// equipartition of the y axis. Partitions use at most l columns.
/// Throws TooFewPoints (n < 4), InvalidArgument.
AxisPartition optimize_axis_partition(std::span<const double> ranks_x, std::span<const double> ranks_y,
                                      int rows, int max_cols, int clump_factor);

/// Same optimization with the row of every point given explicitly.
AxisPartition optimize_axis_partition_rows(std::span<const double> ranks_x, std::span<const int> row_of_point,
                                           int max_cols, int clump_factor);

/// Normalized grid scores M(x, y) for x*y <= B(n); x counts columns along the
/// first variable and y rows along the second.
class CharacteristicMatrix {
public:
    CharacteristicMatrix() = default;
    explicit CharacteristicMatrix(std::size_t budget);

    std::size_t budget() const noexcept { return budget_; }
    bool populated(std::size_t x, std::size_t y) const;
    /// NaN for shapes outside the budget.
    double at(std::size_t x, std::size_t y) const;
    void set(std::size_t x, std::size_t y, double v);
    double max() const;

private:
    std::size_t budget_ = 0;
    std::size_t side_ = 0;
    std::vector<double> cells_;
};

/// Throws TooFewPoints, LengthMismatch, InvalidArgument (non-finite input).
CharacteristicMatrix characteristic_matrix(std::span<const double> x, std::span<const double> y,
                                           const MicParams& p = {});

double mic(std::span<const double> x, std::span<const double> y, const MicParams& p = {});

// ---------------------------------------------------------------------------
// Score tables (MIC or Pearson), rows = features, cols = states

struct ScoreTable {
    std::vector<std::string> rows;
    std::vector<std::string> cols;
    Matrix scores;

    std::optional<double> find(std::string_view row, std::string_view col) const;
    friend bool operator==(const ScoreTable&, const ScoreTable&) = default;
};

using MicMatrix = ScoreTable;

/// scores[f][s] = mic(channel f, trace s). Traces must match the frame count.
MicMatrix mic_matrix(const FeatureSeries& features, std::span<const AnnotationTrace> traces,
                     const MicParams& p = {});

/// Pairwise MIC between state traces; symmetric with unit diagonal.
MicMatrix emotion_mic_matrix(std::span<const AnnotationTrace> traces, const MicParams& p = {});

ScoreTable pearson_matrix(const FeatureSeries& features, std::span<const AnnotationTrace> traces);

void write_score_table(const ScoreTable& table, std::ostream& out);
ScoreTable read_score_table(std::istream& in);

/// Top-3 rows per column, highest first.
std::string format_ranking_report(const ScoreTable& table, const std::string& title,
                                  const std::vector<std::string>& header_lines);

} // namespace ems
