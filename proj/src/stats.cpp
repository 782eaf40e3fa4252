#include "ems/stats.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>

#include "ems/parallel.hpp"
#include "text_io.hpp"

namespace ems {

double pearson(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size())
        throw Error(ErrorCode::LengthMismatch,
                    std::to_string(x.size()) + " vs " + std::to_string(y.size()));
    if (x.size() < 2)
        throw Error(ErrorCode::TooShort, "pearson needs at least 2 samples");
    auto constant = [](std::span<const double> v) {
        return std::all_of(v.begin(), v.end(), [&](double a) { return a == v.front(); });
    };
    // exact test: centering a constant can leave a rounding residue
    if (constant(x) || constant(y))
        throw Error(ErrorCode::ZeroVariance, "pearson input is constant");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0.0 || syy == 0.0)
        throw Error(ErrorCode::ZeroVariance, "pearson input is constant");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

void MicParams::validate() const
{
    if (!(alpha > 0.0 && alpha < 1.0))
        throw Error(ErrorCode::InvalidArgument, "MIC alpha must lie in (0, 1)");
    if (clump_factor < 1)
        throw Error(ErrorCode::InvalidArgument, "MIC clump factor must be >= 1");
}

std::size_t grid_budget(std::size_t n, double alpha)
{
    const auto b = static_cast<std::size_t>(std::floor(std::pow(static_cast<double>(n), alpha)));
    return std::max<std::size_t>(b, 4);
}

namespace {

std::vector<std::size_t> stable_order(std::span<const double> values)
{
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    return order;
}

// c * log2(c) for integer counts
class PLogTable {
public:
    explicit PLogTable(std::size_t n) : table_(n + 1, 0.0)
    {
        for (std::size_t c = 2; c <= n; ++c)
            table_[c] = static_cast<double>(c) * std::log2(static_cast<double>(c));
    }
    double operator()(std::size_t c) const { return table_[c]; }

private:
    std::vector<double> table_;
};

// Column optimization on points already sorted along the free axis.
AxisPartition optimize_sorted(std::span<const double> x_sorted, std::span<const int> rows, int max_cols,
                              int clump_factor, const PLogTable& plog)
{
    const std::size_t n = x_sorted.size();
    const int row_count = *std::max_element(rows.begin(), rows.end()) + 1;
    const auto R = static_cast<std::size_t>(row_count);

    // Clumps: maximal runs of points sharing a row. Equal x values always stay
    // together; a tie group spanning several rows forms its own clump.
    std::vector<std::size_t> ends;
    int open_label = -1;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        int label = rows[i];
        while (j < n && x_sorted[j] == x_sorted[i]) {
            if (rows[j] != label)
                label = -1;
            ++j;
        }
        if (label >= 0 && label == open_label && !ends.empty())
            ends.back() = j;
        else
            ends.push_back(j);
        open_label = label;
        i = j;
    }

    // Superclumps: merge clumps into at most clump_factor * max_cols blocks of
    // near-equal size.
    const auto max_blocks = static_cast<std::size_t>(clump_factor) * static_cast<std::size_t>(max_cols);
    if (ends.size() > max_blocks) {
        std::vector<double> clump_of(n);
        std::size_t start = 0;
        for (std::size_t c = 0; c < ends.size(); ++c) {
            std::fill(clump_of.begin() + static_cast<std::ptrdiff_t>(start),
                      clump_of.begin() + static_cast<std::ptrdiff_t>(ends[c]), static_cast<double>(c));
            start = ends[c];
        }
        const auto bins = equipartition_sorted(clump_of, static_cast<int>(max_blocks));
        ends.clear();
        for (std::size_t i = 0; i < n; ++i)
            if (i + 1 == n || bins[i + 1] != bins[i])
                ends.push_back(i + 1);
    }

    const std::size_t k = ends.size();
    // counts[t * R + r]: points of row r among the first t blocks
    std::vector<std::size_t> counts((k + 1) * R, 0);
    {
        std::size_t pos = 0;
        for (std::size_t t = 1; t <= k; ++t) {
            std::copy_n(counts.begin() + static_cast<std::ptrdiff_t>((t - 1) * R), R,
                        counts.begin() + static_cast<std::ptrdiff_t>(t * R));
            for (; pos < ends[t - 1]; ++pos)
                ++counts[t * R + static_cast<std::size_t>(rows[pos])];
        }
    }
    auto boundary = [&](std::size_t t) { return t == 0 ? std::size_t{0} : ends[t - 1]; };

    // score[t * (k + 1) + s] for s < t: sum_r plog(n_r) - plog(n) of the column
    // holding blocks s..t-1. Columns are additive in this score.
    const std::size_t stride = k + 1;
    std::vector<double> score(stride * stride, 0.0);
    for (std::size_t t = 1; t <= k; ++t) {
        for (std::size_t s = 0; s < t; ++s) {
            double v = -plog(boundary(t) - boundary(s));
            for (std::size_t r = 0; r < R; ++r)
                v += plog(counts[t * R + r] - counts[s * R + r]);
            score[t * stride + s] = v;
        }
    }

    double row_term = plog(n);
    for (std::size_t r = 0; r < R; ++r)
        row_term -= plog(counts[k * R + r]);

    const std::size_t L = std::min<std::size_t>(static_cast<std::size_t>(max_cols), k);
    // best[t] for the current column count; parent[l][t] = start block of the last column
    std::vector<double> best(stride), next(stride);
    std::vector<std::vector<std::size_t>> parent(L + 1, std::vector<std::size_t>(stride, 0));
    for (std::size_t t = 1; t <= k; ++t)
        best[t] = score[t * stride];
    std::vector<double> final_score(L + 1, 0.0);
    final_score[1] = best[k];
    for (std::size_t l = 2; l <= L; ++l) {
        std::fill(next.begin(), next.end(), -std::numeric_limits<double>::infinity());
        for (std::size_t t = l; t <= k; ++t) {
            const double* row = &score[t * stride];
            double top = -std::numeric_limits<double>::infinity();
            std::size_t arg = l - 1;
            for (std::size_t s = l - 1; s < t; ++s) {
                const double v = best[s] + row[s];
                if (v > top) {
                    top = v;
                    arg = s;
                }
            }
            next[t] = top;
            parent[l][t] = arg;
        }
        std::swap(best, next);
        final_score[l] = best[k];
    }

    AxisPartition out;
    out.rows = row_count;
    out.max_cols = max_cols;
    out.clumps = k;
    for (int l = 2; l <= max_cols; ++l) {
        const auto ul = static_cast<std::size_t>(l);
        const std::size_t used = std::min(ul, L);
        double info = (row_term + final_score[used]) / static_cast<double>(n);
        std::vector<std::size_t> cut;
        std::size_t t = k;
        for (std::size_t c = used; c >= 2; --c) {
            t = parent[c][t];
            cut.push_back(boundary(t));
        }
        std::reverse(cut.begin(), cut.end());
        cut.push_back(n);
        if (!out.mutual_info.empty() && info < out.mutual_info.back()) {
            info = out.mutual_info.back();
            cut = out.cuts.back();
        }
        out.mutual_info.push_back(std::max(info, 0.0));
        out.cuts.push_back(std::move(cut));
    }
    return out;
}

void check_pair(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size())
        throw Error(ErrorCode::LengthMismatch,
                    std::to_string(x.size()) + " vs " + std::to_string(y.size()));
    if (x.size() < 4)
        throw Error(ErrorCode::TooFewPoints, "MIC needs at least 4 points, got " + std::to_string(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i)
        if (!std::isfinite(x[i]) || !std::isfinite(y[i]))
            throw Error(ErrorCode::InvalidArgument, "non-finite value at index " + std::to_string(i));
}

} // namespace

std::vector<double> average_ranks(std::span<const double> values)
{
    const auto order = stable_order(values);
    std::vector<double> ranks(values.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && values[order[j]] == values[order[i]])
            ++j;
        const double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k)
            ranks[order[k]] = avg;
        i = j;
    }
    return ranks;
}

std::vector<int> equipartition_sorted(std::span<const double> sorted_values, int bins)
{
    const std::size_t n = sorted_values.size();
    std::vector<int> out(n, 0);
    if (bins < 1)
        throw Error(ErrorCode::InvalidArgument, "equipartition needs at least one bin");
    double desired = static_cast<double>(n) / bins;
    int current = 0;
    std::size_t filled = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && sorted_values[j] == sorted_values[i])
            ++j;
        const auto s = static_cast<double>(j - i);
        const auto f = static_cast<double>(filled);
        if (filled != 0 && current < bins - 1 && std::abs(f + s - desired) >= std::abs(f - desired)) {
            ++current;
            filled = 0;
            desired = static_cast<double>(n - i) / static_cast<double>(bins - current);
        }
        for (std::size_t k = i; k < j; ++k)
            out[k] = current;
        filled += j - i;
        i = j;
    }
    return out;
}

std::vector<int> equipartition_axis(std::span<const double> ranks, int bins)
{
    const auto order = stable_order(ranks);
    std::vector<double> sorted(ranks.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        sorted[i] = ranks[order[i]];
    const auto by_pos = equipartition_sorted(sorted, bins);
    std::vector<int> out(ranks.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        out[order[i]] = by_pos[i];
    return out;
}

AxisPartition optimize_axis_partition_rows(std::span<const double> ranks_x, std::span<const int> row_of_point,
                                           int max_cols, int clump_factor)
{
    if (ranks_x.size() != row_of_point.size())
        throw Error(ErrorCode::LengthMismatch, "ranks and rows differ in length");
    if (ranks_x.size() < 4)
        throw Error(ErrorCode::TooFewPoints, "need at least 4 points, got " + std::to_string(ranks_x.size()));
    if (max_cols < 2 || clump_factor < 1)
        throw Error(ErrorCode::InvalidArgument, "max_cols must be >= 2 and clump factor >= 1");
    for (int r : row_of_point)
        if (r < 0)
            throw Error(ErrorCode::InvalidArgument, "negative row index");
    const auto order = stable_order(ranks_x);
    std::vector<double> xs(order.size());
    std::vector<int> rows(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        xs[i] = ranks_x[order[i]];
        rows[i] = row_of_point[order[i]];
    }
    return optimize_sorted(xs, rows, max_cols, clump_factor, PLogTable(xs.size()));
}

AxisPartition optimize_axis_partition(std::span<const double> ranks_x, std::span<const double> ranks_y,
                                      int rows, int max_cols, int clump_factor)
{
    if (ranks_x.size() != ranks_y.size())
        throw Error(ErrorCode::LengthMismatch, "rank vectors differ in length");
    if (ranks_x.size() < 4)
        throw Error(ErrorCode::TooFewPoints, "need at least 4 points, got " + std::to_string(ranks_x.size()));
    if (rows < 2)
        throw Error(ErrorCode::InvalidArgument, "rows must be >= 2");
    const auto row_of_point = equipartition_axis(ranks_y, rows);
    return optimize_axis_partition_rows(ranks_x, row_of_point, max_cols, clump_factor);
}

CharacteristicMatrix::CharacteristicMatrix(std::size_t budget)
    : budget_(budget), side_(budget / 2 + 1),
      cells_(side_ * side_, std::numeric_limits<double>::quiet_NaN())
{
}

bool CharacteristicMatrix::populated(std::size_t x, std::size_t y) const
{
    return x >= 2 && y >= 2 && x * y <= budget_;
}

double CharacteristicMatrix::at(std::size_t x, std::size_t y) const
{
    if (!populated(x, y))
        return std::numeric_limits<double>::quiet_NaN();
    return cells_[x * side_ + y];
}

void CharacteristicMatrix::set(std::size_t x, std::size_t y, double v)
{
    if (!populated(x, y))
        throw Error(ErrorCode::InvalidArgument, "grid shape outside the budget");
    cells_[x * side_ + y] = v;
}

double CharacteristicMatrix::max() const
{
    double best = 0.0;
    for (double v : cells_)
        if (!std::isnan(v))
            best = std::max(best, v);
    return best;
}

CharacteristicMatrix characteristic_matrix(std::span<const double> x, std::span<const double> y,
                                           const MicParams& p)
{
    p.validate();
    check_pair(x, y);
    const std::size_t n = x.size();
    const std::size_t budget = grid_budget(n, p.alpha);
    const PLogTable plog(n);

    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    const auto order_x = stable_order(rx);
    const auto order_y = stable_order(ry);
    std::vector<double> xs(n), ys(n);
    for (std::size_t i = 0; i < n; ++i) {
        xs[i] = rx[order_x[i]];
        ys[i] = ry[order_y[i]];
    }

    // info[a][b]: best MI with `a` optimized bins on the free axis and `b`
    // equipartitioned bins on the fixed axis.
    const std::size_t side = budget / 2 + 1;
    auto one_orientation = [&](const std::vector<std::size_t>& free_order, const std::vector<double>& free_sorted,
                               const std::vector<std::size_t>& fixed_order, const std::vector<double>& fixed_sorted) {
        std::vector<double> info(side * side, 0.0);
        std::vector<int> row_of(n), rows_in_free(n);
        for (std::size_t b = 2; b <= budget / 2; ++b) {
            const std::size_t max_a = budget / b;
            if (max_a < 2)
                continue;
            const auto bins = equipartition_sorted(fixed_sorted, static_cast<int>(b));
            for (std::size_t i = 0; i < n; ++i)
                row_of[fixed_order[i]] = bins[i];
            for (std::size_t i = 0; i < n; ++i)
                rows_in_free[i] = row_of[free_order[i]];
            const auto part = optimize_sorted(free_sorted, rows_in_free, static_cast<int>(max_a), p.clump_factor, plog);
            for (std::size_t a = 2; a <= max_a; ++a)
                info[a * side + b] = part.info(static_cast<int>(a));
        }
        return info;
    };

    // rows on y, columns optimized along x: indexed [x bins][y bins]
    const auto along_x = one_orientation(order_x, xs, order_y, ys);
    // rows on x, columns optimized along y: indexed [y bins][x bins]
    const auto along_y = one_orientation(order_y, ys, order_x, xs);

    CharacteristicMatrix m(budget);
    for (std::size_t a = 2; a <= budget / 2; ++a) {
        for (std::size_t b = 2; a * b <= budget; ++b) {
            const double best = std::max(along_x[a * side + b], along_y[b * side + a]);
            const double norm = std::log2(static_cast<double>(std::min(a, b)));
            m.set(a, b, std::clamp(best / norm, 0.0, 1.0));
        }
    }
    return m;
}

double mic(std::span<const double> x, std::span<const double> y, const MicParams& p)
{
    return characteristic_matrix(x, y, p).max();
}

// ---------------------------------------------------------------------------

std::optional<double> ScoreTable::find(std::string_view row, std::string_view col) const
{
    const auto r = std::find(rows.begin(), rows.end(), row);
    const auto c = std::find(cols.begin(), cols.end(), col);
    if (r == rows.end() || c == cols.end())
        return std::nullopt;
    return scores(static_cast<std::size_t>(r - rows.begin()), static_cast<std::size_t>(c - cols.begin()));
}

namespace {

void check_traces(const FeatureSeries& features, std::span<const AnnotationTrace> traces)
{
    if (traces.empty())
        throw Error(ErrorCode::EmptyInput, "no annotation traces");
    for (const auto& t : traces)
        if (t.frames() != features.frames())
            throw Error(ErrorCode::LengthMismatch, std::string(to_string(t.state)) + " trace has " +
                                                       std::to_string(t.frames()) + " frames, features have " +
                                                       std::to_string(features.frames()));
}

ScoreTable feature_table(const FeatureSeries& features, std::span<const AnnotationTrace> traces,
                         const std::function<double(std::span<const double>, std::span<const double>)>& score)
{
    check_traces(features, traces);
    ScoreTable table;
    for (auto name : kChannelNames)
        table.rows.emplace_back(name);
    for (const auto& t : traces)
        table.cols.emplace_back(to_string(t.state));
    table.scores = Matrix(kChannelCount, traces.size());
    std::vector<std::vector<double>> channels(kChannelCount);
    for (std::size_t c = 0; c < kChannelCount; ++c)
        channels[c] = features.channel(c);
    const std::size_t cells = kChannelCount * traces.size();
    std::vector<double> out(cells);
    parallel_for(cells, [&](std::size_t i) {
        const std::size_t c = i / traces.size(), s = i % traces.size();
        out[i] = score(channels[c], traces[s].values);
    });
    for (std::size_t i = 0; i < cells; ++i)
        table.scores(i / traces.size(), i % traces.size()) = out[i];
    return table;
}

} // namespace

MicMatrix mic_matrix(const FeatureSeries& features, std::span<const AnnotationTrace> traces, const MicParams& p)
{
    p.validate();
    return feature_table(features, traces,
                         [&](std::span<const double> a, std::span<const double> b) { return mic(a, b, p); });
}

ScoreTable pearson_matrix(const FeatureSeries& features, std::span<const AnnotationTrace> traces)
{
    return feature_table(features, traces,
                         [](std::span<const double> a, std::span<const double> b) { return pearson(a, b); });
}

MicMatrix emotion_mic_matrix(std::span<const AnnotationTrace> traces, const MicParams& p)
{
    p.validate();
    if (traces.size() < 2)
        throw Error(ErrorCode::EmptyInput, "need at least two traces");
    for (const auto& t : traces)
        if (t.frames() != traces[0].frames())
            throw Error(ErrorCode::LengthMismatch, "traces are not aligned");
    const std::size_t m = traces.size();
    MicMatrix out;
    for (const auto& t : traces) {
        out.rows.emplace_back(to_string(t.state));
        out.cols.emplace_back(to_string(t.state));
    }
    out.scores = Matrix(m, m, 1.0);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j)
            pairs.emplace_back(i, j);
    std::vector<double> vals(pairs.size());
    parallel_for(pairs.size(), [&](std::size_t k) {
        vals[k] = mic(traces[pairs[k].first].values, traces[pairs[k].second].values, p);
    });
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        out.scores(pairs[k].first, pairs[k].second) = vals[k];
        out.scores(pairs[k].second, pairs[k].first) = vals[k];
    }
    return out;
}

void write_score_table(const ScoreTable& table, std::ostream& out)
{
    out << "feature";
    for (const auto& c : table.cols)
        out << ',' << c;
    out << '\n';
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        out << table.rows[r];
        for (std::size_t c = 0; c < table.cols.size(); ++c)
            out << ',' << detail::format_double(table.scores(r, c));
        out << '\n';
    }
}

ScoreTable read_score_table(std::istream& in)
{
    ScoreTable t;
    std::string line;
    if (!std::getline(in, line))
        throw Error(ErrorCode::EmptyFile, "score table has no header");
    const auto header = detail::split(line, ',');
    for (std::size_t i = 1; i < header.size(); ++i)
        t.cols.emplace_back(header[i]);
    t.scores = Matrix(0, 0);
    Matrix m;
    while (std::getline(in, line)) {
        if (detail::trim(line).empty())
            continue;
        const auto cells = detail::split(line, ',');
        if (cells.size() != header.size())
            throw Error(ErrorCode::MalformedRow, "score table row for " + std::string(cells[0]));
        t.rows.emplace_back(cells[0]);
        std::vector<double> vals;
        for (std::size_t i = 1; i < cells.size(); ++i) {
            auto v = detail::parse_double(cells[i]);
            if (!v)
                throw Error(ErrorCode::MalformedRow, "score table value " + std::string(cells[i]));
            vals.push_back(*v);
        }
        m.append_row(vals);
    }
    t.scores = std::move(m);
    return t;
}

std::string format_ranking_report(const ScoreTable& table, const std::string& title,
                                  const std::vector<std::string>& header_lines)
{
    std::ostringstream out;
    out << "# " << title << '\n';
    for (const auto& h : header_lines)
        out << "# " << h << '\n';
    for (std::size_t c = 0; c < table.cols.size(); ++c) {
        std::vector<std::size_t> idx(table.rows.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::stable_sort(idx.begin(), idx.end(),
                         [&](std::size_t a, std::size_t b) { return table.scores(a, c) > table.scores(b, c); });
        out << table.cols[c] << ':';
        for (std::size_t k = 0; k < std::min<std::size_t>(3, idx.size()); ++k) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.3f", table.scores(idx[k], c));
            out << (k ? ", " : " ") << k + 1 << ". " << table.rows[idx[k]] << ' ' << buf;
        }
        out << '\n';
    }
    return out.str();
}

} // namespace ems
