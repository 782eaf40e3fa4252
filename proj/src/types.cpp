#include "ems/types.hpp"

#include "ems/error.hpp"

namespace ems {

namespace {

constexpr std::array<std::string_view, 5> kStateNames = {
    "Agreement", "Concentration", "Thoughtful", "Certain", "Interest"};
constexpr std::array<std::string_view, 3> kRegionNames = {"RISE", "SUSTAIN", "DECAY"};

} // namespace

std::string_view to_string(EmotionState s) { return kStateNames[static_cast<std::size_t>(s)]; }

std::optional<EmotionState> parse_state(std::string_view name)
{
    for (std::size_t i = 0; i < kStateNames.size(); ++i)
        if (kStateNames[i] == name)
            return static_cast<EmotionState>(i);
    return std::nullopt;
}

std::string_view to_string(Region r) { return kRegionNames[static_cast<std::size_t>(r)]; }

std::optional<Region> parse_region(std::string_view name)
{
    for (std::size_t i = 0; i < kRegionNames.size(); ++i)
        if (kRegionNames[i] == name)
            return static_cast<Region>(i);
    return std::nullopt;
}

std::optional<std::size_t> channel_index(std::string_view name)
{
    for (std::size_t i = 0; i < kChannelNames.size(); ++i)
        if (kChannelNames[i] == name)
            return i;
    return std::nullopt;
}

std::vector<double> Matrix::column(std::size_t c) const
{
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        out[r] = data_[r * cols_ + c];
    return out;
}

void Matrix::append_row(std::span<const double> values)
{
    if (rows_ == 0 && cols_ == 0)
        cols_ = values.size();
    if (values.size() != cols_)
        throw Error(ErrorCode::ArityMismatch,
                    "row of " + std::to_string(values.size()) + " values, expected " +
                        std::to_string(cols_));
    data_.insert(data_.end(), values.begin(), values.end());
    ++rows_;
}

Matrix Matrix::select_rows(std::span<const std::size_t> indices) const
{
    Matrix out(indices.size(), cols_);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        auto src = row(indices[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

Matrix Matrix::select_cols(std::span<const std::size_t> indices) const
{
    Matrix out(rows_, indices.size());
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t j = 0; j < indices.size(); ++j)
            out(r, j) = (*this)(r, indices[j]);
    return out;
}

} // namespace ems
