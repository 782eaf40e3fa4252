#include "ems/facefeat.hpp"

#include <cmath>
#include <fstream>
#include <string>

#include "text_io.hpp"

namespace ems {

namespace {

constexpr std::size_t kValuesPerRow = 2 * kLandmarkCount + 3;

Point2 midpoint(const Point2& a, const Point2& b) { return {(a.x + b.x) / 2.0, (a.y + b.y) / 2.0}; }

Point2 centroid(const std::array<Point2, kLandmarkCount>& p, std::size_t first, std::size_t count)
{
    Point2 c;
    for (std::size_t i = first; i < first + count; ++i) {
        c.x += p[i].x;
        c.y += p[i].y;
    }
    c.x /= static_cast<double>(count);
    c.y /= static_cast<double>(count);
    return c;
}

double distance(const Point2& a, const Point2& b) { return std::hypot(a.x - b.x, a.y - b.y); }

} // namespace

std::array<double, kGeometricChannels> geometric_distances(const std::array<Point2, kLandmarkCount>& p)
{
    const Point2 eye_l = centroid(p, 42, 6);
    const Point2 eye_r = centroid(p, 36, 6);
    return {
        distance(midpoint(p[22], p[23]), eye_l), // inBrL
        distance(midpoint(p[20], p[21]), eye_r), // inBrR
        distance(midpoint(p[25], p[26]), eye_l), // otBrL
        distance(midpoint(p[17], p[18]), eye_r), // otBrR
        distance(midpoint(p[43], p[44]), midpoint(p[46], p[47])), // eyeOL
        distance(midpoint(p[37], p[38]), midpoint(p[40], p[41])), // eyeOR
        distance(p[51], p[57]), // oLipH
        distance(p[61], p[64]), // iLipH
        distance(p[48], p[54]), // LpCDt
    };
}

ReferenceShape::ReferenceShape(const std::array<Point2, kLandmarkCount>& points)
    : points_(points), distances_(geometric_distances(points))
{
    for (std::size_t i = 0; i < kGeometricChannels; ++i)
        if (!(distances_[i] > 0.0) || !std::isfinite(distances_[i]))
            throw Error(ErrorCode::DegenerateShape,
                        "reference distance for " + std::string(kChannelNames[i]) + " is not positive");
}

FeatureVector compute_features(const LandmarkFrame& frame, const ReferenceShape& ref)
{
    for (const auto& pt : frame.points)
        if (!std::isfinite(pt.x) || !std::isfinite(pt.y))
            throw Error(ErrorCode::DegenerateShape, "non-finite landmark coordinate");
    const auto tracked = geometric_distances(frame.points);
    FeatureVector out{};
    for (std::size_t i = 0; i < kGeometricChannels; ++i) {
        if (!std::isfinite(tracked[i]))
            throw Error(ErrorCode::DegenerateShape,
                        "tracked distance for " + std::string(kChannelNames[i]) + " is not finite");
        out[i] = tracked[i] / ref.distances()[i];
    }
    out[9] = frame.yaw;
    out[10] = frame.pitch;
    out[11] = frame.roll;
    return out;
}

FeatureSeries extract_series(std::span<const LandmarkFrame> frames, const ReferenceShape& ref, double fps)
{
    if (frames.empty())
        throw Error(ErrorCode::EmptyInput, "no landmark frames");
    Matrix data(frames.size(), kChannelCount);
    for (std::size_t i = 0; i < frames.size(); ++i) {
        FeatureVector row;
        try {
            row = compute_features(frames[i], ref);
        } catch (const Error& e) {
            throw Error(e.code(), "frame " + std::to_string(i) + ": " + e.what());
        }
        std::copy(row.begin(), row.end(), data.row(i).begin());
    }
    return make_feature_series(std::move(data), fps);
}

std::vector<LandmarkFrame> read_landmark_frames(std::istream& in)
{
    std::vector<LandmarkFrame> frames;
    std::string line;
    std::size_t line_no = 0;
    bool first = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty())
            continue;
        const auto cells = detail::split(line, ',');
        if (first) {
            first = false;
            if (!detail::parse_double(cells[0]))
                continue; // header
        }
        if (cells.size() != kValuesPerRow) {
            const std::size_t points = cells.size() >= 3 ? (cells.size() - 3) / 2 : 0;
            throw Error(ErrorCode::MissingLandmark,
                        "line " + std::to_string(line_no) + ": " + std::to_string(points) +
                            " landmarks, expected " + std::to_string(kLandmarkCount));
        }
        std::array<double, kValuesPerRow> v{};
        for (std::size_t i = 0; i < kValuesPerRow; ++i) {
            auto d = detail::parse_double(cells[i]);
            if (!d || !std::isfinite(*d))
                throw Error(ErrorCode::MalformedRow, "line " + std::to_string(line_no));
            v[i] = *d;
        }
        LandmarkFrame f;
        for (std::size_t k = 0; k < kLandmarkCount; ++k)
            f.points[k] = {v[2 * k], v[2 * k + 1]};
        f.yaw = v[2 * kLandmarkCount];
        f.pitch = v[2 * kLandmarkCount + 1];
        f.roll = v[2 * kLandmarkCount + 2];
        frames.push_back(f);
    }
    if (frames.empty())
        throw Error(ErrorCode::EmptyFile, "no landmark rows");
    return frames;
}

std::vector<LandmarkFrame> load_landmark_frames(const std::filesystem::path& path)
{
    auto in = detail::open_input(path);
    return read_landmark_frames(in);
}

void write_landmark_frames(std::span<const LandmarkFrame> frames, std::ostream& out)
{
    for (std::size_t k = 0; k < kLandmarkCount; ++k)
        out << (k ? "," : "") << 'x' << k << ",y" << k;
    out << ",yaw,pitch,roll\n";
    for (const auto& f : frames) {
        for (std::size_t k = 0; k < kLandmarkCount; ++k)
            out << (k ? "," : "") << detail::format_double(f.points[k].x) << ','
                << detail::format_double(f.points[k].y);
        out << ',' << detail::format_double(f.yaw) << ',' << detail::format_double(f.pitch) << ','
            << detail::format_double(f.roll) << '\n';
    }
}

ReferenceShape load_reference_shape(const std::filesystem::path& path)
{
    const auto frames = load_landmark_frames(path);
    if (frames.size() != 1)
        throw Error(ErrorCode::MalformedRow, "reference shape file must hold exactly one row");
    return ReferenceShape(frames.front().points);
}

} // namespace ems
