#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "ems/dataset.hpp"

namespace ems {

inline constexpr std::size_t kLandmarkCount = 66;
inline constexpr std::size_t kGeometricChannels = 9;

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

/// 66 tracked landmarks (iBUG-66 ordering, global transform already removed)
/// plus head pose in degrees.
struct LandmarkFrame {
    std::array<Point2, kLandmarkCount> points{};
    double yaw = 0.0;
    double pitch = 0.0;
    double roll = 0.0;
};

/// Landmark-pair distances behind the nine geometric channels, in channel order:
/// inner/outer brow height (left, right), eye opening (left, right), outer and
/// inner lip height, lip-corner distance.
///
/// Conventions on the iBUG-66 index layout:
///   brow heights   midpoint of the inner (21/20, 22/23) or outer (17/18, 25/26)
///                  brow pair to the centroid of that side's eye (36-41, 42-47)
///   eye opening    upper eyelid midpoint (37/38, 43/44) to lower (40/41, 46/47)
///   outer lip      51 to 57
///   inner lip      61 to 64 (the 66-point layout drops the inner mouth corners)
///   lip corners    48 to 54
/// "Left" is the subject's left (the 22-26 brow and 42-47 eye).
std::array<double, kGeometricChannels> geometric_distances(const std::array<Point2, kLandmarkCount>& pts);

class ReferenceShape {
public:
    /// Throws DegenerateShape if any reference distance is not strictly positive.
    explicit ReferenceShape(const std::array<Point2, kLandmarkCount>& points);

    const std::array<Point2, kLandmarkCount>& points() const noexcept { return points_; }
    const std::array<double, kGeometricChannels>& distances() const noexcept { return distances_; }

private:
    std::array<Point2, kLandmarkCount> points_;
    std::array<double, kGeometricChannels> distances_;
};

using FeatureVector = std::array<double, kChannelCount>;

/// Geometric channels are tracked/reference distance ratios; Yaw, Pitch, Roll
/// are copied through.
FeatureVector compute_features(const LandmarkFrame& frame, const ReferenceShape& ref);

/// Row i is compute_features(frames[i]). Throws EmptyInput; DegenerateShape
/// carries the failing frame index.
FeatureSeries extract_series(std::span<const LandmarkFrame> frames, const ReferenceShape& ref,
                             double fps = 25.0);

// Landmark CSV: x0,y0,...,x65,y65,yaw,pitch,roll per row, optional header.
std::vector<LandmarkFrame> read_landmark_frames(std::istream& in);
std::vector<LandmarkFrame> load_landmark_frames(const std::filesystem::path& path);
void write_landmark_frames(std::span<const LandmarkFrame> frames, std::ostream& out);

/// Reference shape file: same layout, a single row (pose columns ignored).
ReferenceShape load_reference_shape(const std::filesystem::path& path);

} // namespace ems
