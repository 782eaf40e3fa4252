#include <doctest.h>

#include <cmath>
#include <sstream>

#include "ems/facefeat.hpp"
#include "helpers.hpp"

using namespace ems;

namespace {

std::array<Point2, kLandmarkCount> reference_points()
{
    return load_reference_shape(EMS_DATA_DIR "/reference_shape.csv").points();
}

double dist(Point2 a, Point2 b)
{
    return std::hypot(a.x - b.x, a.y - b.y);
}

Point2 mid(Point2 a, Point2 b)
{
    return {(a.x + b.x) / 2, (a.y + b.y) / 2};
}

LandmarkFrame frame_from(const std::array<Point2, kLandmarkCount>& pts, double yaw = 0, double pitch = 0, double roll = 0)
{
    LandmarkFrame f;
    f.points = pts;
    f.yaw = yaw;
    f.pitch = pitch;
    f.roll = roll;
    return f;
}

// Deterministic wobble of every landmark.
std::array<Point2, kLandmarkCount> perturbed(std::array<Point2, kLandmarkCount> pts, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (auto& p : pts) {
        p.x += u(rng);
        p.y += u(rng);
    }
    return pts;
}

} // namespace

TEST_SUITE("facefeat") {

TEST_CASE("frame equal to the reference gives unit ratios and copies pose")
{
    const ReferenceShape ref(reference_points());
    const auto f = compute_features(frame_from(reference_points(), 12.5, -3.0, 7.25), ref);
    for (std::size_t c = 0; c < kGeometricChannels; ++c)
        CHECK(f[c] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(f[9] == 12.5);
    CHECK(f[10] == -3.0);
    CHECK(f[11] == 7.25);
}

TEST_CASE("coincident left eyelids give eyeOL = 0")
{
    const ReferenceShape ref(reference_points());
    auto pts = reference_points();
    pts[43] = pts[47];
    pts[44] = pts[46];
    const auto f = compute_features(frame_from(pts), ref);
    CHECK(f[*channel_index("eyeOL")] == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    CHECK(f[*channel_index("eyeOR")] == doctest::Approx(1.0));
}

TEST_CASE("scaling landmarks scales geometric channels and leaves pose unchanged")
{
    const ReferenceShape ref(reference_points());
    const auto base = perturbed(reference_points(), 3);
    for (double s : {2.0, 0.5, 3.7}) {
        auto scaled = base;
        for (auto& p : scaled) {
            p.x *= s;
            p.y *= s;
        }
        const auto a = compute_features(frame_from(base, 1, 2, 3), ref);
        const auto b = compute_features(frame_from(scaled, 1, 2, 3), ref);
        for (std::size_t c = 0; c < kGeometricChannels; ++c)
            CHECK(b[c] == doctest::Approx(s * a[c]).epsilon(1e-12));
        CHECK(b[9] == a[9]);
        CHECK(b[10] == a[10]);
        CHECK(b[11] == a[11]);
    }
    auto doubled = reference_points();
    for (auto& p : doubled) {
        p.x *= 2;
        p.y *= 2;
    }
    const auto f = compute_features(frame_from(doubled), ref);
    for (std::size_t c = 0; c < kGeometricChannels; ++c)
        CHECK(f[c] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("geometric distances follow the documented landmark pairs")
{
    const auto p = perturbed(reference_points(), 9);
    const auto d = geometric_distances(p);
    auto centroid = [&](std::size_t first) {
        Point2 c{0, 0};
        for (std::size_t i = first; i < first + 6; ++i) {
            c.x += p[i].x / 6;
            c.y += p[i].y / 6;
        }
        return c;
    };
    const Point2 eye_l = centroid(42), eye_r = centroid(36);
    CHECK(d[0] == doctest::Approx(dist(mid(p[22], p[23]), eye_l)));
    CHECK(d[1] == doctest::Approx(dist(mid(p[21], p[20]), eye_r)));
    CHECK(d[2] == doctest::Approx(dist(mid(p[25], p[26]), eye_l)));
    CHECK(d[3] == doctest::Approx(dist(mid(p[17], p[18]), eye_r)));
    CHECK(d[4] == doctest::Approx(dist(mid(p[43], p[44]), mid(p[46], p[47]))));
    CHECK(d[5] == doctest::Approx(dist(mid(p[37], p[38]), mid(p[40], p[41]))));
    CHECK(d[6] == doctest::Approx(dist(p[51], p[57])));
    CHECK(d[7] == doctest::Approx(dist(p[61], p[64])));
    CHECK(d[8] == doctest::Approx(dist(p[48], p[54])));
}

TEST_CASE("extract_series: rows equal per-frame features")
{
    const ReferenceShape ref(reference_points());
    std::vector<LandmarkFrame> frames;
    for (std::uint64_t k = 0; k < 10; ++k)
        frames.push_back(frame_from(perturbed(reference_points(), k), k, -static_cast<double>(k), 0.5));
    const auto s = extract_series(frames, ref, 30.0);
    REQUIRE(s.frames() == 10);
    CHECK(s.fps == 30.0);
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const auto f = compute_features(frames[i], ref);
        for (std::size_t c = 0; c < kChannelCount; ++c)
            CHECK(s.data(i, c) == f[c]);
    }

    const std::vector<LandmarkFrame> same(10, frames[3]);
    const auto t = extract_series(same, ref);
    for (std::size_t i = 1; i < 10; ++i)
        for (std::size_t c = 0; c < kChannelCount; ++c)
            CHECK(t.data(i, c) == t.data(0, c));

    CHECK(test::error_of([&] { extract_series(std::vector<LandmarkFrame>{}, ref); }) == ErrorCode::EmptyInput);
}

TEST_CASE("non-finite landmark reports the frame index")
{
    const ReferenceShape ref(reference_points());
    std::vector<LandmarkFrame> frames(4, frame_from(reference_points()));
    frames[2].points[51].y = NAN;
    try {
        extract_series(frames, ref);
        FAIL("expected DegenerateShape");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DegenerateShape);
        CHECK(std::string(e.what()).find("frame 2") != std::string::npos);
    }
}

TEST_CASE("degenerate reference shape is rejected")
{
    auto pts = reference_points();
    pts[54] = pts[48];
    CHECK(test::error_of([&] { ReferenceShape r(pts); }) == ErrorCode::DegenerateShape);
}

TEST_CASE("landmark CSV: round trip and wrong point count")
{
    std::vector<LandmarkFrame> frames = {frame_from(reference_points(), 1, 2, 3),
                                         frame_from(perturbed(reference_points(), 1), -4, 5, -6)};
    std::stringstream io;
    write_landmark_frames(frames, io);
    const auto back = read_landmark_frames(io);
    REQUIRE(back.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        for (std::size_t k = 0; k < kLandmarkCount; ++k) {
            CHECK(back[i].points[k].x == frames[i].points[k].x);
            CHECK(back[i].points[k].y == frames[i].points[k].y);
        }
        CHECK(back[i].roll == frames[i].roll);
    }

    std::ostringstream short_row;
    for (int k = 0; k < 65 * 2 + 3; ++k)
        short_row << (k ? "," : "") << k;
    std::istringstream in(short_row.str() + "\n");
    try {
        read_landmark_frames(in);
        FAIL("expected MissingLandmark");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MissingLandmark);
        CHECK(std::string(e.what()).find("65") != std::string::npos);
    }
}

}
