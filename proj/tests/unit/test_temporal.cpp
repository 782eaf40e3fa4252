#include <doctest.h>

#include <cmath>
#include <sstream>

#include "ems/temporal.hpp"
#include "helpers.hpp"

using namespace ems;

namespace {

FeatureSeries ramp_series(std::size_t frames, double slope_per_frame, double fps = 25.0)
{
    Matrix m(frames, kChannelCount);
    for (std::size_t i = 0; i < frames; ++i)
        for (std::size_t c = 0; c < kChannelCount; ++c)
            m(i, c) = slope_per_frame * static_cast<double>(i) * static_cast<double>(c + 1) + static_cast<double>(c);
    return FeatureSeries{m, fps};
}

// Velocity recomputed directly at window end t; the time gap is (size - 1) / fps.
double direct_velocity(const FeatureSeries& s, std::size_t c, std::size_t end, std::size_t size)
{
    const std::size_t first = end + 1 - size;
    return (s.data(end, c) - s.data(first, c)) / (static_cast<double>(size - 1) / s.fps);
}

} // namespace

TEST_SUITE("temporal")
{
    TEST_CASE("velocity of a constant channel is zero")
    {
        const auto s = ramp_series(30, 0.0);
        const auto v = velocity(s, WindowConfig{5, 0.01});
        CHECK(v.rows() == 26);
        CHECK(v.cols() == kChannelCount);
        for (std::size_t r = 0; r < v.rows(); ++r)
            for (double x : v.row(r))
                CHECK(x == 0.0);
        const auto e = events(s, WindowConfig{5, 0.0});
        for (std::size_t r = 0; r < e.rows(); ++r)
            for (double x : e.row(r))
                CHECK(x == 0.0);
    }

    TEST_CASE("ramp over a five frame window")
    {
        Matrix m(5, kChannelCount);
        for (std::size_t i = 0; i < 5; ++i)
            m(i, 0) = 0.1 * static_cast<double>(i);
        const auto v = velocity(FeatureSeries{m, 25.0}, WindowConfig{5, 0.0});
        REQUIRE(v.rows() == 1);
        CHECK(v(0, 0) == doctest::Approx(2.5).epsilon(1e-12));
    }

    TEST_CASE("velocity matches direct recomputation")
    {
        for (std::size_t size : {2u, 6u, 20u, 40u}) {
            const auto s = test::random_series(120, size, 30.0);
            const auto v = velocity(s, WindowConfig{size, 0.01});
            REQUIRE(v.rows() == s.frames() - size + 1);
            for (std::size_t r = 0; r < v.rows(); ++r)
                for (std::size_t c = 0; c < kChannelCount; ++c)
                    CHECK(std::abs(v(r, c) - direct_velocity(s, c, r + size - 1, size)) <= 1e-12);
        }
    }

    TEST_CASE("ramp slope is recovered at every position and size")
    {
        const auto s = ramp_series(100, 0.01, 25.0);
        for (std::size_t size : {2u, 5u, 33u, 100u}) {
            const auto v = velocity(s, WindowConfig{size, 0.0});
            for (std::size_t r = 0; r < v.rows(); ++r)
                for (std::size_t c = 0; c < kChannelCount; ++c)
                    CHECK(v(r, c) == doctest::Approx(0.01 * 25.0 * static_cast<double>(c + 1)).epsilon(1e-9));
        }
    }

    TEST_CASE("events of ramps")
    {
        const auto up = events(ramp_series(40, 0.02), WindowConfig{10, 0.0});
        const auto down = events(ramp_series(40, -0.02), WindowConfig{10, 0.0});
        for (std::size_t r = 0; r < up.rows(); ++r)
            for (std::size_t c = 0; c < kChannelCount; ++c) {
                CHECK(up(r, c) == 1.0);
                CHECK(down(r, c) == -1.0);
            }
    }

    TEST_CASE("deadband boundary is inclusive")
    {
        // fps 4 and window 5 give a one second gap, so velocity is exact
        Matrix m(5, kChannelCount);
        for (std::size_t c = 0; c < kChannelCount; ++c)
            m(4, c) = c % 2 == 0 ? 0.5 : -0.5;
        const FeatureSeries s{m, 4.0};
        const auto v = velocity(s, WindowConfig{5, 0.5});
        CHECK(v(0, 0) == 0.5);
        const auto at = events(s, WindowConfig{5, 0.5});
        const auto below = events(s, WindowConfig{5, 0.4999});
        const auto ev = event_velocity(s, WindowConfig{5, 0.5});
        for (std::size_t c = 0; c < kChannelCount; ++c) {
            CHECK(at(0, c) == 0.0);
            CHECK(ev(0, c) == 0.0);
            CHECK(below(0, c) == (c % 2 == 0 ? 1.0 : -1.0));
        }
    }

    TEST_CASE("events flip under negation")
    {
        const auto s = test::random_series(80, 21);
        FeatureSeries neg = s;
        for (std::size_t r = 0; r < neg.frames(); ++r)
            for (auto& x : neg.data.row(r))
                x = -x;
        const WindowConfig w{7, 0.0};
        const auto a = events(s, w);
        const auto b = events(neg, w);
        for (std::size_t r = 0; r < a.rows(); ++r)
            for (std::size_t c = 0; c < kChannelCount; ++c)
                CHECK(b(r, c) == -a(r, c));
    }

    TEST_CASE("event velocity recomposes")
    {
        const auto fall = event_velocity(ramp_series(30, -0.03), WindowConfig{6, 0.0});
        const auto vfall = velocity(ramp_series(30, -0.03), WindowConfig{6, 0.0});
        for (std::size_t r = 0; r < fall.rows(); ++r)
            for (std::size_t c = 0; c < kChannelCount; ++c) {
                CHECK(fall(r, c) > 0.0);
                CHECK(fall(r, c) == std::abs(vfall(r, c)));
            }

        const auto s = test::random_series(90, 5);
        const WindowConfig w{8, 0.3};
        const auto v = velocity(s, w);
        const auto e = events(s, w);
        const auto ev = event_velocity(s, w);
        for (std::size_t r = 0; r < v.rows(); ++r)
            for (std::size_t c = 0; c < kChannelCount; ++c) {
                CHECK(ev(r, c) == e(r, c) * v(r, c));
                CHECK(ev(r, c) == (std::abs(v(r, c)) <= 0.3 ? 0.0 : std::abs(v(r, c))));
            }
    }

    TEST_CASE("window errors")
    {
        const auto s = test::random_series(10, 1);
        CHECK(test::error_of([&] { velocity(s, WindowConfig{11, 0.0}); }) == ErrorCode::WindowTooLarge);
        CHECK(test::error_of([&] { events(s, WindowConfig{11, 0.0}); }) == ErrorCode::WindowTooLarge);
        CHECK(test::error_of([&] { event_velocity(s, WindowConfig{11, 0.0}); }) == ErrorCode::WindowTooLarge);
        CHECK(test::error_of([&] { velocity(s, WindowConfig{10, 0.0}); }) == std::nullopt);
        CHECK(test::error_of([&] { velocity(s, WindowConfig{1, 0.0}); }) == ErrorCode::InvalidArgument);
        CHECK(test::error_of([&] { velocity(s, WindowConfig{5, -1.0}); }) == ErrorCode::InvalidArgument);
        const std::vector<FeatureKind> none;
        CHECK(test::error_of([&] { build_design_matrix(s, WindowConfig{5, 0.0}, none); }) == ErrorCode::EmptyKinds);
    }

    TEST_CASE("default window sizes per state")
    {
        CHECK(default_window_size(EmotionState::Agreement) == 20);
        CHECK(default_window_size(EmotionState::Concentration) == 40);
        CHECK(default_window_size(EmotionState::Thoughtful) == 20);
        CHECK(default_window_size(EmotionState::Certain) == 40);
        CHECK(default_window_size(EmotionState::Interest) == 40);
    }

    TEST_CASE("design matrix shapes and columns")
    {
        const auto s = test::random_series(60, 9);
        const WindowConfig w{10, 0.05};
        const std::vector<FeatureKind> orig{FeatureKind::Original};
        const auto m1 = build_design_matrix(s, w, orig);
        CHECK(m1.cols() == 12);
        CHECK(m1.rows() == 51);
        CHECK(m1.first_frame == 9);
        CHECK_FALSE(m1.weighted);
        for (std::size_t r = 0; r < m1.rows(); ++r)
            for (std::size_t c = 0; c < 12; ++c)
                CHECK(m1.values(r, c) == s.data(r + 9, c));

        const std::vector<FeatureKind> two{FeatureKind::Original, FeatureKind::Velocity};
        CHECK(build_design_matrix(s, w, two).cols() == 24);

        const auto all = build_design_matrix(s, w, kAllKinds);
        REQUIRE(all.cols() == 48);
        const auto v = velocity(s, w);
        const auto e = events(s, w);
        const auto ev = event_velocity(s, w);
        for (std::size_t r = 0; r < all.rows(); ++r)
            for (std::size_t c = 0; c < 12; ++c) {
                CHECK(all.values(r, c) == s.data(r + 9, c));
                CHECK(all.values(r, 12 + c) == v(r, c));
                CHECK(all.values(r, 24 + c) == e(r, c));
                CHECK(all.values(r, 36 + c) == ev(r, c));
            }
        std::vector<std::string> names;
        for (const auto& t : all.columns)
            names.push_back(t.name());
        std::sort(names.begin(), names.end());
        CHECK(std::adjacent_find(names.begin(), names.end()) == names.end());
        CHECK(all.columns[13].name() == std::string(kChannelNames[1]) + ":velocity");

        // requested order does not change the column layout
        const std::vector<FeatureKind> reversed{FeatureKind::EventVelocity, FeatureKind::Original};
        const auto rev = build_design_matrix(s, w, reversed);
        CHECK(rev.columns.front().kind == FeatureKind::Original);
        CHECK(columns_of_kinds(all, std::vector<FeatureKind>{FeatureKind::Event}).front() == 24);
    }

    TEST_CASE("derived rows shift with the series")
    {
        const auto s = test::random_series(70, 13);
        const std::size_t k = 6;
        Matrix shifted(s.frames() - k, kChannelCount);
        for (std::size_t r = 0; r < shifted.rows(); ++r)
            for (std::size_t c = 0; c < kChannelCount; ++c)
                shifted(r, c) = s.data(r + k, c);
        const WindowConfig w{12, 0.01};
        const auto a = build_design_matrix(s, w, kAllKinds);
        const auto b = build_design_matrix(FeatureSeries{shifted, s.fps}, w, kAllKinds);
        REQUIRE(b.rows() + k == a.rows());
        for (std::size_t r = 0; r < b.rows(); ++r)
            for (std::size_t c = 0; c < a.cols(); ++c)
                CHECK(b.values(r, c) == a.values(r + k, c));
    }

    TEST_CASE("parse kinds")
    {
        CHECK(parse_kind("iii") == FeatureKind::Event);
        CHECK(parse_kind("event_velocity") == FeatureKind::EventVelocity);
        CHECK(parse_kind("speed") == std::nullopt);
    }

    TEST_CASE("weighting")
    {
        const auto s = test::random_series(50, 31);
        const WindowConfig w{6, 0.2};
        const auto m = build_design_matrix(s, w, kAllKinds);
        const EmotionState st = EmotionState::Thoughtful;

        MicMatrix ones;
        ones.cols = {std::string(to_string(st))};
        for (std::size_t c = 0; c < kChannelCount; ++c)
            ones.rows.emplace_back(kChannelNames[c]);
        ones.scores = Matrix(kChannelCount, 1, 1.0);
        const auto same = weight_features(m, ones, st);
        CHECK(same.weighted);
        CHECK(same.values == m.values);

        // originals use the channel weight, derived kinds the max with the velocity row
        MicMatrix table;
        table.cols = {"Agreement", std::string(to_string(st))};
        std::vector<double> chan(kChannelCount), vel(kChannelCount);
        for (std::size_t c = 0; c < kChannelCount; ++c) {
            chan[c] = 0.05 + 0.07 * static_cast<double>(c);
            vel[c] = c % 3 == 0 ? 0.9 - 0.05 * static_cast<double>(c) : 0.01;
            table.rows.emplace_back(kChannelNames[c]);
        }
        for (std::size_t c = 0; c < kChannelCount; ++c)
            table.rows.push_back(velocity_weight_name(c));
        table.scores = Matrix(2 * kChannelCount, 2, 0.0);
        for (std::size_t c = 0; c < kChannelCount; ++c) {
            table.scores(c, 1) = chan[c];
            table.scores(kChannelCount + c, 1) = vel[c];
            table.scores(c, 0) = 0.999;
        }
        const auto wm = weight_features(m, table, st);
        for (std::size_t j = 0; j < m.cols(); ++j) {
            const auto& tag = m.columns[j];
            const double want = tag.kind == FeatureKind::Original ? chan[tag.channel]
                                                                  : std::max(chan[tag.channel], vel[tag.channel]);
            CHECK(wm.weights[j] == want);
            CHECK(column_weight(tag, table, st) == want);
            for (std::size_t r = 0; r < m.rows(); ++r)
                CHECK(wm.values(r, j) == m.values(r, j) * want);
        }
        // undo
        for (std::size_t r = 0; r < m.rows(); ++r)
            for (std::size_t j = 0; j < m.cols(); ++j)
                CHECK(std::abs(wm.values(r, j) / wm.weights[j] - m.values(r, j)) <= 1e-12);

        // single column halved
        const std::vector<std::size_t> one_col{0};
        const auto single = select_columns(m, one_col);
        MicMatrix half = ones;
        half.scores(0, 0) = 0.5;
        const auto halved = weight_features(single, half, st);
        for (std::size_t r = 0; r < single.rows(); ++r)
            CHECK(halved.values(r, 0) == single.values(r, 0) * 0.5);

        MicMatrix missing = ones;
        missing.rows.pop_back();
        missing.scores = Matrix(kChannelCount - 1, 1, 1.0);
        CHECK(test::error_of([&] { weight_features(m, missing, st); }) == ErrorCode::MissingWeight);
        CHECK(test::error_of([&] { weight_features(m, ones, EmotionState::Interest); }) == ErrorCode::MissingWeight);
    }

    TEST_CASE("design matrix csv")
    {
        const auto s = test::random_series(12, 2);
        const std::vector<FeatureKind> kinds{FeatureKind::Original, FeatureKind::Event};
        const auto m = build_design_matrix(s, WindowConfig{4, 0.0}, kinds);
        std::ostringstream out;
        write_design_matrix(m, out);
        std::istringstream in(out.str());
        std::string l1, l2, l3;
        std::getline(in, l1);
        std::getline(in, l2);
        std::getline(in, l3);
        CHECK(l1.rfind("frame," + std::string(kChannelNames[0]) + ",", 0) == 0);
        CHECK(l2.rfind("kind,original,", 0) == 0);
        CHECK(l2.find("event") != std::string::npos);
        CHECK(l3.rfind("3,", 0) == 0);
        std::size_t lines = 3;
        for (std::string l; std::getline(in, l);)
            ++lines;
        CHECK(lines == 2 + m.rows());
    }
}
