// SPDX-License-Identifier: MIT
#include <gtest/gtest.h>

#include <cmath>

#include "rbbm/fkpp_front.hpp"

using namespace rbbm;

namespace {

PdeConfig small(Params p, double T) {
    PdeConfig c = make_pde_config(p, T, 0.1);
    return c;
}

} // namespace

TEST(Pde, FixedPoints) {
    for (double level : {0.0, 1.0}) {
        PdeConfig c = small({2.0, 0.5}, 2.0);
        c.f = [=](double) { return level; };
        c.g = [=](double) { return level; };
        const auto r = solve_coupled(c);
        for (double x : r.final_state.u) EXPECT_EQ(x, level);
        for (double x : r.final_state.v) EXPECT_EQ(x, level);
    }
}

TEST(Pde, ValidatesStabilityAndDomain) {
    PdeConfig c = small({2.0, 0.5}, 5.0);
    c.dt = c.dx * c.dx;
    EXPECT_THROW(solve_coupled(c), ValidationError);
    c = small({2.0, 0.5}, 5.0);
    c.y_hi = 10.0;
    EXPECT_THROW(solve_coupled(c), ValidationError);
}

TEST(Pde, RejectsOvershootingInitialData) {
    PdeConfig c = small({1.0, 1.0}, 1.0);
    c.f = [](double) { return 1.5; };
    EXPECT_THROW(solve_coupled(c), RuntimeError);
}

TEST(Pde, StaysInUnitIntervalAndMonotone) {
    const auto r = solve_coupled(small({2.0, 0.5}, 10.0));
    const auto& st = r.final_state;
    for (std::size_t i = 0; i < st.u.size(); ++i) {
        EXPECT_GE(st.u[i], 0.0);
        EXPECT_LE(st.u[i], 1.0);
        EXPECT_GE(st.v[i], 0.0);
        EXPECT_LE(st.v[i], 1.0);
        // g is nonincreasing in x and so is v; in y = -x it is nondecreasing
        if (i > 0) {
            EXPECT_GE(st.v[i], st.v[i - 1] - 1e-14);
        }
    }
}

TEST(FrontPosition, StepRampAndTranslation) {
    const std::vector<double> step{1, 1, 1, 0, 0, 0};
    // w_2 = 1 >= 0.5 > w_3 = 0: crossing at the midpoint of the segment
    EXPECT_DOUBLE_EQ(front_position(step, 0.0, 1.0, 0.5), 2.5);
    const std::vector<double> sharp{1, 1, 0.5, 0, 0};
    EXPECT_DOUBLE_EQ(front_position(sharp, 0.0, 1.0, 0.5), 2.0);
    std::vector<double> ramp;
    const double a = 2.0, b = 6.0, dx = 0.25;
    for (double y = 0.0; y <= 10.0 + 1e-12; y += dx)
        ramp.push_back(std::clamp((b - y) / (b - a), 0.0, 1.0));
    EXPECT_NEAR(front_position(ramp, 0.0, dx, 0.5), 0.5 * (a + b), 1e-12);
    EXPECT_NEAR(front_position(ramp, 3.75, dx, 0.5), 0.5 * (a + b) + 3.75, 1e-12);
    EXPECT_THROW(front_position(std::vector<double>{0, 0, 0}, 0.0, 1.0, 0.5), RuntimeError);
}

TEST(FrontSpeed, SyntheticSeries) {
    std::vector<FrontSample> s;
    for (int k = 0; k <= 100; ++k) {
        const double t = 0.1 * k;
        s.push_back({t, 1.5 * t + 3.0, 0.0, 0.0, 0.0});
    }
    EXPECT_NEAR(front_speed(s, 2.0, 8.0), 1.5, 1e-12);
    EXPECT_THROW(front_speed(s, 2.0, 2.5), ValidationError);
}

TEST(Pde, VOnlyMatchesCoupledBitForBit) {
    const PdeConfig c = small({2.0, 0.5}, 8.0);
    const auto a = solve_coupled(c), b = solve_coupled(c, true);
    EXPECT_EQ(a.final_state.v, b.final_state.v);
    ASSERT_EQ(a.series.size(), b.series.size());
    for (std::size_t i = 0; i < a.series.size(); ++i) EXPECT_EQ(a.series[i].front_v, b.series[i].front_v);
}

TEST(Pde, ComparisonPrinciple) {
    // Enlarging f pointwise never decreases u.
    PdeConfig lo = small({2.0, 0.5}, 8.0), hi = lo;
    lo.f = StepData{2.0};
    hi.f = [](double x) { return std::max(StepData{2.0}(x), StepData{2.0}(x - 3.0)); };
    const auto a = solve_coupled(lo), b = solve_coupled(hi);
    for (std::size_t i = 0; i < a.final_state.u.size(); ++i)
        EXPECT_GE(b.final_state.u[i], a.final_state.u[i] - 1e-12);
}

TEST(Pde, KppSpeedOfTheSecondComponent) {
    PdeConfig c = make_pde_config({1.0, 1.0}, 60.0, 0.1);
    const double coarse = front_speed(solve_coupled(c, true).series, 30.0, 60.0, Field::V);
    EXPECT_LT(std::abs(coarse / kSqrt2 - 1.0), 0.03) << coarse;
    PdeConfig fine = c;
    fine.dx /= 2.0;
    fine.dt /= 4.0;
    const double f = front_speed(solve_coupled(fine, true).series, 30.0, 60.0, Field::V);
    EXPECT_LT(std::abs(f / coarse - 1.0), 0.005) << coarse << ' ' << f;
}
