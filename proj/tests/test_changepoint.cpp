#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "epitk/changepoint.hpp"

using namespace epitk;
using namespace epitk::changepoint;

namespace {

// Direct single-split CUSUM: |sqrt(nr/(n nl)) sum_left - sqrt(nl/(n nr)) sum_right|,
// written from the definition with explicit means.
double brute_cusum(const std::vector<double>& x, std::size_t s, std::size_t e, std::size_t b)
{
    double ml = 0.0;
    double mr = 0.0;
    for (std::size_t t = s; t <= b; ++t) ml += x[t - 1];
    for (std::size_t t = b + 1; t <= e; ++t) mr += x[t - 1];
    const double nl = static_cast<double>(b - s + 1);
    const double nr = static_cast<double>(e - b);
    ml /= nl;
    mr /= nr;
    return std::sqrt(nl * nr / (nl + nr)) * std::abs(ml - mr);
}

std::vector<double> step_signal(std::size_t T, const std::vector<std::size_t>& cps, const std::vector<double>& levels)
{
    std::vector<double> x(T);
    std::size_t seg = 0;
    for (std::size_t t = 1; t <= T; ++t) {
        if (seg < cps.size() && t > cps[seg]) ++seg;
        x[t - 1] = levels[seg];
    }
    return x;
}

std::vector<double> kink_signal(std::size_t T, const std::vector<std::size_t>& kinks, double intercept,
                                const std::vector<double>& slopes)
{
    std::vector<double> x(T);
    double v = intercept;
    std::size_t seg = 0;
    for (std::size_t t = 1; t <= T; ++t) {
        x[t - 1] = v;
        if (seg < kinks.size() && t >= kinks[seg]) ++seg;
        v += slopes[seg];
    }
    return x;
}

}  // namespace

TEST_CASE("constant series has no change-points")
{
    const std::vector<double> x(60, 5.0);
    for (auto model : {SignalModel::PiecewiseConstant, SignalModel::ContinuousPiecewiseLinear}) {
        const auto r = isolate_detect(x, model);
        CHECK(r.locations.empty());
        REQUIRE(r.segments.size() == 1);
        CHECK(r.fitted[30] == doctest::Approx(5.0));
    }
}

TEST_CASE("isolation order on the two change-point example")
{
    // r1 = 38, r2 = 77, T = 100, lambda = 10.
    const auto x = step_signal(100, {38, 77}, {0.0, 6.0, 1.0});
    IdConfig cfg;
    cfg.lambda = 10;
    const auto r = isolate_detect(x, SignalModel::PiecewiseConstant, cfg);
    REQUIRE(r.trace.size() == 2);
    // r2 found first on the left-expanding interval starting at 71.
    CHECK(r.trace[0].location == 77);
    CHECK_FALSE(r.trace[0].right_expanding);
    CHECK(r.trace[0].interval_start == 71);
    CHECK(r.trace[0].interval_end == 100);
    CHECK(r.trace[0].intervals_examined == 6);
    // then r1 on the right-expanding interval ending at 40 in [1, 71].
    CHECK(r.trace[1].location == 38);
    CHECK(r.trace[1].right_expanding);
    CHECK(r.trace[1].interval_start == 1);
    CHECK(r.trace[1].interval_end == 40);
    CHECK(r.trace[1].intervals_examined == 4);
    CHECK(r.locations == std::vector<std::size_t>{38, 77});

    // Same order under moderate Gaussian noise.
    std::mt19937_64 gen(5);
    std::normal_distribution<double> noise(0.0, 0.5);
    auto noisy = x;
    for (auto& v : noisy) v += noise(gen);
    const auto rn = isolate_detect(noisy, SignalModel::PiecewiseConstant, cfg);
    REQUIRE(rn.trace.size() == 2);
    CHECK(rn.trace[0].location == 77);
    CHECK(rn.trace[0].interval_start == 71);
    CHECK(rn.trace[1].location == 38);
    CHECK(rn.trace[1].interval_end == 40);
}

TEST_CASE("CUSUM contrast agrees with brute force")
{
    std::mt19937_64 gen(17);
    std::uniform_real_distribution<double> u(-5.0, 20.0);
    for (int rep = 0; rep < 40; ++rep) {
        const std::size_t T = 5 + gen() % 46;
        std::vector<double> x(T);
        for (auto& v : x) v = u(gen);
        const std::size_t s = 1 + gen() % (T - 2);
        const std::size_t e = s + 1 + gen() % (T - s);
        for (std::size_t b = s; b < e; ++b) {
            CHECK(cusum_contrast(x, s, e, b) == doctest::Approx(brute_cusum(x, s, e, b)).epsilon(1e-10));
        }
    }
}

TEST_CASE("linear contrast vanishes on lines and peaks at a kink")
{
    std::vector<double> line(30);
    for (std::size_t i = 0; i < line.size(); ++i) line[i] = 3.0 - 0.7 * static_cast<double>(i);
    for (std::size_t b = 2; b < 30; ++b) CHECK(linear_contrast(line, 1, 30, b) == doctest::Approx(0.0).epsilon(1e-9));

    const auto k = kink_signal(30, {12}, 1.0, {1.0, -2.0});
    std::size_t arg = 0;
    double best = -1.0;
    for (std::size_t b = 2; b < 30; ++b) {
        const double c = linear_contrast(k, 1, 30, b);
        if (c > best) {
            best = c;
            arg = b;
        }
    }
    CHECK(arg == 12);
}

TEST_CASE("exact recovery on noiseless signals")
{
    std::mt19937_64 gen(2024);
    for (int rep = 0; rep < 25; ++rep) {
        const std::size_t T = 120 + gen() % 80;
        std::vector<std::size_t> cps;
        std::size_t pos = 25 + gen() % 10;
        while (pos + 25 < T) {
            cps.push_back(pos);
            pos += 25 + gen() % 20;
        }
        SUBCASE("piecewise constant")
        {
            std::vector<double> levels{0.0};
            std::uniform_real_distribution<double> jump(2.0, 10.0);
            for (std::size_t k = 0; k < cps.size(); ++k) {
                levels.push_back(levels.back() + (gen() % 2 ? 1.0 : -1.0) * jump(gen));
            }
            const auto x = step_signal(T, cps, levels);
            const auto r = isolate_detect(x, SignalModel::PiecewiseConstant);
            CHECK(r.locations == cps);
            for (std::size_t t = 0; t < T; ++t) CHECK(r.fitted[t] == doctest::Approx(x[t]));
        }
        SUBCASE("continuous piecewise linear")
        {
            std::vector<double> slopes{0.5};
            std::uniform_real_distribution<double> change(0.5, 2.0);
            for (std::size_t k = 0; k < cps.size(); ++k) {
                slopes.push_back(slopes.back() + (gen() % 2 ? 1.0 : -1.0) * change(gen));
            }
            const auto x = kink_signal(T, cps, 10.0, slopes);
            const auto r = isolate_detect(x, SignalModel::ContinuousPiecewiseLinear);
            CHECK(r.locations == cps);
        }
    }
}

TEST_CASE("continuity of the linear fit at change-points")
{
    std::mt19937_64 gen(9);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (int rep = 0; rep < 10; ++rep) {
        auto x = kink_signal(100, {30, 65}, 0.0, {1.0, -1.5, 0.3});
        for (auto& v : x) v += noise(gen);
        const auto r = isolate_detect(x, SignalModel::ContinuousPiecewiseLinear);
        for (std::size_t j = 1; j < r.segments.size(); ++j) {
            const auto& a = r.segments[j - 1];
            const auto& b = r.segments[j];
            const double t = static_cast<double>(a.last);
            CHECK(std::abs((a.intercept + a.slope * t) - (b.intercept + b.slope * t)) < 1e-9);
        }
    }
}

TEST_CASE("raising the threshold never brings the first detection forward")
{
    // Position of an interval in the schedule R1, L1, R2, L2, ... of [1, T].
    auto schedule_rank = [](const Detection& d, std::size_t T, std::size_t lambda) {
        const std::size_t len = d.interval_end - d.interval_start + 1;
        const std::size_t K = (T + lambda - 1) / lambda;
        const std::size_t j = std::min(K, (len + lambda - 1) / lambda);
        return 2 * j - (d.right_expanding ? 1 : 0);
    };
    std::mt19937_64 gen(31);
    std::poisson_distribution<int> pois(8);
    for (int rep = 0; rep < 10; ++rep) {
        std::vector<double> x(90);
        for (std::size_t t = 0; t < x.size(); ++t) x[t] = pois(gen) + (t > 40 ? 10.0 : 0.0) + (t > 70 ? -6.0 : 0.0);
        for (auto model : {SignalModel::PiecewiseConstant, SignalModel::ContinuousPiecewiseLinear}) {
            std::size_t prev_rank = 0;
            for (double zeta = 0.5; zeta < 60.0; zeta *= 1.3) {
                IdConfig cfg;
                cfg.threshold = zeta;
                const auto r = isolate_detect(x, model, cfg);
                if (r.trace.empty()) {
                    prev_rank = 1000;
                    continue;
                }
                const auto rank = schedule_rank(r.trace.front(), x.size(), 10);
                CHECK(rank >= prev_rank);
                prev_rank = rank;
            }
        }
    }
}

TEST_CASE("K is non-increasing in the threshold on well-separated signals")
{
    std::mt19937_64 gen(32);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (int rep = 0; rep < 10; ++rep) {
        auto x = step_signal(120, {30, 60, 90}, {0.0, 8.0, 2.0, 9.0});
        for (auto& v : x) v += noise(gen);
        std::size_t prev = x.size();
        for (double zeta = 4.0; zeta < 60.0; zeta *= 1.2) {
            IdConfig cfg;
            cfg.threshold = zeta;
            const auto k = isolate_detect(x, SignalModel::PiecewiseConstant, cfg).locations.size();
            CHECK(k <= prev);
            prev = k;
        }
        CHECK(prev == 0);
    }
}

TEST_CASE("each detection is isolated when found")
{
    std::mt19937_64 gen(77);
    std::normal_distribution<double> noise(0.0, 1.0);
    auto x = step_signal(150, {30, 60, 100, 125}, {0.0, 8.0, 2.0, 10.0, 4.0});
    for (auto& v : x) v += noise(gen);
    const auto r = isolate_detect(x, SignalModel::PiecewiseConstant);
    for (std::size_t i = 0; i < r.trace.size(); ++i) {
        const auto& d = r.trace[i];
        CHECK(d.interval_start <= d.location);
        CHECK(d.location < d.interval_end);
        for (std::size_t j = 0; j < i; ++j) {
            const auto other = r.trace[j].location;
            CHECK_FALSE((other >= d.interval_start && other < d.interval_end));
        }
    }
}

TEST_CASE("argument checks")
{
    const std::vector<double> x(15, 1.0);
    CHECK_THROWS_AS(isolate_detect(x, SignalModel::PiecewiseConstant), ArgumentError);
    IdConfig cfg;
    cfg.lambda = 1;
    const std::vector<double> y(40, 1.0);
    CHECK_THROWS_AS(isolate_detect(y, SignalModel::PiecewiseConstant, cfg), ArgumentError);
    const std::vector<std::size_t> bad{5, 5};
    CHECK_THROWS_AS(fit_segments(y, bad, SignalModel::PiecewiseConstant), ArgumentError);
    const std::vector<std::size_t> beyond{40};
    CHECK_THROWS_AS(fit_segments(y, beyond, SignalModel::PiecewiseConstant), ArgumentError);
    CHECK(parse_model("linear") == SignalModel::ContinuousPiecewiseLinear);
    CHECK_THROWS_AS(parse_model("cubic"), ArgumentError);
}

TEST_CASE("segment refits")
{
    SUBCASE("no locations gives the global mean")
    {
        const std::vector<double> x{1.0, 2.0, 3.0, 6.0};
        const auto f = fit_segments(x, {}, SignalModel::PiecewiseConstant);
        for (double v : f.fitted) CHECK(v == doctest::Approx(3.0));
    }
    SUBCASE("noiseless step is reproduced")
    {
        std::vector<double> x(20, 0.0);
        for (std::size_t i = 10; i < 20; ++i) x[i] = 10.0;
        const std::vector<std::size_t> loc{10};
        const auto f = fit_segments(x, loc, SignalModel::PiecewiseConstant);
        for (std::size_t i = 0; i < x.size(); ++i) CHECK(f.fitted[i] == x[i]);
        ChangePointResult r;
        r.segments = f.segments;
        CHECK(segment_jumps(r) == std::vector<double>{10.0});
    }
    SUBCASE("noiseless spline is reproduced")
    {
        const auto x = kink_signal(40, {15, 28}, 2.0, {0.5, 2.0, -1.0});
        const std::vector<std::size_t> loc{15, 28};
        const auto f = fit_segments(x, loc, SignalModel::ContinuousPiecewiseLinear);
        for (std::size_t i = 0; i < x.size(); ++i) CHECK(f.fitted[i] == doctest::Approx(x[i]).epsilon(1e-10));
        CHECK(f.segments[1].slope == doctest::Approx(2.0));
        CHECK(f.segments[2].slope == doctest::Approx(-1.0));
    }
}

TEST_CASE("final-segment forecasts")
{
    SUBCASE("flat final segment of threes")
    {
        std::vector<double> x(40, 3.0);
        for (std::size_t i = 0; i < 20; ++i) x[i] = 12.0;
        const auto r = isolate_detect(x, SignalModel::PiecewiseConstant);
        REQUIRE(r.locations == std::vector<std::size_t>{20});
        const auto f = forecast(r, 7, 0.95);
        REQUIRE(f.size() == 7);
        for (const auto& p : f) {
            CHECK(p.point == doctest::Approx(3.0));
            CHECK(p.lower == doctest::Approx(3.0));
            CHECK(p.upper == doctest::Approx(3.0));
        }
    }
    SUBCASE("linear final segment, slope -1 ending at 10")
    {
        // Least-squares on noiseless data is exact, so day h forecasts 10 - h.
        std::vector<double> y(30);
        for (std::size_t t = 1; t <= 30; ++t) y[t - 1] = t <= 15 ? 25.0 + 2.0 * (static_cast<double>(t) - 15.0)
                                                                  : 40.0 - static_cast<double>(t);
        REQUIRE(y.back() == 10.0);
        const std::vector<std::size_t> loc{15};
        auto f = fit_segments(y, loc, SignalModel::ContinuousPiecewiseLinear);
        ChangePointResult r;
        r.model = SignalModel::ContinuousPiecewiseLinear;
        r.observed = y;
        r.locations = {15};
        r.fitted = f.fitted;
        r.segments = f.segments;
        const auto fc = forecast(r, 7, 0.95);
        for (const auto& p : fc) {
            CHECK(p.point == doctest::Approx(10.0 - p.horizon_day).epsilon(1e-9));
            CHECK(p.upper - p.lower == doctest::Approx(0.0).epsilon(1e-9));
        }
    }
    SUBCASE("intervals are ordered and non-negative")
    {
        std::mt19937_64 gen(4);
        std::poisson_distribution<int> pois(2);
        std::vector<double> x(60);
        for (std::size_t t = 0; t < x.size(); ++t) x[t] = pois(gen) + (t < 30 ? 20.0 : 0.0);
        for (auto model : {SignalModel::PiecewiseConstant, SignalModel::ContinuousPiecewiseLinear}) {
            const auto r = isolate_detect(x, model);
            for (const auto& p : forecast(r, 7, 0.95)) {
                CHECK(p.lower >= 0.0);
                CHECK(p.lower <= p.point);
                CHECK(p.point <= p.upper);
            }
        }
    }
    SUBCASE("bad arguments")
    {
        const std::vector<double> x(40, 1.0);
        const auto r = isolate_detect(x, SignalModel::PiecewiseConstant);
        CHECK_THROWS_AS(forecast(r, 0, 0.95), ArgumentError);
        CHECK_THROWS_AS(forecast(r, 3, 1.5), ArgumentError);
    }
}
