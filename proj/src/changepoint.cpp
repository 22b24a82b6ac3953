#include "epitk/changepoint.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <utility>

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>

namespace epitk::changepoint {

SignalModel parse_model(std::string_view name)
{
    if (name == "constant" || name == "piecewise-constant") return SignalModel::PiecewiseConstant;
    if (name == "linear" || name == "piecewise-linear") return SignalModel::ContinuousPiecewiseLinear;
    throw ArgumentError("unknown signal model '" + std::string(name) + "' (expected constant|linear)");
}

std::string_view to_string(SignalModel model)
{
    return model == SignalModel::PiecewiseConstant ? "constant" : "linear";
}

namespace {

// x is 0-based storage of the 1-based series.
inline double at(std::span<const double> x, std::size_t t)
{
    return x[t - 1];
}

double mad_scale(std::vector<double> d)
{
    if (d.empty()) return 0.0;
    const double m = median(d);
    for (double& v : d) v = std::abs(v - m);
    return 1.482602218505602 * median(std::move(d));
}

std::size_t min_length(SignalModel model)
{
    return model == SignalModel::PiecewiseConstant ? 2 : 3;
}

/// Contrast maximiser over one interval; ties resolve to the smallest b.
struct IntervalMax {
    std::size_t location = 0;
    double value = 0.0;
};

IntervalMax max_cusum(std::span<const double> x, std::size_t s, std::size_t e)
{
    IntervalMax best;
    const double n = static_cast<double>(e - s + 1);
    double total = 0.0;
    for (std::size_t t = s; t <= e; ++t) total += at(x, t);
    double left = 0.0;
    for (std::size_t b = s; b < e; ++b) {
        left += at(x, b);
        const double nl = static_cast<double>(b - s + 1);
        const double nr = n - nl;
        const double c = std::abs(std::sqrt(nr / (n * nl)) * left - std::sqrt(nl / (n * nr)) * (total - left));
        if (c > best.value) best = {b, c};
    }
    return best;
}

// Projection residual of the data on {1, t} over [s, e] and the centred basis.
struct LinearFrame {
    std::vector<double> resid;
    std::vector<double> centred;
    double tbar = 0.0;
    double norm_u = 0.0;
};

LinearFrame linear_frame(std::span<const double> x, std::size_t s, std::size_t e)
{
    const std::size_t n = e - s + 1;
    LinearFrame f;
    f.tbar = 0.5 * static_cast<double>(s + e);
    f.centred.resize(n);
    double xbar = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        f.centred[i] = static_cast<double>(s + i) - f.tbar;
        xbar += at(x, s + i);
    }
    xbar /= static_cast<double>(n);
    double uu = 0.0;
    double ux = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        uu += f.centred[i] * f.centred[i];
        ux += f.centred[i] * (at(x, s + i) - xbar);
    }
    f.norm_u = std::sqrt(uu);
    f.resid.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        f.resid[i] = at(x, s + i) - xbar - (uu > 0 ? ux / uu * f.centred[i] : 0.0);
    }
    return f;
}

double linear_contrast_in_frame(const LinearFrame& f, std::size_t s, std::size_t e, std::size_t b)
{
    const std::size_t n = e - s + 1;
    double hx = 0.0;
    double hh = 0.0;
    double h1 = 0.0;
    double hu = 0.0;
    for (std::size_t t = b + 1; t <= e; ++t) {
        const double h = static_cast<double>(t - b);
        const std::size_t i = t - s;
        hx += h * f.resid[i];
        hh += h * h;
        h1 += h;
        hu += h * f.centred[i];
    }
    const double proj = h1 * h1 / static_cast<double>(n) + (f.norm_u > 0 ? hu * hu / (f.norm_u * f.norm_u) : 0.0);
    const double norm2 = hh - proj;
    if (!(norm2 > 0.0)) return 0.0;
    return std::abs(hx) / std::sqrt(norm2);
}

IntervalMax max_linear(std::span<const double> x, std::size_t s, std::size_t e)
{
    IntervalMax best;
    const auto frame = linear_frame(x, s, e);
    for (std::size_t b = s + 1; b < e; ++b) {
        const double c = linear_contrast_in_frame(frame, s, e, b);
        if (c > best.value) best = {b, c};
    }
    return best;
}

}  // namespace

double cusum_contrast(std::span<const double> x, std::size_t s, std::size_t e, std::size_t b)
{
    if (s < 1 || e > x.size() || !(s <= b && b < e)) throw ArgumentError("cusum_contrast: need 1 <= s <= b < e <= T");
    const double n = static_cast<double>(e - s + 1);
    const double nl = static_cast<double>(b - s + 1);
    const double nr = n - nl;
    double left = 0.0;
    double right = 0.0;
    for (std::size_t t = s; t <= b; ++t) left += at(x, t);
    for (std::size_t t = b + 1; t <= e; ++t) right += at(x, t);
    return std::abs(std::sqrt(nr / (n * nl)) * left - std::sqrt(nl / (n * nr)) * right);
}

double linear_contrast(std::span<const double> x, std::size_t s, std::size_t e, std::size_t b)
{
    if (s < 1 || e > x.size() || !(s < b && b < e)) throw ArgumentError("linear_contrast: need 1 <= s < b < e <= T");
    return linear_contrast_in_frame(linear_frame(x, s, e), s, e, b);
}

double estimate_sigma(std::span<const double> x, SignalModel model)
{
    std::vector<double> d;
    if (model == SignalModel::PiecewiseConstant) {
        for (std::size_t i = 1; i < x.size(); ++i) d.push_back(x[i] - x[i - 1]);
        return mad_scale(std::move(d)) / std::sqrt(2.0);
    }
    for (std::size_t i = 2; i < x.size(); ++i) d.push_back(x[i] - 2.0 * x[i - 1] + x[i - 2]);
    return mad_scale(std::move(d)) / std::sqrt(6.0);
}

double auto_threshold(double sigma, std::size_t length, SignalModel model, std::optional<double> constant)
{
    const double c = constant.value_or(model == SignalModel::PiecewiseConstant ? 1.1 : 1.4);
    return c * sigma * std::sqrt(2.0 * std::log(static_cast<double>(length)));
}

ChangePointResult isolate_detect(std::span<const double> x, SignalModel model, const IdConfig& cfg)
{
    const std::size_t T = x.size();
    if (cfg.lambda < 2) throw ArgumentError("isolate_detect: lambda must be at least 2");
    if (cfg.sigma && !(*cfg.sigma > 0.0)) throw ArgumentError("isolate_detect: explicit sigma must be positive");
    if (cfg.threshold && !(*cfg.threshold > 0.0)) throw ArgumentError("isolate_detect: threshold must be positive");
    if (T < 2 * static_cast<std::size_t>(cfg.lambda)) {
        throw ArgumentError("isolate_detect: series of length " + std::to_string(T) + " is shorter than 2*lambda");
    }
    for (double v : x) {
        if (!std::isfinite(v)) throw EstimationError("isolate_detect: non-finite observation");
    }

    ChangePointResult result;
    result.model = model;
    result.observed.assign(x.begin(), x.end());
    result.sigma = cfg.sigma.value_or(estimate_sigma(x, model));
    result.threshold = cfg.threshold.value_or(auto_threshold(result.sigma, T, model, cfg.threshold_constant));

    double scale = 1.0;
    for (double v : x) scale = std::max(scale, std::abs(v));
    // Contrasts of exactly-fitting intervals are pure rounding noise.
    const double noise_floor = 1e-9 * scale * static_cast<double>(T);
    const double cut = std::max(result.threshold, noise_floor);

    const std::size_t lam = static_cast<std::size_t>(cfg.lambda);
    const std::size_t minlen = min_length(model);
    std::set<std::pair<std::size_t, std::size_t>> quiet;  // intervals already seen without detection

    auto evaluate = [&](std::size_t a, std::size_t b) -> IntervalMax {
        if (b < a || b - a + 1 < minlen) return {};
        const auto best = model == SignalModel::PiecewiseConstant ? max_cusum(x, a, b) : max_linear(x, a, b);
        if (!std::isfinite(best.value)) throw EstimationError("isolate_detect: non-finite contrast");
        return best;
    };

    std::size_t s = 1;
    std::size_t e = T;
    int phase = 0;
    while (e >= s && e - s + 1 >= minlen) {
        ++phase;
        const std::size_t n = e - s + 1;
        const std::size_t K = (n + lam - 1) / lam;
        int examined = 0;
        bool found = false;
        for (std::size_t j = 1; j <= K && !found; ++j) {
            for (int side = 0; side < 2 && !found; ++side) {
                const bool right = side == 0;
                const std::size_t lo = right ? s : (j < K ? e - j * lam + 1 : s);
                const std::size_t hi = right ? (j < K ? s + j * lam - 1 : e) : e;
                if (quiet.contains({lo, hi})) continue;
                ++examined;
                const auto best = evaluate(lo, hi);
                if (best.value > cut) {
                    result.trace.push_back({best.location, lo, hi, right, phase, examined, best.value});
                    result.locations.push_back(best.location);
                    if (right) s = hi;
                    else e = lo;
                    found = true;
                }
                else {
                    quiet.insert({lo, hi});
                }
            }
        }
        if (!found) break;
    }

    std::sort(result.locations.begin(), result.locations.end());
    result.locations.erase(std::unique(result.locations.begin(), result.locations.end()), result.locations.end());
    auto fit = fit_segments(x, result.locations, model);
    result.fitted = std::move(fit.fitted);
    result.segments = std::move(fit.segments);
    return result;
}

ChangePointResult isolate_detect(const IncidenceSeries& series, SignalModel model, const IdConfig& cfg)
{
    const auto x = series.cases_as_double();
    return isolate_detect(x, model, cfg);
}

SegmentFit fit_segments(std::span<const double> x, std::span<const std::size_t> locations, SignalModel model)
{
    const std::size_t T = x.size();
    if (T == 0) throw ArgumentError("fit_segments: empty series");
    std::size_t prev = 0;
    for (auto r : locations) {
        if (r <= prev || r >= T) {
            throw ArgumentError("fit_segments: locations must be strictly increasing within [1, T-1] (empty segment)");
        }
        prev = r;
    }

    SegmentFit out;
    out.fitted.assign(T, 0.0);
    std::vector<std::size_t> bounds{0};
    bounds.insert(bounds.end(), locations.begin(), locations.end());
    bounds.push_back(T);

    if (model == SignalModel::PiecewiseConstant) {
        for (std::size_t j = 0; j + 1 < bounds.size(); ++j) {
            const std::size_t first = bounds[j] + 1;
            const std::size_t last = bounds[j + 1];
            double m = 0.0;
            for (std::size_t t = first; t <= last; ++t) m += at(x, t);
            m /= static_cast<double>(last - first + 1);
            for (std::size_t t = first; t <= last; ++t) out.fitted[t - 1] = m;
            out.segments.push_back({first, last, m, 0.0});
        }
        return out;
    }

    // Continuous linear spline: f(t) = c0 + c1 t + sum_k c_{k+1} (t - r_k)_+
    const std::size_t p = 2 + locations.size();
    if (T < p) throw ArgumentError("fit_segments: too many change-points for a linear spline");
    Eigen::MatrixXd X(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(p));
    Eigen::VectorXd y(static_cast<Eigen::Index>(T));
    const double tc = 0.5 * static_cast<double>(T + 1);  // centring for conditioning
    for (std::size_t t = 1; t <= T; ++t) {
        const auto row = static_cast<Eigen::Index>(t - 1);
        X(row, 0) = 1.0;
        X(row, 1) = static_cast<double>(t) - tc;
        for (std::size_t k = 0; k < locations.size(); ++k) {
            X(row, static_cast<Eigen::Index>(k + 2)) =
                std::max(0.0, static_cast<double>(t) - static_cast<double>(locations[k]));
        }
        y(row) = at(x, t);
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    if (qr.rank() < static_cast<Eigen::Index>(p)) throw ArgumentError("fit_segments: rank-deficient spline design");
    const Eigen::VectorXd c = qr.solve(y);
    const Eigen::VectorXd f = X * c;
    for (std::size_t t = 0; t < T; ++t) out.fitted[t] = f(static_cast<Eigen::Index>(t));

    double slope = c(1);
    double intercept = c(0) - c(1) * tc;
    for (std::size_t j = 0; j + 1 < bounds.size(); ++j) {
        if (j > 0) {
            const double ck = c(static_cast<Eigen::Index>(j + 1));
            const double r = static_cast<double>(bounds[j]);
            slope += ck;
            intercept -= ck * r;
        }
        out.segments.push_back({bounds[j] + 1, bounds[j + 1], intercept, slope});
    }
    return out;
}

std::vector<double> segment_jumps(const ChangePointResult& result)
{
    std::vector<double> jumps;
    for (std::size_t j = 1; j < result.segments.size(); ++j) {
        const auto& a = result.segments[j - 1];
        const auto& b = result.segments[j];
        const double t = static_cast<double>(a.last);
        jumps.push_back((b.intercept + b.slope * (t + 1)) - (a.intercept + a.slope * t));
    }
    return jumps;
}

std::vector<PredictionInterval> forecast(const ChangePointResult& result, int horizon, double level)
{
    if (horizon < 1) throw ArgumentError("forecast: horizon must be >= 1");
    if (!(level > 0.0 && level < 1.0)) throw ArgumentError("forecast: level must be in (0,1)");
    if (result.segments.empty()) throw EstimationError("forecast: result has no fitted segments");
    const auto& last = result.segments.back();
    const std::size_t n = last.last - last.first + 1;
    const bool linear = result.model == SignalModel::ContinuousPiecewiseLinear;
    if (linear && n < 2) throw EstimationError("forecast: final linear segment needs at least 2 observations");

    double rss = 0.0;
    for (std::size_t t = last.first; t <= last.last; ++t) {
        const double r = result.observed[t - 1] - result.fitted[t - 1];
        rss += r * r;
    }
    const double sd = n > 1 ? std::sqrt(rss / static_cast<double>(n - 1)) : 0.0;
    if (!std::isfinite(sd)) throw EstimationError("forecast: degenerate final segment");
    const double z = boost::math::quantile(boost::math::normal(), 0.5 * (1.0 + level));

    std::vector<PredictionInterval> out;
    const double T = static_cast<double>(result.observed.size());
    for (int h = 1; h <= horizon; ++h) {
        const double raw = last.intercept + last.slope * (T + h);
        const double point = std::max(0.0, raw);
        out.push_back({h, point, std::max(0.0, raw - z * sd), std::max(point, raw + z * sd), level});
    }
    return out;
}

}  // namespace epitk::changepoint
