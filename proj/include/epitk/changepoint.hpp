#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "epitk/core.hpp"

/// A-posteriori change-point estimation with Isolate-Detect.
///
/// Time is 1-based throughout: t = 1..T, and a change-point r means the last
/// observation of a segment, so segment j spans r_{j-1}+1..r_j with r_0 = 0
/// and r_{K+1} = T.
namespace epitk::changepoint {

enum class SignalModel { PiecewiseConstant, ContinuousPiecewiseLinear };

SignalModel parse_model(std::string_view name);
std::string_view to_string(SignalModel model);

struct IdConfig {
    int lambda = 10;
    /// Detection threshold; empty means C * sigma * sqrt(2 log T).
    std::optional<double> threshold;
    /// Noise scale; empty means MAD of first (constant) or second (linear) differences.
    std::optional<double> sigma;
    /// Overrides the C in the automatic threshold (1.1 constant, 1.4 linear).
    std::optional<double> threshold_constant;
};

/// f(t) = intercept + slope * t on t in [first, last].
struct Segment {
    std::size_t first = 1;
    std::size_t last = 1;
    double intercept = 0.0;
    double slope = 0.0;
};

struct SegmentFit {
    std::vector<double> fitted;
    std::vector<Segment> segments;
};

/// One accepted detection together with the interval it was isolated in.
struct Detection {
    std::size_t location = 0;
    std::size_t interval_start = 0;
    std::size_t interval_end = 0;
    bool right_expanding = true;
    int phase = 0;
    /// Intervals evaluated (not served from the no-detection cache) in this phase.
    int intervals_examined = 0;
    double contrast = 0.0;
};

struct ChangePointResult {
    SignalModel model = SignalModel::PiecewiseConstant;
    std::vector<std::size_t> locations;
    std::vector<double> observed;
    std::vector<double> fitted;
    std::vector<Segment> segments;
    std::vector<PredictionInterval> forecasts;
    std::vector<Detection> trace;
    double threshold = 0.0;
    double sigma = 0.0;
};

/// CUSUM contrast of splitting [s, e] after b (s <= b < e).
double cusum_contrast(std::span<const double> x, std::size_t s, std::size_t e, std::size_t b);

/// Contrast for a kink at b (s < b < e) in a continuous piecewise-linear
/// signal: inner product of the data with the unit-norm hinge (t - b)_+
/// after removing its projection on {1, t} over [s, e].
double linear_contrast(std::span<const double> x, std::size_t s, std::size_t e, std::size_t b);

/// Scale-matched MAD noise estimate appropriate to the model.
double estimate_sigma(std::span<const double> x, SignalModel model);

double auto_threshold(double sigma, std::size_t length, SignalModel model, std::optional<double> constant = {});

ChangePointResult isolate_detect(std::span<const double> x, SignalModel model, const IdConfig& cfg = {});
ChangePointResult isolate_detect(const IncidenceSeries& series, SignalModel model, const IdConfig& cfg = {});

/// Least-squares refit: segment means, or a continuous linear spline with
/// knots at the locations.
SegmentFit fit_segments(std::span<const double> x, std::span<const std::size_t> locations, SignalModel model);

/// Mean differences between consecutive segments (constant model).
std::vector<double> segment_jumps(const ChangePointResult& result);

/// Extrapolates the final segment; Gaussian intervals from the final segment
/// residual spread, clipped below at zero.
std::vector<PredictionInterval> forecast(const ChangePointResult& result, int horizon, double level);

}  // namespace epitk::changepoint
