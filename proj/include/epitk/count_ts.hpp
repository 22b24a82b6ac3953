#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "epitk/core.hpp"

/// Poisson log-linear autoregression with feedback and intervention effects:
///
///   X_t | past ~ Poisson(exp(nu_t)),
///   nu_t = d + a1 nu_{t-1} + b1 log(X_{t-1} + 1) + sum_k gamma_k w_k(t),
///
/// for t = 1..T. The pre-sample state nu_0 and the pre-sample lagged
/// observation log(X_0 + 1) are both set to `nu0`.
namespace epitk::count_ts {

enum class InterventionType { AO, TS, LS };

struct InterventionKind {
    InterventionType type = InterventionType::AO;
    double decay = 0.8;  ///< TS only, in (0, 1)
};

InterventionKind parse_kind(std::string_view name);
std::string to_string(const InterventionKind& kind);

struct Intervention {
    std::size_t time = 1;  ///< 1-based
    InterventionKind kind;
    double size = 0.0;
};

/// Deterministic covariate w(t) of an intervention at `time`.
double intervention_covariate(const InterventionKind& kind, std::size_t time, std::size_t t);

struct LogLinCountModel {
    double d = 0.0;
    double a1 = 0.0;
    double b1 = 0.0;
    std::vector<Intervention> interventions;
    double nu0 = 0.0;

    [[nodiscard]] bool is_stable() const;
};

/// nu_1..nu_T.
std::vector<double> filter_intensity(const LogLinCountModel& model, std::span<const double> x);

/// Full Poisson log-likelihood, including the -log(X_t!) terms.
double log_likelihood(const LogLinCountModel& model, std::span<const double> x);

/// Gradient of the log-likelihood with respect to (d, a1, b1, gamma_1..gamma_K).
Eigen::VectorXd score(const LogLinCountModel& model, std::span<const double> x);

/// Negative Hessian of the log-likelihood in the same coordinates as `score`.
Eigen::MatrixXd observed_information(const LogLinCountModel& model, std::span<const double> x);

struct Estimate {
    std::string name;
    double value = 0.0;
    double std_error = 0.0;
};

struct FitReport {
    LogLinCountModel model;
    std::vector<Estimate> estimates;
    double log_likelihood = 0.0;
    double bic = 0.0;
    std::size_t n_obs = 0;
    int n_params = 0;
    std::vector<double> fitted_means;
    /// Estimate sits at the edge of the stability region (|a1| or |a1+b1| > 0.999).
    bool boundary = false;
    int iterations = 0;
};

struct FitOptions {
    /// Fix a1 = b1 = 0 (independent Poisson with interventions).
    bool freeze_feedback = false;
    /// Pre-sample value; defaults to log(mean(X) + 1).
    std::optional<double> nu0;
    bool estimate_nu0 = false;
};

/// Maximum likelihood with the stability region enforced by
/// a1 = tanh(u), a1 + b1 = tanh(v). Intervention sizes in `interventions`
/// are used as starting values.
FitReport fit_mle(std::span<const double> x, std::vector<Intervention> interventions = {}, const FitOptions& opts = {});
FitReport fit_mle(const IncidenceSeries& series, std::vector<Intervention> interventions = {},
                  const FitOptions& opts = {});

struct DetectedIntervention {
    Intervention intervention;
    double statistic = 0.0;
    double p_value = 1.0;
    double p_adjusted = 1.0;
};

struct DetectionResult {
    std::vector<DetectedIntervention> detected;
    FitReport null_fit;
    FitReport final_fit;
};

struct DetectOptions {
    double level = 0.05;
    int max_interventions = 10;
    FitOptions fit;
};

/// Score statistic for adding one intervention to a fitted model, using the
/// conditional information with the fitted parameters profiled out.
double intervention_score_statistic(const LogLinCountModel& fitted, std::span<const double> x,
                                    const InterventionKind& kind, std::size_t time);

/// Iterative search over candidate times t in [3, T-2] and the given kinds.
/// Candidates are ranked by the score statistic; the leading few are refitted
/// jointly and the one with the largest likelihood ratio is added if its
/// Bonferroni-adjusted chi-square(1) p-value is below `level`. Repeats until
/// nothing is significant. `statistic` holds the likelihood ratio.
DetectionResult detect_interventions(std::span<const double> x, std::span<const InterventionKind> kinds,
                                     const DetectOptions& opts = {});

struct CountForecast {
    std::vector<PredictionInterval> simultaneous;
    std::vector<PredictionInterval> pointwise;
    /// Pointwise coverage used for each marginal band of the simultaneous set.
    double adjusted_level = 0.0;
};

/// Monte Carlo forecast paths drawn through the model recursion. Path i uses
/// the stream derive_seed(seed, i).
CountForecast predict_counts(const LogLinCountModel& model, std::span<const double> x, int horizon, double level,
                             RngSeed seed, int n_paths = 10000);

/// Simulates a path of length T.
std::vector<double> simulate(const LogLinCountModel& model, std::size_t T, Rng& rng);

}  // namespace epitk::count_ts
