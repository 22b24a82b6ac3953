#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "epitk/compartmental.hpp"
#include "epitk/core.hpp"

namespace epitk::rt {

/// R = alpha*beta*D + (1 - alpha)*mu*beta*D.
double effective_r(double alpha, double beta, double mu, double D);

enum class PosteriorForm { Samples, Grid, Gamma };

/// Posterior summary for one period. The raw representation is kept so the
/// summaries can be recomputed.
struct RtEstimate {
    Date start;
    Date end;  ///< inclusive
    PosteriorForm form = PosteriorForm::Samples;
    std::vector<double> samples;
    std::vector<double> grid;
    std::vector<double> mass;
    double shape = 0.0;
    double rate = 0.0;

    bool insufficient = false;  ///< no usable signal; summaries are NaN
    double median = 0.0;
    double lower = 0.0;  ///< 2.5%
    double upper = 0.0;  ///< 97.5%
    double prob_below_one = 0.0;
};

/// Fills median, 95% interval and P(R < 1) from the stored representation.
void summarise(RtEstimate& est);
/// P(R < 1) from the stored representation: sample fraction, grid mass
/// strictly below 1, or the gamma cdf.
double prob_below_one(const RtEstimate& est);

// ---------------------------------------------------------------------------
// Independence sampler
// ---------------------------------------------------------------------------

struct SamplerResult {
    std::vector<std::vector<double>> draws;  ///< post burn-in chain
    std::vector<double> log_likelihood;      ///< matching draws
    double acceptance_rate = 0.0;
};

/// Metropolis-Hastings with the prior as proposal: a candidate is accepted
/// with probability min(1, L(candidate) / L(current)).
SamplerResult independence_sampler(const std::function<std::vector<double>(Rng&)>& draw_prior,
                                   const std::function<double(const std::vector<double>&)>& log_likelihood,
                                   int n_steps, int burn_in, Rng& rng);

// ---------------------------------------------------------------------------
// Model 1, fortnightly MCMC
// ---------------------------------------------------------------------------

struct PeriodPrior {
    double alpha_a = 2.0;
    double alpha_b = 2.0;
    /// Gamma(shape, scale) when true, Exponential(rate) otherwise.
    bool beta_gamma = false;
    double beta_shape = 1.5;
    double beta_scale = 1.5;
    double beta_rate = 1.0;
    std::optional<double> fixed_alpha;
};

/// Beta(2,2) then Beta(3,2) twice then Beta(4,2); Gamma(3/2, scale 3/2) for
/// beta in the first period and Exponential(1) afterwards.
std::vector<PeriodPrior> default_priors(int n_periods);

struct Mcmc1Config {
    double Z = 5.1;
    double D = 3.5;
    double mu = 0.5;
    double tau_d = 6.0;
    double delay_shape = 1.85;
    double population = 875000.0;
    int period_days = 14;
    int n_periods = 6;
    int lead_days = 3;  ///< analysis starts this many days before the first case
    int init_max = 10;  ///< E and Iu at the start ~ U{0..init_max}
    std::vector<PeriodPrior> priors;  ///< empty: default_priors(n_periods)
    int n_steps = 10000;
    int burn_in = 2000;
    RngSeed seed{1};
    /// Replaces the max(1, y^2/4) variance rule; infinity flattens the likelihood.
    std::optional<double> obs_variance;
    /// Fixed first-period state instead of the uniform prior on E and Iu.
    std::optional<compartmental::SeirState> initial_state;
};

struct Mcmc1Period {
    RtEstimate rt;
    std::vector<double> alpha;
    std::vector<double> beta;
    double acceptance_rate = 0.0;
};

struct Mcmc1Result {
    std::vector<Mcmc1Period> periods;
    std::vector<std::string> warnings;
};

/// max(1, y^2 / 4).
double observation_variance(double y);

Mcmc1Result mcmc_model1(const IncidenceSeries& data, const Mcmc1Config& cfg = {});

// ---------------------------------------------------------------------------
// Model 2, ensemble adjustment Kalman filter
// ---------------------------------------------------------------------------

/// Serial EAKF update for one scalar observation. `predicted` holds each
/// member's predicted observation; every row of `members` (one per member) is
/// shifted by regression on the observation increments. Returns false and
/// leaves everything unchanged when the predicted variance has collapsed.
bool eakf_update(std::vector<std::vector<double>>& members, std::span<const double> predicted, double observation,
                 double obs_variance);

struct Range {
    double lo = 0.0;
    double hi = 0.0;
};

struct EakfConfig {
    int n_members = 300;
    Range mu{0.2, 1.0};
    Range theta{1.0, 1.75};
    Range Z{3.5, 5.5};
    Range D{3.0, 4.0};
    Range beta_pre{0.1, 1.5};
    Range beta_post{0.0, 0.8};
    Range alpha{0.3, 1.0};
    double tau_d = 6.0;
    double delay_shape = 1.85;
    double inflation = 1.01;
    double seed_max = 5.0;  ///< initial E and Iu per district ~ U[0, seed_max]
    int lead_days = 7;
    std::optional<Date> lockdown;  ///< beta is redrawn from beta_post on this day
    RngSeed seed{1};
};

struct EakfResult {
    std::vector<RtEstimate> weekly;
    std::vector<std::string> warnings;
};

/// `districts` are aligned daily series (same start date and length), one per
/// row of `mobility`; `populations` in the same order.
EakfResult eakf_model2(std::span<const IncidenceSeries> districts, const MobilityMatrix& mobility,
                       std::span<const double> populations, const EakfConfig& cfg = {});

// ---------------------------------------------------------------------------
// Windowed Poisson filter on the SI model
// ---------------------------------------------------------------------------

struct BettencourtConfig {
    int window = 7;
    double D = 3.5;
    double r_max = 12.0;
    double step = 0.01;
};

/// One estimate per day from the second day on. Expected cases are
/// k_{t-1} exp((R - 1) / D); days with k_{t-1} = 0 carry no information.
std::vector<RtEstimate> bettencourt_rt(const IncidenceSeries& data, const BettencourtConfig& cfg = {});

// ---------------------------------------------------------------------------
// Cori et al. renewal estimator
// ---------------------------------------------------------------------------

struct CoriConfig {
    double si_mean = 6.48;
    double si_sd = 3.83;
    int window = 7;
    double a0 = 1.0;
    double b0 = 0.2;  ///< rate
};

/// w_s = F(s) - F(s - 1), s = 1, 2, ..., truncated when the tail is below
/// 1e-10 and renormalised. Index 0 holds w_0 = 0.
std::vector<double> serial_interval_weights(double mean, double sd);

/// Non-overlapping windows starting on the second day.
std::vector<RtEstimate> cori_rt(const IncidenceSeries& data, const CoriConfig& cfg = {});

}  // namespace epitk::rt
