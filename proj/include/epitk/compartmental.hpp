#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "epitk/core.hpp"

namespace epitk::compartmental {

// ---------------------------------------------------------------------------
// Model 1: SEIR with reported (Ir) and unreported (Iu) infections
// ---------------------------------------------------------------------------

struct Model1Params {
    double beta = 1.0;   ///< transmission rate, 1/day
    double mu = 0.5;     ///< relative transmissibility of unreported cases
    double Z = 5.1;      ///< latency period, days
    double D = 3.5;      ///< infectious period, days
    double alpha = 0.5;  ///< reporting rate
    double tau_d = 6.0;  ///< mean reporting delay, days
    double delay_shape = 1.85;

    void validate() const;
};

struct SeirState {
    double S = 0.0;
    double E = 0.0;
    double Ir = 0.0;
    double Iu = 0.0;
    double N = 0.0;
};

struct StepResult {
    SeirState state;
    /// alpha*E/Z flux over the day (rounded to whole persons in stochastic mode).
    double new_reported = 0.0;
};

/// One day of stochastic RK4: every flux term is a Poisson draw at every
/// stage, stages are combined with the usual weights, rounded and clipped at 0.
StepResult step_model1(const SeirState& state, const Model1Params& p, Rng& rng);
/// Same step with each Poisson draw replaced by its mean; no rounding.
StepResult step_model1_mean(const SeirState& state, const Model1Params& p);

/// P(ceil(delay) = k) for k = 0, 1, 2, ... with delay ~ Gamma(shape, tau_d/shape).
/// Truncated once the remaining mass is below 1e-12.
std::vector<double> delay_pmf(const Model1Params& p);

/// Whole days until an infection reported today is recorded.
int draw_delay(const Model1Params& p, Rng& rng);

struct Model1Run {
    std::vector<SeirState> states;     ///< horizon + 1 entries, day 0 first
    std::vector<double> new_reported;  ///< flux per day, horizon entries
    std::vector<double> recorded;      ///< y(t), horizon entries
    /// Recordings that fall after the horizon, indexed by days past the end.
    std::vector<double> pending;
    double total_reported = 0.0;
};

/// Stochastic run. A report generated on day t is recorded on day
/// t + ceil(delay). `carry` holds recordings pending from an earlier run
/// (carry[k] lands on day k).
Model1Run simulate_model1(const Model1Params& p, const SeirState& init, int horizon, Rng& rng,
                          std::span<const double> carry = {});
Model1Run simulate_model1(const Model1Params& p, const SeirState& init, int horizon, RngSeed seed,
                          std::span<const double> carry = {});
/// Expected trajectory: mean steps and the delay distribution applied as a
/// convolution.
Model1Run simulate_model1_mean(const Model1Params& p, const SeirState& init, int horizon,
                               std::span<const double> carry = {});

// ---------------------------------------------------------------------------
// Model 2: five-district metapopulation version of model 1
// ---------------------------------------------------------------------------

struct Model2Params {
    Model1Params disease;
    double theta = 1.0;  ///< mobility multiplier
};

struct MetaState {
    std::vector<std::string> names;
    std::vector<SeirState> districts;
};

struct MetaStepResult {
    MetaState state;
    std::vector<double> new_reported;
};

/// One day of the metapopulation model. Mobility entry (i, j) is the daily
/// flow from district i to district j. Each district draws from its own
/// stream `rngs[i]`. Populations are moved deterministically after the step.
MetaStepResult step_model2(const MetaState& state, const Model2Params& p, const MobilityMatrix& mobility,
                           std::span<Rng> rngs);
MetaStepResult step_model2_mean(const MetaState& state, const Model2Params& p, const MobilityMatrix& mobility);

struct Model2Run {
    std::vector<MetaState> states;
    std::vector<std::vector<double>> new_reported;  ///< [district][day]
    std::vector<std::vector<double>> recorded;      ///< [district][day]
};

/// District i uses the stream derive_seed(seed, i), so with no mobility each
/// district reproduces simulate_model1 run on that stream.
Model2Run simulate_model2(const Model2Params& p, const MobilityMatrix& mobility, const MetaState& init, int horizon,
                          RngSeed seed);
Model2Run simulate_model2_mean(const Model2Params& p, const MobilityMatrix& mobility, const MetaState& init,
                               int horizon);

// ---------------------------------------------------------------------------
// Model 3: SEIR with protection, quarantine, recovery and death
// ---------------------------------------------------------------------------

struct Model3Params {
    double zeta = 0.0;       ///< protection rate
    double beta = 0.0;       ///< transmission rate
    double gamma_inv = 3.0;  ///< latent time, days
    double delta_inv = 4.0;  ///< quarantine time, days
    std::array<double, 3> lambda{0.0, 0.0, 0.0};
    double kappa = 0.0;  ///< constant mortality rate

    void validate() const;
};

struct SeirqpdState {
    double S = 0.0;
    double P = 0.0;
    double E = 0.0;
    double I = 0.0;
    double Q = 0.0;
    double R = 0.0;
    double D = 0.0;

    [[nodiscard]] double total() const { return S + P + E + I + Q + R + D; }
};

/// lambda1 / (1 + exp(-lambda2 (t - lambda3))).
double recovery_rate(double t, const std::array<double, 3>& lambda);

/// Adaptive Dormand-Prince integration with daily output (horizon + 1
/// states). Time t = 0 is the first state; the cure rate uses that clock.
std::vector<SeirqpdState> integrate_model3(const Model3Params& p, const SeirqpdState& init, int horizon);

struct Model3Observations {
    std::vector<double> active;     ///< Q: cumulative cases - recovered - deaths
    std::vector<double> recovered;  ///< cumulative
    std::vector<double> deaths;     ///< cumulative
};

/// Builds the fitted series from daily counts; recovered and deaths columns
/// are required.
Model3Observations model3_observations(const IncidenceSeries& series);

struct Model3Bounds {
    std::array<double, 2> zeta{0.0, 0.5};
    std::array<double, 2> beta{0.0, 5.0};
    std::array<double, 2> delta_inv{0.5, 30.0};
    std::array<double, 2> lambda1{0.0, 1.0};
    std::array<double, 2> lambda2{0.0, 2.0};
    std::array<double, 2> lambda3{0.0, 150.0};
    std::array<double, 2> kappa{0.0, 0.05};
    std::array<double, 2> E0{0.0, 200.0};
    std::array<double, 2> I0{0.0, 200.0};
};

struct Model3FitOptions {
    double population = 875000.0;
    int n_starts = 8;
    RngSeed seed{20200304};
    Model3Bounds bounds;
    int max_iterations = 500;
};

struct Model3Fit {
    Model3Params params;
    SeirqpdState init;
    std::vector<SeirqpdState> trajectory;
    double cost = 0.0;  ///< half the sum of squared residuals
    double re_active = 0.0;
    double re_recovered = 0.0;
    double re_deaths = 0.0;  ///< NaN when all observed deaths are zero
    int best_start = 0;
    std::vector<double> start_costs;
};

/// Least squares on (Q, R, D) over (zeta, beta, delta_inv, lambda1..3,
/// kappa, E0, I0) with gamma_inv held fixed.
Model3Fit fit_model3(const Model3Observations& obs, double gamma_inv, const Model3FitOptions& opts = {});

/// Refits for each latent time in `gamma_invs`.
std::vector<Model3Fit> sweep_model3(const Model3Observations& obs, std::span<const double> gamma_invs,
                                    const Model3FitOptions& opts = {});

// ---------------------------------------------------------------------------
// Model 4: SI
// ---------------------------------------------------------------------------

struct SiState {
    double S = 0.0;
    double I = 0.0;
};

/// Classical RK4 over `dt` days in `substeps` equal steps.
SiState step_model4(const SiState& state, double beta, double D, double N, double dt = 1.0, int substeps = 10);

}  // namespace epitk::compartmental
