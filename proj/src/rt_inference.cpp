#include "epitk/rt_inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/gamma.hpp>

namespace epitk::rt {

namespace cm = epitk::compartmental;

double effective_r(double alpha, double beta, double mu, double D)
{
    if (!(alpha > 0.0 && alpha <= 1.0) || !(mu > 0.0 && mu <= 1.0)) {
        throw ArgumentError("effective_r: alpha and mu must lie in (0, 1]");
    }
    if (!(beta >= 0.0) || !(D > 0.0)) throw ArgumentError("effective_r: need beta >= 0 and D > 0");
    return alpha * beta * D + (1.0 - alpha) * mu * beta * D;
}

double prob_below_one(const RtEstimate& est)
{
    if (est.insufficient) return std::numeric_limits<double>::quiet_NaN();
    switch (est.form) {
    case PosteriorForm::Samples: {
        if (est.samples.empty()) return std::numeric_limits<double>::quiet_NaN();
        const auto below = std::count_if(est.samples.begin(), est.samples.end(), [](double r) { return r < 1.0; });
        return static_cast<double>(below) / static_cast<double>(est.samples.size());
    }
    case PosteriorForm::Grid: {
        double p = 0.0;
        for (std::size_t i = 0; i < est.grid.size() && est.grid[i] < 1.0; ++i) p += est.mass[i];
        return p;
    }
    case PosteriorForm::Gamma:
        return boost::math::cdf(boost::math::gamma_distribution<double>(est.shape, 1.0 / est.rate), 1.0);
    }
    return std::numeric_limits<double>::quiet_NaN();
}

void summarise(RtEstimate& est)
{
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    if (est.insufficient) {
        est.median = est.lower = est.upper = est.prob_below_one = nan;
        return;
    }
    switch (est.form) {
    case PosteriorForm::Samples:
        est.median = quantile(est.samples, 0.5);
        est.lower = quantile(est.samples, 0.025);
        est.upper = quantile(est.samples, 0.975);
        break;
    case PosteriorForm::Grid: {
        auto grid_quantile = [&](double q) {
            double cum = 0.0;
            for (std::size_t i = 0; i < est.grid.size(); ++i) {
                cum += est.mass[i];
                if (cum >= q) return est.grid[i];
            }
            return est.grid.back();
        };
        est.median = grid_quantile(0.5);
        est.lower = grid_quantile(0.025);
        est.upper = grid_quantile(0.975);
        break;
    }
    case PosteriorForm::Gamma: {
        const boost::math::gamma_distribution<double> g(est.shape, 1.0 / est.rate);
        est.median = boost::math::quantile(g, 0.5);
        est.lower = boost::math::quantile(g, 0.025);
        est.upper = boost::math::quantile(g, 0.975);
        break;
    }
    }
    est.prob_below_one = prob_below_one(est);
}

// ---------------------------------------------------------------------------

SamplerResult independence_sampler(const std::function<std::vector<double>(Rng&)>& draw_prior,
                                   const std::function<double(const std::vector<double>&)>& log_likelihood,
                                   int n_steps, int burn_in, Rng& rng)
{
    if (n_steps < 1 || burn_in < 0 || burn_in >= n_steps) {
        throw ArgumentError("independence sampler: need 0 <= burn_in < n_steps");
    }
    SamplerResult out;
    std::vector<double> current = draw_prior(rng);
    double current_ll = log_likelihood(current);
    int accepted = 0;
    for (int step = 0; step < n_steps; ++step) {
        auto candidate = draw_prior(rng);
        const double ll = log_likelihood(candidate);
        const double u = rng.uniform(0.0, 1.0);
        // A start with zero likelihood is left for the first candidate that has any.
        const bool accept = std::isfinite(current_ll) ? std::log(u) < ll - current_ll : std::isfinite(ll);
        if (accept) {
            current = std::move(candidate);
            current_ll = ll;
            ++accepted;
        }
        if (step >= burn_in) {
            out.draws.push_back(current);
            out.log_likelihood.push_back(current_ll);
        }
    }
    out.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(n_steps);
    return out;
}

// ---------------------------------------------------------------------------

double observation_variance(double y)
{
    return std::max(1.0, y * y / 4.0);
}

std::vector<PeriodPrior> default_priors(int n_periods)
{
    std::vector<PeriodPrior> out;
    for (int k = 0; k < n_periods; ++k) {
        PeriodPrior p;
        if (k == 0) {
            p.alpha_a = 2.0;
            p.beta_gamma = true;
        }
        else if (k < 3) {
            p.alpha_a = 3.0;
        }
        else {
            p.alpha_a = 4.0;
        }
        p.alpha_b = 2.0;
        out.push_back(p);
    }
    return out;
}

namespace {

struct CloudMember {
    cm::SeirState state;
    std::vector<double> pending;
};

}  // namespace

Mcmc1Result mcmc_model1(const IncidenceSeries& data, const Mcmc1Config& cfg)
{
    if (cfg.period_days < 1 || cfg.n_periods < 1) throw ArgumentError("mcmc_model1: invalid period partition");
    if (cfg.lead_days < 0 || cfg.init_max < 0) throw ArgumentError("mcmc_model1: lead_days and init_max must be >= 0");
    const auto priors = cfg.priors.empty() ? default_priors(cfg.n_periods) : cfg.priors;
    if (static_cast<int>(priors.size()) < cfg.n_periods) throw ArgumentError("mcmc_model1: one prior per period is required");

    const auto y = data.cases_as_double();
    const auto first = std::find_if(y.begin(), y.end(), [](double v) { return v > 0.0; });
    if (first == y.end()) throw ArgumentError("mcmc_model1: no recorded cases");
    const long origin = static_cast<long>(first - y.begin()) - cfg.lead_days;
    const long T = static_cast<long>(y.size());
    int n_periods = 0;
    while (n_periods < cfg.n_periods && origin + static_cast<long>(n_periods + 1) * cfg.period_days <= T) ++n_periods;
    if (n_periods == 0) throw ArgumentError("mcmc_model1: data shorter than one period");

    cm::Model1Params base;
    base.mu = cfg.mu;
    base.Z = cfg.Z;
    base.D = cfg.D;
    base.tau_d = cfg.tau_d;
    base.delay_shape = cfg.delay_shape;

    // The first period's initial-state prior, enumerated as a cloud.
    std::vector<CloudMember> cloud;
    if (cfg.initial_state) {
        cloud.push_back({*cfg.initial_state, {}});
    }
    else {
        for (int e = 0; e <= cfg.init_max; ++e) {
            for (int u = 0; u <= cfg.init_max; ++u) {
                cm::SeirState s;
                s.N = cfg.population;
                s.E = e;
                s.Iu = u;
                s.S = cfg.population;
                cloud.push_back({s, {}});
            }
        }
    }

    Mcmc1Result out;
    Rng rng(cfg.seed);
    for (int k = 0; k < n_periods; ++k) {
        const PeriodPrior& prior = priors[static_cast<std::size_t>(k)];
        const long p0 = origin + static_cast<long>(k) * cfg.period_days;
        const auto draw = [&](Rng& r) {
            const double a = prior.fixed_alpha ? *prior.fixed_alpha : r.beta(prior.alpha_a, prior.alpha_b);
            const double b = prior.beta_gamma ? r.gamma(prior.beta_shape, prior.beta_scale) : r.exponential(prior.beta_rate);
            const double c = static_cast<double>(r.uniform_int(0, static_cast<int>(cloud.size()) - 1));
            return std::vector<double>{a, b, c};
        };
        const auto simulate = [&](const std::vector<double>& theta) {
            cm::Model1Params p = base;
            p.alpha = theta[0];
            p.beta = theta[1];
            const auto& member = cloud[static_cast<std::size_t>(theta[2])];
            return cm::simulate_model1_mean(p, member.state, cfg.period_days, member.pending);
        };
        const auto loglik = [&](const std::vector<double>& theta) {
            if (!(theta[0] > 0.0 && theta[0] <= 1.0) || !(theta[1] > 0.0)) {
                return -std::numeric_limits<double>::infinity();
            }
            if (cfg.obs_variance && std::isinf(*cfg.obs_variance)) return 0.0;
            const auto run = simulate(theta);
            double ll = 0.0;
            for (int t = 0; t < cfg.period_days; ++t) {
                const long day = p0 + t;
                if (day < 0) continue;
                const double obs = y[static_cast<std::size_t>(day)];
                const double var = cfg.obs_variance ? *cfg.obs_variance : observation_variance(obs);
                const double r = run.recorded[static_cast<std::size_t>(t)] - obs;
                ll -= 0.5 * r * r / var;
            }
            return ll;
        };

        const auto chain = independence_sampler(draw, loglik, cfg.n_steps, cfg.burn_in, rng);
        Mcmc1Period period;
        period.acceptance_rate = chain.acceptance_rate;
        period.rt.start = data.start_date() + static_cast<int>(p0);
        period.rt.end = data.start_date() + static_cast<int>(p0 + cfg.period_days - 1);
        period.rt.form = PosteriorForm::Samples;
        std::vector<CloudMember> next;
        next.reserve(chain.draws.size());
        const std::vector<double>* last = nullptr;
        for (const auto& theta : chain.draws) {
            period.alpha.push_back(theta[0]);
            period.beta.push_back(theta[1]);
            period.rt.samples.push_back(effective_r(theta[0], theta[1], cfg.mu, cfg.D));
            if (k + 1 < n_periods) {
                if (last && *last == theta) {
                    next.push_back(next.back());
                }
                else {
                    auto run = simulate(theta);
                    next.push_back({run.states.back(), std::move(run.pending)});
                }
                last = &theta;
            }
        }
        summarise(period.rt);
        if (chain.acceptance_rate < 0.01) {
            out.warnings.push_back("period " + std::to_string(k + 1) + ": acceptance rate " +
                                   std::to_string(chain.acceptance_rate) + " is below 1%");
        }
        out.periods.push_back(std::move(period));
        if (k + 1 < n_periods) cloud = std::move(next);
    }
    return out;
}

// ---------------------------------------------------------------------------

bool eakf_update(std::vector<std::vector<double>>& members, std::span<const double> predicted, double observation,
                 double obs_variance)
{
    const std::size_t n = members.size();
    if (predicted.size() != n || n < 2) throw ArgumentError("eakf_update: need one prediction per member (>= 2)");
    if (!(obs_variance > 0.0)) throw ArgumentError("eakf_update: observation variance must be positive");
    if (std::isinf(obs_variance)) return true;

    const double prior_mean = mean(predicted);
    const double prior_var = variance(predicted);
    if (!(prior_var > 1e-12)) return false;

    const double post_var = prior_var * obs_variance / (prior_var + obs_variance);
    const double post_mean = post_var * (prior_mean / prior_var + observation / obs_variance);
    const double shrink = std::sqrt(obs_variance / (obs_variance + prior_var));
    std::vector<double> dy(n);
    for (std::size_t i = 0; i < n; ++i) dy[i] = post_mean + shrink * (predicted[i] - prior_mean) - predicted[i];

    const std::size_t dim = members.front().size();
    for (std::size_t j = 0; j < dim; ++j) {
        double mx = 0.0;
        for (std::size_t i = 0; i < n; ++i) mx += members[i][j];
        mx /= static_cast<double>(n);
        double cov = 0.0;
        for (std::size_t i = 0; i < n; ++i) cov += (members[i][j] - mx) * (predicted[i] - prior_mean);
        cov /= static_cast<double>(n - 1);
        const double gain = cov / prior_var;
        for (std::size_t i = 0; i < n; ++i) members[i][j] += gain * dy[i];
    }
    return true;
}

namespace {

constexpr std::size_t kParams = 6;  // mu, theta, Z, D, beta, alpha

struct Member {
    std::vector<cm::SeirState> districts;
    std::array<double, kParams> params{};
    std::vector<std::vector<double>> queue;  ///< [district][day offset from analysis start]
    std::vector<Rng> rngs;
};

cm::Model2Params member_params(const Member& m, const EakfConfig& cfg)
{
    cm::Model2Params p;
    p.disease.mu = m.params[0];
    p.theta = m.params[1];
    p.disease.Z = m.params[2];
    p.disease.D = m.params[3];
    p.disease.beta = m.params[4];
    p.disease.alpha = m.params[5];
    p.disease.tau_d = cfg.tau_d;
    p.disease.delay_shape = cfg.delay_shape;
    return p;
}

// Parameters may leave their prior ranges but are kept physically valid.
void constrain(Member& m)
{
    auto& q = m.params;
    q[0] = std::clamp(q[0], 1e-6, 1.0);
    q[1] = std::max(q[1], 1.0);
    q[2] = std::max(q[2], 0.1);
    q[3] = std::max(q[3], 0.1);
    q[4] = std::max(q[4], 1e-9);
    q[5] = std::clamp(q[5], 1e-6, 1.0);
    for (auto& d : m.districts) {
        d.S = std::clamp(d.S, 0.0, d.N);
        d.E = std::clamp(d.E, 0.0, d.N);
        d.Ir = std::clamp(d.Ir, 0.0, d.N);
        d.Iu = std::clamp(d.Iu, 0.0, d.N);
    }
}

}  // namespace

EakfResult eakf_model2(std::span<const IncidenceSeries> districts, const MobilityMatrix& mobility,
                       std::span<const double> populations, const EakfConfig& cfg)
{
    const std::size_t nd = districts.size();
    if (nd == 0 || mobility.size() != nd || populations.size() != nd) {
        throw ArgumentError("eakf_model2: districts, mobility and populations must agree in size");
    }
    if (cfg.n_members < 100) throw ArgumentError("eakf_model2: at least 100 ensemble members are required");
    if (!(cfg.inflation >= 1.0)) throw ArgumentError("eakf_model2: inflation must be >= 1");
    const std::size_t T = districts.front().size();
    for (const auto& d : districts) {
        if (d.size() != T || d.start_date() != districts.front().start_date()) {
            throw ArgumentError("eakf_model2: district series must share start date and length");
        }
    }
    std::vector<std::vector<double>> y(nd);
    for (std::size_t i = 0; i < nd; ++i) y[i] = districts[i].cases_as_double();
    long first = -1;
    for (std::size_t t = 0; t < T && first < 0; ++t) {
        for (std::size_t i = 0; i < nd; ++i) {
            if (y[i][t] > 0.0) first = static_cast<long>(t);
        }
    }
    if (first < 0) throw ArgumentError("eakf_model2: no recorded cases");
    const long origin = first - cfg.lead_days;
    const auto n_days = static_cast<std::size_t>(static_cast<long>(T) - origin);
    const Date start = districts.front().start_date() + static_cast<int>(origin);
    std::optional<long> lockdown_day;
    if (cfg.lockdown) lockdown_day = *cfg.lockdown - start;

    Rng master(cfg.seed);
    const auto nm = static_cast<std::size_t>(cfg.n_members);
    std::vector<Member> members(nm);
    for (std::size_t m = 0; m < nm; ++m) {
        auto& mem = members[m];
        mem.params = {master.uniform(cfg.mu.lo, cfg.mu.hi),     master.uniform(cfg.theta.lo, cfg.theta.hi),
                      master.uniform(cfg.Z.lo, cfg.Z.hi),       master.uniform(cfg.D.lo, cfg.D.hi),
                      master.uniform(cfg.beta_pre.lo, cfg.beta_pre.hi), master.uniform(cfg.alpha.lo, cfg.alpha.hi)};
        for (std::size_t i = 0; i < nd; ++i) {
            cm::SeirState s;
            s.N = populations[i];
            s.E = master.uniform(0.0, cfg.seed_max);
            s.Iu = master.uniform(0.0, cfg.seed_max);
            s.S = s.N - s.E - s.Iu;
            mem.districts.push_back(s);
            mem.rngs.emplace_back(derive_seed(derive_seed(cfg.seed.value, m + 1), i));
        }
        mem.queue.assign(nd, std::vector<double>(n_days + 1, 0.0));
        constrain(mem);
    }

    EakfResult out;
    std::vector<int> collapsed(nd, 0);
    std::vector<Date> first_collapse(nd);
    std::vector<std::vector<double>> matrix(nm);
    std::vector<double> predicted(nm);
    const std::size_t state_dim = 4 * nd + kParams + nd;

    for (std::size_t day = 0; day < n_days; ++day) {
        if (lockdown_day && static_cast<long>(day) == *lockdown_day) {
            for (auto& mem : members) mem.params[4] = master.uniform(cfg.beta_post.lo, cfg.beta_post.hi);
        }
        // Forecast one day and queue recordings.
        for (auto& mem : members) {
            const auto p = member_params(mem, cfg);
            cm::MetaState st;
            st.names = mobility.names;
            st.districts = mem.districts;
            const auto r = cm::step_model2(st, p, mobility, mem.rngs);
            mem.districts = r.state.districts;
            for (std::size_t i = 0; i < nd; ++i) {
                const auto count = static_cast<long long>(r.new_reported[i]);
                for (long long c = 0; c < count; ++c) {
                    const auto when = day + static_cast<std::size_t>(cm::draw_delay(p.disease, mem.rngs[i]));
                    if (when < mem.queue[i].size()) mem.queue[i][when] += 1.0;
                }
            }
        }
        const long t = origin + static_cast<long>(day);
        if (t >= 0) {
            // Pack, inflate, update serially per district, unpack.
            for (std::size_t m = 0; m < nm; ++m) {
                auto& row = matrix[m];
                row.clear();
                row.reserve(state_dim);
                for (const auto& d : members[m].districts) row.insert(row.end(), {d.S, d.E, d.Ir, d.Iu});
                row.insert(row.end(), members[m].params.begin(), members[m].params.end());
                for (std::size_t i = 0; i < nd; ++i) row.push_back(members[m].queue[i][day]);
            }
            for (std::size_t j = 0; j < state_dim; ++j) {
                double mj = 0.0;
                for (const auto& row : matrix) mj += row[j];
                mj /= static_cast<double>(nm);
                for (auto& row : matrix) row[j] = mj + cfg.inflation * (row[j] - mj);
            }
            for (std::size_t i = 0; i < nd; ++i) {
                const std::size_t col = 4 * nd + kParams + i;
                for (std::size_t m = 0; m < nm; ++m) predicted[m] = matrix[m][col];
                const double obs = y[i][static_cast<std::size_t>(t)];
                if (!eakf_update(matrix, predicted, obs, observation_variance(obs))) {
                    if (collapsed[i]++ == 0) first_collapse[i] = start + static_cast<int>(day);
                }
            }
            for (std::size_t m = 0; m < nm; ++m) {
                auto& mem = members[m];
                const auto& row = matrix[m];
                for (std::size_t i = 0; i < nd; ++i) {
                    mem.districts[i].S = row[4 * i];
                    mem.districts[i].E = row[4 * i + 1];
                    mem.districts[i].Ir = row[4 * i + 2];
                    mem.districts[i].Iu = row[4 * i + 3];
                }
                for (std::size_t q = 0; q < kParams; ++q) mem.params[q] = row[4 * nd + q];
                constrain(mem);
            }
        }
        if ((day + 1) % 7 == 0) {
            RtEstimate est;
            est.start = start + static_cast<int>(day - 6);
            est.end = start + static_cast<int>(day);
            est.form = PosteriorForm::Samples;
            for (const auto& mem : members) {
                est.samples.push_back(effective_r(mem.params[5], mem.params[4], mem.params[0], mem.params[3]));
            }
            summarise(est);
            out.weekly.push_back(std::move(est));
        }
    }
    for (std::size_t i = 0; i < nd; ++i) {
        if (collapsed[i] == 0) continue;
        out.warnings.push_back(mobility.names[i] + ": predicted observation variance collapsed on " +
                               std::to_string(collapsed[i]) + " day(s) from " + first_collapse[i].iso() +
                               "; those updates were skipped");
    }
    return out;
}

// ---------------------------------------------------------------------------

std::vector<RtEstimate> bettencourt_rt(const IncidenceSeries& data, const BettencourtConfig& cfg)
{
    if (cfg.window < 1) throw ArgumentError("bettencourt_rt: window must be >= 1");
    if (!(cfg.r_max >= 6.0)) throw ArgumentError("bettencourt_rt: grid must reach at least R = 6");
    if (!(cfg.step > 0.0) || !(cfg.D > 0.0)) throw ArgumentError("bettencourt_rt: need step > 0 and D > 0");
    if (data.size() < 2) throw ArgumentError("bettencourt_rt: need at least two days");

    const auto k = data.cases_as_double();
    const auto n_grid = static_cast<std::size_t>(std::llround(cfg.r_max / cfg.step)) + 1;
    std::vector<double> grid(n_grid);
    for (std::size_t g = 0; g < n_grid; ++g) grid[g] = static_cast<double>(g) * cfg.step;

    // Daily log-likelihood rows; empty when the previous day had no cases.
    std::vector<std::vector<double>> ll(k.size());
    for (std::size_t t = 1; t < k.size(); ++t) {
        if (k[t - 1] <= 0.0) continue;
        auto& row = ll[t];
        row.resize(n_grid);
        for (std::size_t g = 0; g < n_grid; ++g) {
            const double lam = k[t - 1] * std::exp((grid[g] - 1.0) / cfg.D);
            row[g] = k[t] * std::log(lam) - lam - std::lgamma(k[t] + 1.0);
        }
    }

    std::vector<RtEstimate> out;
    const auto m = static_cast<std::size_t>(cfg.window);
    for (std::size_t t = 1; t < k.size(); ++t) {
        RtEstimate est;
        est.start = data.date_at(t);
        est.end = est.start;
        est.form = PosteriorForm::Grid;
        std::vector<double> total(n_grid, 0.0);
        bool any = false;
        for (std::size_t s = (t + 1 > m ? t + 1 - m : 1); s <= t; ++s) {
            if (ll[s].empty()) continue;
            any = true;
            for (std::size_t g = 0; g < n_grid; ++g) total[g] += ll[s][g];
        }
        if (!any) {
            est.insufficient = true;
        }
        else {
            const double top = *std::max_element(total.begin(), total.end());
            est.grid = grid;
            est.mass.resize(n_grid);
            double z = 0.0;
            for (std::size_t g = 0; g < n_grid; ++g) z += est.mass[g] = std::exp(total[g] - top);
            for (auto& v : est.mass) v /= z;
        }
        summarise(est);
        out.push_back(std::move(est));
    }
    return out;
}

// ---------------------------------------------------------------------------

std::vector<double> serial_interval_weights(double mean_days, double sd)
{
    if (!(mean_days > 0.0) || !(sd > 0.0)) throw ArgumentError("serial interval needs positive mean and sd");
    const boost::math::gamma_distribution<double> g(mean_days * mean_days / (sd * sd), sd * sd / mean_days);
    std::vector<double> w{0.0};
    double prev = 0.0;
    for (int s = 1; s < 100000; ++s) {
        const double c = boost::math::cdf(g, static_cast<double>(s));
        w.push_back(c - prev);
        prev = c;
        if (1.0 - c < 1e-10) break;
    }
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    for (auto& v : w) v /= total;
    return w;
}

std::vector<RtEstimate> cori_rt(const IncidenceSeries& data, const CoriConfig& cfg)
{
    if (cfg.window < 1) throw ArgumentError("cori_rt: window must be >= 1");
    if (!(cfg.a0 > 0.0) || !(cfg.b0 >= 0.0)) throw ArgumentError("cori_rt: need a0 > 0 and b0 >= 0");
    const std::size_t T = data.size();
    const auto W = static_cast<std::size_t>(cfg.window);
    if (T < W + 2) throw ArgumentError("cori_rt: series shorter than window + 2");
    const auto w = serial_interval_weights(cfg.si_mean, cfg.si_sd);
    const auto I = data.cases_as_double();

    std::vector<double> lambda(T, 0.0);
    for (std::size_t t = 1; t < T; ++t) {
        for (std::size_t s = 1; s <= t && s < w.size(); ++s) lambda[t] += w[s] * I[t - s];
    }

    std::vector<RtEstimate> out;
    for (std::size_t a = 1; a + W <= T; a += W) {
        RtEstimate est;
        est.start = data.date_at(a);
        est.end = data.date_at(a + W - 1);
        est.form = PosteriorForm::Gamma;
        double sum_i = 0.0;
        double sum_l = 0.0;
        for (std::size_t t = a; t < a + W; ++t) {
            sum_i += I[t];
            sum_l += lambda[t];
        }
        est.shape = cfg.a0 + sum_i;
        est.rate = cfg.b0 + sum_l;
        est.insufficient = !(sum_l > 0.0);
        summarise(est);
        out.push_back(std::move(est));
    }
    return out;
}

}  // namespace epitk::rt
