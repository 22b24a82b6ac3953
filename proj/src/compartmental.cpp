#include "epitk/compartmental.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/gamma.hpp>
#include <boost/numeric/odeint.hpp>
#include <ceres/ceres.h>

namespace epitk::compartmental {

void Model1Params::validate() const
{
    if (!(beta > 0 && mu > 0 && Z > 0 && D > 0 && alpha > 0 && tau_d > 0 && delay_shape > 0)) {
        throw ArgumentError("model parameters must all be positive");
    }
    if (alpha > 1.0 || mu > 1.0) throw ArgumentError("alpha and mu must not exceed 1");
}

namespace {

void validate_state(const SeirState& s, const std::string& where)
{
    if (!(s.N > 0.0)) throw ArgumentError("population must be positive" + where);
    for (double v : {s.S, s.E, s.Ir, s.Iu}) {
        if (!(v >= 0.0) || v > s.N) throw ArgumentError("compartments must lie in [0, N]" + where);
    }
}

struct Flux {
    double ds = 0, de = 0, dir = 0, diu = 0, reported = 0;
};

// Stochastic RK4 over one day for any number of linked districts. `flows`
// is row-major from -> to, or empty when there is no mobility. A null `rngs`
// replaces every draw with its mean.
std::vector<StepResult> meta_step(const std::vector<SeirState>& base, const std::vector<std::string>& names,
                                  const Model1Params& p, double theta, std::span<const double> flows, Rng* rngs)
{
    const std::size_t n = base.size();
    const bool mobile = !flows.empty();
    auto draw = [&](std::size_t i, double mean) {
        mean = std::max(mean, 0.0);
        if (rngs == nullptr) return mean;
        return static_cast<double>(rngs[i].poisson(mean));
    };
    auto label = [&](std::size_t i) { return i < names.size() ? names[i] : "district " + std::to_string(i + 1); };

    std::array<std::vector<Flux>, 4> k;
    std::vector<SeirState> stage = base;
    const std::array<double, 4> coeff{0.0, 0.5, 0.5, 1.0};
    for (int s = 0; s < 4; ++s) {
        if (s > 0) {
            for (std::size_t i = 0; i < n; ++i) {
                const auto& f = k[static_cast<std::size_t>(s - 1)][i];
                const double c = coeff[static_cast<std::size_t>(s)];
                stage[i].S = std::max(0.0, base[i].S + c * f.ds);
                stage[i].E = std::max(0.0, base[i].E + c * f.de);
                stage[i].Ir = std::max(0.0, base[i].Ir + c * f.dir);
                stage[i].Iu = std::max(0.0, base[i].Iu + c * f.diu);
            }
        }
        // Per-district travel fractions used by the mobility terms.
        std::vector<double> out_r(n, 0.0), out_u(n, 0.0);
        if (mobile) {
            for (std::size_t i = 0; i < n; ++i) {
                const double dr = stage[i].N - stage[i].Ir;
                const double du = stage[i].N - stage[i].Iu;
                if (!(dr > 0.0) || !(du > 0.0)) {
                    throw IntegrationError("non-positive mobility denominator in " + label(i));
                }
                out_r[i] = 1.0 / dr;
                out_u[i] = 1.0 / du;
            }
        }
        auto& ks = k[static_cast<std::size_t>(s)];
        ks.assign(n, Flux{});
        for (std::size_t i = 0; i < n; ++i) {
            const auto& x = stage[i];
            const double exp_r = draw(i, p.beta * x.S * x.Ir / x.N);
            const double exp_u = draw(i, p.mu * p.beta * x.S * x.Iu / x.N);
            const double inf_r = draw(i, p.alpha * x.E / p.Z);
            const double inf_u = draw(i, (1.0 - p.alpha) * x.E / p.Z);
            const double rec_r = draw(i, x.Ir / p.D);
            const double rec_u = draw(i, x.Iu / p.D);
            double s_in = 0, s_out = 0, e_in = 0, e_out = 0, u_in = 0, u_out = 0;
            if (mobile) {
                double in_s = 0, in_e = 0, in_eu = 0, out_total = 0;
                for (std::size_t j = 0; j < n; ++j) {
                    const double m_ji = flows[j * n + i];
                    in_s += m_ji * stage[j].S * out_r[j];
                    in_e += m_ji * stage[j].E * out_r[j];
                    in_eu += m_ji * stage[j].E * out_u[j];
                    out_total += flows[i * n + j];
                }
                s_in = draw(i, theta * in_s);
                s_out = draw(i, theta * out_total * x.S * out_r[i]);
                e_in = draw(i, theta * in_e);
                e_out = draw(i, theta * out_total * x.E * out_r[i]);
                u_in = draw(i, theta * in_eu);
                u_out = draw(i, theta * out_total * x.E * out_u[i]);
            }
            ks[i].ds = -exp_r - exp_u + s_in - s_out;
            ks[i].de = exp_r + exp_u - inf_r - inf_u + e_in - e_out;
            ks[i].dir = inf_r - rec_r;
            ks[i].diu = inf_u - rec_u + u_in - u_out;
            ks[i].reported = inf_r;
        }
    }

    std::vector<StepResult> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto combine = [&](double Flux::*m) {
            return (k[0][i].*m + 2.0 * k[1][i].*m + 2.0 * k[2][i].*m + k[3][i].*m) / 6.0;
        };
        SeirState next = base[i];
        // Travellers move at the start-of-day population while N itself is
        // moved once per day, so a compartment may exceed N by up to one day
        // of travel volume.
        double slack = 0.0;
        if (mobile) {
            double net = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                net += flows[j * n + i] - flows[i * n + j];
                slack += theta * (flows[j * n + i] + flows[i * n + j]);
            }
            next.N += theta * net;
            if (!(next.N > 0.0)) throw IntegrationError("population of " + label(i) + " became non-positive");
        }
        next.S = std::max(0.0, base[i].S + combine(&Flux::ds));
        next.E = std::max(0.0, base[i].E + combine(&Flux::de));
        next.Ir = std::max(0.0, base[i].Ir + combine(&Flux::dir));
        next.Iu = std::max(0.0, base[i].Iu + combine(&Flux::diu));
        const double bound = next.N * (1.0 + 1e-9) + slack;
        if (next.S > bound || next.E > bound || next.Ir > bound || next.Iu > bound) {
            throw IntegrationError("compartment exceeds the population in " + label(i));
        }
        out[i].state = next;
        // Individual cases get their own delay, so the stochastic count is made
        // whole; ties go to even to avoid drift.
        const double reported = std::max(0.0, combine(&Flux::reported));
        out[i].new_reported = rngs ? std::nearbyint(reported) : reported;
    }
    return out;
}

void add_recording(std::vector<double>& recorded, std::vector<double>& pending, std::size_t day, double amount)
{
    if (day < recorded.size()) {
        recorded[day] += amount;
        return;
    }
    const std::size_t k = day - recorded.size();
    if (pending.size() <= k) pending.resize(k + 1, 0.0);
    pending[k] += amount;
}

void apply_carry(std::vector<double>& recorded, std::vector<double>& pending, std::span<const double> carry)
{
    for (std::size_t k = 0; k < carry.size(); ++k) {
        if (carry[k] != 0.0) add_recording(recorded, pending, k, carry[k]);
    }
}

void record_stochastic(const Model1Params& p, Rng& rng, std::size_t day, double reported,
                       std::vector<double>& recorded, std::vector<double>& pending)
{
    const auto count = static_cast<long long>(reported);
    for (long long c = 0; c < count; ++c) {
        add_recording(recorded, pending, day + static_cast<std::size_t>(draw_delay(p, rng)), 1.0);
    }
}

void record_mean(std::span<const double> pmf, std::size_t day, double reported, std::vector<double>& recorded,
                 std::vector<double>& pending)
{
    if (reported == 0.0) return;
    for (std::size_t k = 0; k < pmf.size(); ++k) {
        if (pmf[k] != 0.0) add_recording(recorded, pending, day + k, reported * pmf[k]);
    }
}

}  // namespace

StepResult step_model1(const SeirState& state, const Model1Params& p, Rng& rng)
{
    p.validate();
    validate_state(state, "");
    return meta_step({state}, {}, p, 0.0, {}, &rng).front();
}

StepResult step_model1_mean(const SeirState& state, const Model1Params& p)
{
    p.validate();
    validate_state(state, "");
    return meta_step({state}, {}, p, 0.0, {}, nullptr).front();
}

std::vector<double> delay_pmf(const Model1Params& p)
{
    p.validate();
    const boost::math::gamma_distribution<double> g(p.delay_shape, p.tau_d / p.delay_shape);
    std::vector<double> pmf{0.0};
    double prev = 0.0;
    for (int k = 1; k < 10000; ++k) {
        const double c = boost::math::cdf(g, static_cast<double>(k));
        pmf.push_back(c - prev);
        prev = c;
        if (1.0 - c < 1e-12) break;
    }
    return pmf;
}

int draw_delay(const Model1Params& p, Rng& rng)
{
    return static_cast<int>(std::ceil(rng.gamma(p.delay_shape, p.tau_d / p.delay_shape)));
}

Model1Run simulate_model1(const Model1Params& p, const SeirState& init, int horizon, Rng& rng,
                          std::span<const double> carry)
{
    if (horizon < 1) throw ArgumentError("horizon must be at least 1 day");
    p.validate();
    validate_state(init, "");
    const auto H = static_cast<std::size_t>(horizon);
    Model1Run run;
    run.states.reserve(H + 1);
    run.states.push_back(init);
    run.new_reported.assign(H, 0.0);
    run.recorded.assign(H, 0.0);
    apply_carry(run.recorded, run.pending, carry);
    for (std::size_t t = 0; t < H; ++t) {
        const auto r = meta_step({run.states.back()}, {}, p, 0.0, {}, &rng).front();
        run.states.push_back(r.state);
        run.new_reported[t] = r.new_reported;
        run.total_reported += r.new_reported;
        record_stochastic(p, rng, t, r.new_reported, run.recorded, run.pending);
    }
    return run;
}

Model1Run simulate_model1(const Model1Params& p, const SeirState& init, int horizon, RngSeed seed,
                          std::span<const double> carry)
{
    Rng rng(seed);
    return simulate_model1(p, init, horizon, rng, carry);
}

Model1Run simulate_model1_mean(const Model1Params& p, const SeirState& init, int horizon,
                               std::span<const double> carry)
{
    if (horizon < 1) throw ArgumentError("horizon must be at least 1 day");
    p.validate();
    validate_state(init, "");
    const auto pmf = delay_pmf(p);
    const auto H = static_cast<std::size_t>(horizon);
    Model1Run run;
    run.states.reserve(H + 1);
    run.states.push_back(init);
    run.new_reported.assign(H, 0.0);
    run.recorded.assign(H, 0.0);
    apply_carry(run.recorded, run.pending, carry);
    for (std::size_t t = 0; t < H; ++t) {
        const auto r = meta_step({run.states.back()}, {}, p, 0.0, {}, nullptr).front();
        run.states.push_back(r.state);
        run.new_reported[t] = r.new_reported;
        run.total_reported += r.new_reported;
        record_mean(pmf, t, r.new_reported, run.recorded, run.pending);
    }
    return run;
}

// ---------------------------------------------------------------------------

namespace {

// A stepped state may sit slightly above N (see meta_step); only starting
// states are held to the strict bound.
void validate_meta(const MetaState& s, const MobilityMatrix& m, const Model2Params& p, bool strict)
{
    p.disease.validate();
    if (!(p.theta >= 1.0)) throw ArgumentError("mobility multiplier theta must be >= 1");
    if (s.districts.empty()) throw ArgumentError("no districts");
    if (m.size() != s.districts.size()) throw ArgumentError("mobility matrix size does not match the district count");
    if (m.flows.size() != m.size() * m.size()) throw ArgumentError("mobility matrix is not square");
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (m.at(i, i) != 0.0) throw ArgumentError("mobility diagonal must be zero");
        for (std::size_t j = 0; j < m.size(); ++j) {
            if (!(m.at(i, j) >= 0.0)) throw ArgumentError("mobility entries must be non-negative");
        }
    }
    for (std::size_t i = 0; i < s.districts.size(); ++i) {
        const std::string name = i < s.names.size() ? s.names[i] : std::to_string(i + 1);
        const auto& d = s.districts[i];
        if (strict) validate_state(d, " (district " + name + ")");
        else if (!(d.N > 0.0) || !(d.S >= 0.0 && d.E >= 0.0 && d.Ir >= 0.0 && d.Iu >= 0.0)) {
            throw ArgumentError("invalid state in district " + name);
        }
    }
}

MetaStepResult finish_meta(const MetaState& state, std::vector<StepResult> steps)
{
    MetaStepResult out;
    out.state.names = state.names;
    for (auto& s : steps) {
        out.state.districts.push_back(s.state);
        out.new_reported.push_back(s.new_reported);
    }
    return out;
}

}  // namespace

MetaStepResult step_model2(const MetaState& state, const Model2Params& p, const MobilityMatrix& mobility,
                           std::span<Rng> rngs)
{
    validate_meta(state, mobility, p, false);
    if (rngs.size() != state.districts.size()) throw ArgumentError("need one random stream per district");
    auto steps = meta_step(state.districts, state.names, p.disease, p.theta, mobility.flows, rngs.data());
    return finish_meta(state, std::move(steps));
}

MetaStepResult step_model2_mean(const MetaState& state, const Model2Params& p, const MobilityMatrix& mobility)
{
    validate_meta(state, mobility, p, false);
    auto steps = meta_step(state.districts, state.names, p.disease, p.theta, mobility.flows, nullptr);
    return finish_meta(state, std::move(steps));
}

namespace {

Model2Run run_model2(const Model2Params& p, const MobilityMatrix& mobility, const MetaState& init, int horizon,
                     std::vector<Rng>* rngs)
{
    if (horizon < 1) throw ArgumentError("horizon must be at least 1 day");
    validate_meta(init, mobility, p, true);
    const std::size_t n = init.districts.size();
    const auto H = static_cast<std::size_t>(horizon);
    const auto pmf = delay_pmf(p.disease);
    Model2Run run;
    run.states.push_back(init);
    run.new_reported.assign(n, std::vector<double>(H, 0.0));
    run.recorded.assign(n, std::vector<double>(H, 0.0));
    std::vector<std::vector<double>> pending(n);
    for (std::size_t t = 0; t < H; ++t) {
        const auto& cur = run.states.back();
        auto r = finish_meta(cur, meta_step(cur.districts, cur.names, p.disease, p.theta, mobility.flows,
                                            rngs ? rngs->data() : nullptr));
        for (std::size_t i = 0; i < n; ++i) {
            run.new_reported[i][t] = r.new_reported[i];
            if (rngs) record_stochastic(p.disease, (*rngs)[i], t, r.new_reported[i], run.recorded[i], pending[i]);
            else record_mean(pmf, t, r.new_reported[i], run.recorded[i], pending[i]);
        }
        run.states.push_back(std::move(r.state));
    }
    return run;
}

}  // namespace

Model2Run simulate_model2(const Model2Params& p, const MobilityMatrix& mobility, const MetaState& init, int horizon,
                          RngSeed seed)
{
    std::vector<Rng> rngs;
    for (std::size_t i = 0; i < init.districts.size(); ++i) rngs.emplace_back(derive_seed(seed.value, i));
    return run_model2(p, mobility, init, horizon, &rngs);
}

Model2Run simulate_model2_mean(const Model2Params& p, const MobilityMatrix& mobility, const MetaState& init,
                               int horizon)
{
    return run_model2(p, mobility, init, horizon, nullptr);
}

// ---------------------------------------------------------------------------

void Model3Params::validate() const
{
    for (double v : {zeta, beta, lambda[0], lambda[1], lambda[2], kappa}) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw ArgumentError("model-3 rates must be finite and non-negative");
    }
    if (!(gamma_inv > 0.0) || !(delta_inv > 0.0)) throw ArgumentError("latent and quarantine times must be positive");
}

double recovery_rate(double t, const std::array<double, 3>& lambda)
{
    return lambda[0] / (1.0 + std::exp(-lambda[1] * (t - lambda[2])));
}

std::vector<SeirqpdState> integrate_model3(const Model3Params& p, const SeirqpdState& init, int horizon)
{
    namespace odeint = boost::numeric::odeint;
    p.validate();
    if (horizon < 0) throw ArgumentError("horizon must be non-negative");
    const double N = init.total();
    for (double v : {init.S, init.P, init.E, init.I, init.Q, init.R, init.D}) {
        if (!(v >= 0.0)) throw ArgumentError("model-3 compartments must be non-negative");
    }
    if (!(N > 0.0)) throw ArgumentError("model-3 population must be positive");

    using State = std::array<double, 7>;
    const double gamma = 1.0 / p.gamma_inv;
    const double delta = 1.0 / p.delta_inv;
    auto rhs = [&](const State& x, State& dx, double t) {
        const double infection = p.beta * x[0] * x[3] / N;
        const double lam = recovery_rate(t, p.lambda);
        dx[0] = -infection - p.zeta * x[0];
        dx[1] = p.zeta * x[0];
        dx[2] = infection - gamma * x[2];
        dx[3] = gamma * x[2] - delta * x[3];
        dx[4] = delta * x[3] - lam * x[4] - p.kappa * x[4];
        dx[5] = lam * x[4];
        dx[6] = p.kappa * x[4];
    };

    State x{init.S, init.P, init.E, init.I, init.Q, init.R, init.D};
    std::vector<double> times(static_cast<std::size_t>(horizon) + 1);
    std::iota(times.begin(), times.end(), 0.0);
    std::vector<SeirqpdState> out;
    out.reserve(times.size());
    auto observe = [&](const State& s, double) { out.push_back({s[0], s[1], s[2], s[3], s[4], s[5], s[6]}); };
    if (horizon == 0) {
        observe(x, 0.0);
        return out;
    }
    try {
        auto stepper = odeint::make_dense_output(1e-11, 1e-11, odeint::runge_kutta_dopri5<State>());
        odeint::integrate_times(stepper, rhs, x, times.begin(), times.end(), 0.01, observe,
                                odeint::max_step_checker(100000));
    }
    catch (const odeint::odeint_error& e) {
        throw IntegrationError(std::string("model-3 integration failed: ") + e.what());
    }
    for (const auto& s : out) {
        if (!std::isfinite(s.total())) throw IntegrationError("model-3 integration produced non-finite values");
    }
    return out;
}

Model3Observations model3_observations(const IncidenceSeries& series)
{
    if (!series.recovered() || !series.deaths()) {
        throw ArgumentError("model-3 fitting needs recovered and deaths columns");
    }
    Model3Observations obs;
    double cases = 0, rec = 0, dead = 0;
    for (std::size_t t = 0; t < series.size(); ++t) {
        cases += static_cast<double>(series.cases()[t]);
        rec += static_cast<double>((*series.recovered())[t]);
        dead += static_cast<double>((*series.deaths())[t]);
        obs.active.push_back(cases - rec - dead);
        obs.recovered.push_back(rec);
        obs.deaths.push_back(dead);
    }
    return obs;
}

namespace {

constexpr int kModel3Params = 9;

struct Model3Residual {
    const Model3Observations* obs;
    double gamma_inv;
    double population;

    [[nodiscard]] std::pair<Model3Params, SeirqpdState> unpack(const double* x) const
    {
        // Central differences may probe just outside the box.
        auto nn = [](double v) { return std::max(v, 0.0); };
        Model3Params p;
        p.zeta = nn(x[0]);
        p.beta = nn(x[1]);
        p.gamma_inv = gamma_inv;
        p.delta_inv = std::max(x[2], 1e-6);
        p.lambda = {nn(x[3]), nn(x[4]), nn(x[5])};
        p.kappa = nn(x[6]);
        SeirqpdState s;
        s.E = nn(x[7]);
        s.I = nn(x[8]);
        s.Q = obs->active.front();
        s.R = obs->recovered.front();
        s.D = obs->deaths.front();
        s.S = population - s.E - s.I - s.Q - s.R - s.D;
        return {p, s};
    }

    bool operator()(double const* const* params, double* residuals) const
    {
        const auto [p, init] = unpack(params[0]);
        const std::size_t T = obs->active.size();
        std::vector<SeirqpdState> traj;
        try {
            traj = integrate_model3(p, init, static_cast<int>(T) - 1);
        }
        catch (const Error&) {
            return false;
        }
        for (std::size_t t = 0; t < T; ++t) {
            residuals[3 * t] = traj[t].Q - obs->active[t];
            residuals[3 * t + 1] = traj[t].R - obs->recovered[t];
            residuals[3 * t + 2] = traj[t].D - obs->deaths[t];
        }
        return true;
    }
};

}  // namespace

Model3Fit fit_model3(const Model3Observations& obs, double gamma_inv, const Model3FitOptions& opts)
{
    const std::size_t T = obs.active.size();
    if (T < 10) throw ArgumentError("model-3 fit needs at least 10 days of data");
    if (obs.recovered.size() != T || obs.deaths.size() != T) throw ArgumentError("observation series differ in length");
    if (!(gamma_inv > 0.0)) throw ArgumentError("gamma_inv must be positive");
    if (opts.n_starts < 1) throw ArgumentError("need at least one start");
    for (double v : obs.active) {
        if (v < 0.0) throw ArgumentError("active case series must be non-negative");
    }

    const auto& b = opts.bounds;
    const std::array<std::array<double, 2>, kModel3Params> bounds{b.zeta, b.beta, b.delta_inv, b.lambda1, b.lambda2,
                                                                   b.lambda3, b.kappa, b.E0, b.I0};
    Model3Residual functor{&obs, gamma_inv, opts.population};

    // Latin hypercube over the box.
    Rng rng(opts.seed);
    const auto n = static_cast<std::size_t>(opts.n_starts);
    std::vector<std::array<double, kModel3Params>> starts(n);
    for (std::size_t d = 0; d < kModel3Params; ++d) {
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng.engine());
        for (std::size_t s = 0; s < n; ++s) {
            const double u = (static_cast<double>(perm[s]) + rng.uniform(0.0, 1.0)) / static_cast<double>(n);
            starts[s][d] = bounds[d][0] + u * (bounds[d][1] - bounds[d][0]);
        }
    }

    Model3Fit best;
    best.cost = std::numeric_limits<double>::infinity();
    std::array<double, kModel3Params> best_x{};
    for (std::size_t s = 0; s < n; ++s) {
        auto x = starts[s];
        ceres::Problem problem;
        auto* cost = new ceres::DynamicNumericDiffCostFunction<Model3Residual, ceres::CENTRAL>(
            new Model3Residual(functor), ceres::TAKE_OWNERSHIP);
        cost->AddParameterBlock(kModel3Params);
        cost->SetNumResiduals(static_cast<int>(3 * T));
        problem.AddResidualBlock(cost, nullptr, x.data());
        for (int d = 0; d < kModel3Params; ++d) {
            problem.SetParameterLowerBound(x.data(), d, bounds[static_cast<std::size_t>(d)][0]);
            problem.SetParameterUpperBound(x.data(), d, bounds[static_cast<std::size_t>(d)][1]);
        }
        ceres::Solver::Options options;
        options.linear_solver_type = ceres::DENSE_QR;
        options.max_num_iterations = opts.max_iterations;
        options.function_tolerance = 1e-15;
        options.gradient_tolerance = 1e-15;
        options.parameter_tolerance = 1e-12;
        options.logging_type = ceres::SILENT;
        ceres::Solver::Summary summary;
        ceres::Solve(options, &problem, &summary);
        const double c = summary.IsSolutionUsable() ? summary.final_cost : std::numeric_limits<double>::infinity();
        best.start_costs.push_back(c);
        if (c < best.cost) {
            best.cost = c;
            best.best_start = static_cast<int>(s);
            best_x = x;
        }
    }
    if (!std::isfinite(best.cost)) {
        throw EstimationError("model-3 fit failed from every start", std::vector<double>(best_x.begin(), best_x.end()),
                              best.cost);
    }

    std::tie(best.params, best.init) = functor.unpack(best_x.data());
    best.trajectory = integrate_model3(best.params, best.init, static_cast<int>(T) - 1);
    std::vector<double> q, r, d;
    for (const auto& s : best.trajectory) {
        q.push_back(s.Q);
        r.push_back(s.R);
        d.push_back(s.D);
    }
    auto re = [](const std::vector<double>& pred, const std::vector<double>& o) {
        try {
            return relative_error(pred, o);
        }
        catch (const DomainError&) {
            return std::numeric_limits<double>::quiet_NaN();
        }
    };
    best.re_active = re(q, obs.active);
    best.re_recovered = re(r, obs.recovered);
    best.re_deaths = re(d, obs.deaths);
    return best;
}

std::vector<Model3Fit> sweep_model3(const Model3Observations& obs, std::span<const double> gamma_invs,
                                    const Model3FitOptions& opts)
{
    std::vector<Model3Fit> out;
    for (double g : gamma_invs) out.push_back(fit_model3(obs, g, opts));
    return out;
}

// ---------------------------------------------------------------------------

SiState step_model4(const SiState& state, double beta, double D, double N, double dt, int substeps)
{
    if (!(state.S >= 0.0) || !(state.I >= 0.0)) throw ArgumentError("S and I must be non-negative");
    if (!(N > 0.0) || !(D > 0.0) || !(beta >= 0.0)) throw ArgumentError("need N > 0, D > 0, beta >= 0");
    if (!(dt > 0.0) || substeps < 1) throw ArgumentError("need dt > 0 and at least one substep");
    const double h = dt / substeps;
    auto f = [&](double S, double I) {
        const double inf = beta * S * I / N;
        return std::pair{-inf, inf - I / D};
    };
    double S = state.S;
    double I = state.I;
    for (int k = 0; k < substeps; ++k) {
        const auto [s1, i1] = f(S, I);
        const auto [s2, i2] = f(S + 0.5 * h * s1, I + 0.5 * h * i1);
        const auto [s3, i3] = f(S + 0.5 * h * s2, I + 0.5 * h * i2);
        const auto [s4, i4] = f(S + h * s3, I + h * i3);
        S += h * (s1 + 2 * s2 + 2 * s3 + s4) / 6.0;
        I += h * (i1 + 2 * i2 + 2 * i3 + i4) / 6.0;
    }
    return {std::max(S, 0.0), std::max(I, 0.0)};
}

}  // namespace epitk::compartmental
