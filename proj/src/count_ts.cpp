#include "epitk/count_ts.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

#include <boost/math/distributions/chi_squared.hpp>
#include <ceres/ceres.h>

namespace epitk::count_ts {

InterventionKind parse_kind(std::string_view name)
{
    if (name == "ao" || name == "AO") return {InterventionType::AO, 0.8};
    if (name == "ts" || name == "TS") return {InterventionType::TS, 0.8};
    if (name == "ls" || name == "LS") return {InterventionType::LS, 0.8};
    throw ArgumentError("unknown intervention kind '" + std::string(name) + "' (expected ao|ts|ls)");
}

std::string to_string(const InterventionKind& kind)
{
    switch (kind.type) {
    case InterventionType::AO: return "AO";
    case InterventionType::TS: return "TS";
    case InterventionType::LS: return "LS";
    }
    return "?";
}

double intervention_covariate(const InterventionKind& kind, std::size_t time, std::size_t t)
{
    if (t < time) return 0.0;
    switch (kind.type) {
    case InterventionType::AO: return t == time ? 1.0 : 0.0;
    case InterventionType::TS: return std::pow(kind.decay, static_cast<double>(t - time));
    case InterventionType::LS: return 1.0;
    }
    return 0.0;
}

bool LogLinCountModel::is_stable() const
{
    return std::abs(a1) < 1.0 && std::abs(a1 + b1) < 1.0;
}

namespace {

void validate(const LogLinCountModel& m, std::size_t T)
{
    if (!m.is_stable()) throw ArgumentError("log-linear model outside the stability region |a1|<1, |a1+b1|<1");
    for (const auto& iv : m.interventions) {
        if (iv.time < 1 || iv.time > T) throw ArgumentError("intervention time outside [1, T]");
        if (iv.kind.type == InterventionType::TS && !(iv.kind.decay > 0.0 && iv.kind.decay < 1.0)) {
            throw ArgumentError("transient-shift decay must lie in (0, 1)");
        }
    }
}

double covariate_sum(const LogLinCountModel& m, std::size_t t)
{
    double w = 0.0;
    for (const auto& iv : m.interventions) w += iv.size * intervention_covariate(iv.kind, iv.time, t);
    return w;
}

// Recursion with first and second derivatives in (d, a1, b1, gamma..., [nu0]).
struct Derivatives {
    std::vector<double> nu;
    std::vector<Eigen::VectorXd> grad;
    std::vector<Eigen::MatrixXd> hess;
};

Derivatives differentiate(const LogLinCountModel& m, std::span<const double> x, bool with_nu0, bool second)
{
    const std::size_t T = x.size();
    const std::size_t K = m.interventions.size();
    const auto p = static_cast<Eigen::Index>(3 + K + (with_nu0 ? 1 : 0));
    const Eigen::Index i_nu0 = p - 1;

    Derivatives out;
    out.nu.resize(T);
    out.grad.assign(T, Eigen::VectorXd::Zero(p));
    if (second) out.hess.assign(T, Eigen::MatrixXd::Zero(p, p));

    double prev_nu = m.nu0;
    double prev_l = m.nu0;
    Eigen::VectorXd g_prev = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd gl_prev = Eigen::VectorXd::Zero(p);  // derivative of the lagged log-observation
    if (with_nu0) {
        g_prev(i_nu0) = 1.0;
        gl_prev(i_nu0) = 1.0;
    }
    Eigen::MatrixXd h_prev = Eigen::MatrixXd::Zero(p, p);

    for (std::size_t t = 1; t <= T; ++t) {
        const double nu = m.d + m.a1 * prev_nu + m.b1 * prev_l + covariate_sum(m, t);
        Eigen::VectorXd g = m.a1 * g_prev + m.b1 * gl_prev;
        g(0) += 1.0;
        g(1) += prev_nu;
        g(2) += prev_l;
        for (std::size_t k = 0; k < K; ++k) {
            const auto& iv = m.interventions[k];
            g(static_cast<Eigen::Index>(3 + k)) += intervention_covariate(iv.kind, iv.time, t);
        }
        if (second) {
            Eigen::MatrixXd h = m.a1 * h_prev;
            h.row(1) += g_prev.transpose();
            h.col(1) += g_prev;
            h.row(2) += gl_prev.transpose();
            h.col(2) += gl_prev;
            out.hess[t - 1] = h;
            h_prev = std::move(h);
        }
        out.nu[t - 1] = nu;
        out.grad[t - 1] = g;
        g_prev = std::move(g);
        gl_prev.setZero();
        prev_nu = nu;
        prev_l = std::log1p(x[t - 1]);
    }
    return out;
}

double loglik_from_nu(std::span<const double> nu, std::span<const double> x)
{
    double ll = 0.0;
    for (std::size_t t = 0; t < x.size(); ++t) ll += x[t] * nu[t] - std::exp(nu[t]) - std::lgamma(x[t] + 1.0);
    return ll;
}

// Unconstrained coordinates: (d, u, v, gamma..., [nu0]) with a1 = tanh u,
// a1 + b1 = tanh v. With frozen feedback: (d, gamma..., [nu0]).
struct Layout {
    bool freeze = false;
    bool with_nu0 = false;
    std::size_t K = 0;

    [[nodiscard]] int size() const { return static_cast<int>((freeze ? 1 : 3) + K + (with_nu0 ? 1 : 0)); }

    void to_model(const double* phi, LogLinCountModel& m) const
    {
        std::size_t i = 0;
        m.d = phi[i++];
        if (!freeze) {
            const double u = phi[i++];
            const double v = phi[i++];
            m.a1 = std::tanh(u);
            m.b1 = std::tanh(v) - std::tanh(u);
        }
        else {
            m.a1 = 0.0;
            m.b1 = 0.0;
        }
        for (std::size_t k = 0; k < K; ++k) m.interventions[k].size = phi[i++];
        if (with_nu0) m.nu0 = phi[i++];
    }

    [[nodiscard]] std::vector<double> from_model(const LogLinCountModel& m) const
    {
        std::vector<double> phi;
        phi.push_back(m.d);
        if (!freeze) {
            const double a = std::clamp(m.a1, -0.995, 0.995);
            const double s = std::clamp(m.a1 + m.b1, -0.995, 0.995);
            phi.push_back(std::atanh(a));
            phi.push_back(std::atanh(s));
        }
        for (const auto& iv : m.interventions) phi.push_back(iv.size);
        if (with_nu0) phi.push_back(m.nu0);
        return phi;
    }

    /// Chain rule from model-space gradient (d, a1, b1, gamma, [nu0]).
    void pull_back(const double* phi, const Eigen::VectorXd& g_model, double* g_phi) const
    {
        std::size_t i = 0;
        g_phi[i++] = g_model(0);
        if (!freeze) {
            const double du = 1.0 - std::tanh(phi[1]) * std::tanh(phi[1]);
            const double dv = 1.0 - std::tanh(phi[2]) * std::tanh(phi[2]);
            g_phi[i++] = (g_model(1) - g_model(2)) * du;
            g_phi[i++] = g_model(2) * dv;
        }
        for (std::size_t k = 0; k < K; ++k) g_phi[i++] = g_model(static_cast<Eigen::Index>(3 + k));
        if (with_nu0) g_phi[i++] = g_model(static_cast<Eigen::Index>(3 + K));
    }
};

class NegLogLik final : public ceres::FirstOrderFunction {
public:
    NegLogLik(std::span<const double> x, Layout layout, LogLinCountModel templ)
        : x_(x), layout_(layout), templ_(std::move(templ)), scale_(1.0 / static_cast<double>(x.size()))
    {
    }

    bool Evaluate(const double* phi, double* cost, double* gradient) const override
    {
        LogLinCountModel m = templ_;
        layout_.to_model(phi, m);
        const auto der = differentiate(m, x_, layout_.with_nu0, false);
        double ll = 0.0;
        Eigen::VectorXd g = Eigen::VectorXd::Zero(der.grad.empty() ? 0 : der.grad.front().size());
        for (std::size_t t = 0; t < x_.size(); ++t) {
            const double nu = der.nu[t];
            if (!std::isfinite(nu) || nu > 700.0) return false;
            const double lam = std::exp(nu);
            ll += x_[t] * nu - lam;
            if (gradient) g += (x_[t] - lam) * der.grad[t];
        }
        *cost = -ll * scale_;
        if (gradient) {
            layout_.pull_back(phi, g, gradient);
            for (int i = 0; i < layout_.size(); ++i) gradient[i] *= -scale_;
        }
        return true;
    }

    int NumParameters() const override { return layout_.size(); }

private:
    std::span<const double> x_;
    Layout layout_;
    LogLinCountModel templ_;
    double scale_;
};

struct Optimum {
    std::vector<double> phi;
    double cost = std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
};

Optimum minimise(std::span<const double> x, const Layout& layout, const LogLinCountModel& templ, std::vector<double> start)
{
    ceres::GradientProblem problem(new NegLogLik(x, layout, templ));
    ceres::GradientProblemSolver::Options options;
    options.line_search_direction_type = ceres::BFGS;
    options.max_num_iterations = 2000;
    options.function_tolerance = 1e-13;
    options.gradient_tolerance = 1e-11;
    options.parameter_tolerance = 1e-12;
    options.logging_type = ceres::SILENT;
    ceres::GradientProblemSolver::Summary summary;
    ceres::Solve(options, problem, start.data(), &summary);
    Optimum out;
    out.phi = std::move(start);
    out.cost = summary.final_cost;
    out.iterations = static_cast<int>(summary.iterations.size());
    out.converged = summary.termination_type == ceres::CONVERGENCE;
    if (summary.termination_type == ceres::NO_CONVERGENCE) {
        // Accept if the gradient is already negligible.
        std::vector<double> g(out.phi.size());
        double c = 0.0;
        NegLogLik f(x, layout, templ);
        if (f.Evaluate(out.phi.data(), &c, g.data())) {
            double gmax = 0.0;
            for (double v : g) gmax = std::max(gmax, std::abs(v));
            out.converged = gmax < 1e-6;
        }
    }
    if (!std::isfinite(out.cost)) out.converged = false;
    return out;
}

std::vector<std::string> parameter_names(const LogLinCountModel& m, bool with_nu0)
{
    std::vector<std::string> names{"d", "a1", "b1"};
    for (const auto& iv : m.interventions) names.push_back(to_string(iv.kind) + "@" + std::to_string(iv.time));
    if (with_nu0) names.emplace_back("nu0");
    return names;
}

Eigen::VectorXd model_score(const LogLinCountModel& m, std::span<const double> x, bool with_nu0)
{
    const auto der = differentiate(m, x, with_nu0, false);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(der.grad.front().size());
    for (std::size_t t = 0; t < x.size(); ++t) g += (x[t] - std::exp(der.nu[t])) * der.grad[t];
    return g;
}

Eigen::MatrixXd model_information(const LogLinCountModel& m, std::span<const double> x, bool with_nu0)
{
    const auto der = differentiate(m, x, with_nu0, true);
    const auto p = der.grad.front().size();
    Eigen::MatrixXd info = Eigen::MatrixXd::Zero(p, p);
    for (std::size_t t = 0; t < x.size(); ++t) {
        const double lam = std::exp(der.nu[t]);
        info += lam * der.grad[t] * der.grad[t].transpose() - (x[t] - lam) * der.hess[t];
    }
    return info;
}

}  // namespace

std::vector<double> filter_intensity(const LogLinCountModel& model, std::span<const double> x)
{
    validate(model, x.size());
    std::vector<double> nu(x.size());
    double prev_nu = model.nu0;
    double prev_l = model.nu0;
    for (std::size_t t = 1; t <= x.size(); ++t) {
        nu[t - 1] = model.d + model.a1 * prev_nu + model.b1 * prev_l + covariate_sum(model, t);
        prev_nu = nu[t - 1];
        prev_l = std::log1p(x[t - 1]);
    }
    return nu;
}

double log_likelihood(const LogLinCountModel& model, std::span<const double> x)
{
    const auto nu = filter_intensity(model, x);
    return loglik_from_nu(nu, x);
}

Eigen::VectorXd score(const LogLinCountModel& model, std::span<const double> x)
{
    validate(model, x.size());
    return model_score(model, x, false);
}

Eigen::MatrixXd observed_information(const LogLinCountModel& model, std::span<const double> x)
{
    validate(model, x.size());
    return model_information(model, x, false);
}

FitReport fit_mle(std::span<const double> x, std::vector<Intervention> interventions, const FitOptions& opts)
{
    const std::size_t T = x.size();
    if (T < 10) throw ArgumentError("fit_mle: need at least 10 observations");
    for (double v : x) {
        if (!(v >= 0.0) || std::floor(v) != v) throw ArgumentError("fit_mle: observations must be non-negative counts");
    }
    const double xbar = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(T);

    LogLinCountModel templ;
    templ.nu0 = opts.nu0.value_or(std::log(xbar + 1.0));
    templ.interventions = std::move(interventions);
    validate(templ, T);

    Layout layout{opts.freeze_feedback, opts.estimate_nu0, templ.interventions.size()};
    const double level = std::log(std::max(xbar, 0.05));

    std::vector<std::pair<double, double>> starts;
    if (opts.freeze_feedback) starts = {{0.0, 0.0}};
    else starts = {{0.3, 0.3}, {0.6, 0.35}, {0.1, 0.8}, {0.0, 0.0}};

    Optimum best;
    for (auto [a, b] : starts) {
        LogLinCountModel init = templ;
        init.a1 = a;
        init.b1 = b;
        init.d = level * (1.0 - a - b);
        auto opt = minimise(x, layout, templ, layout.from_model(init));
        if (opt.cost < best.cost) best = std::move(opt);
    }
    if (!best.converged || !std::isfinite(best.cost)) {
        throw EstimationError("fit_mle: optimiser did not converge", best.phi, best.cost);
    }

    FitReport rep;
    rep.model = templ;
    layout.to_model(best.phi.data(), rep.model);
    rep.n_obs = T;
    rep.iterations = best.iterations;
    const auto nu = filter_intensity(rep.model, x);
    rep.log_likelihood = loglik_from_nu(nu, x);
    rep.fitted_means.resize(T);
    std::transform(nu.begin(), nu.end(), rep.fitted_means.begin(), [](double v) { return std::exp(v); });
    rep.boundary = std::abs(rep.model.a1) > 0.999 || std::abs(rep.model.a1 + rep.model.b1) > 0.999;

    // Standard errors from the inverse observed information over the free parameters.
    const auto names = parameter_names(rep.model, opts.estimate_nu0);
    const Eigen::MatrixXd info_full = model_information(rep.model, x, opts.estimate_nu0);
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < info_full.rows(); ++i) {
        if (opts.freeze_feedback && (i == 1 || i == 2)) continue;
        free.push_back(i);
    }
    const auto nf = static_cast<Eigen::Index>(free.size());
    Eigen::MatrixXd info(nf, nf);
    for (Eigen::Index i = 0; i < nf; ++i) {
        for (Eigen::Index j = 0; j < nf; ++j) info(i, j) = info_full(free[static_cast<std::size_t>(i)], free[static_cast<std::size_t>(j)]);
    }
    Eigen::VectorXd se = Eigen::VectorXd::Constant(nf, std::numeric_limits<double>::quiet_NaN());
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
        const Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(nf, nf));
        for (Eigen::Index i = 0; i < nf; ++i) se(i) = cov(i, i) > 0 ? std::sqrt(cov(i, i)) : se(i);
    }
    std::vector<double> values{rep.model.d, rep.model.a1, rep.model.b1};
    for (const auto& iv : rep.model.interventions) values.push_back(iv.size);
    if (opts.estimate_nu0) values.push_back(rep.model.nu0);
    for (Eigen::Index i = 0; i < nf; ++i) {
        const auto idx = static_cast<std::size_t>(free[static_cast<std::size_t>(i)]);
        rep.estimates.push_back({names[idx], values[idx], se(i)});
    }
    rep.n_params = static_cast<int>(nf);
    rep.bic = -2.0 * rep.log_likelihood + rep.n_params * std::log(static_cast<double>(T));
    return rep;
}

FitReport fit_mle(const IncidenceSeries& series, std::vector<Intervention> interventions, const FitOptions& opts)
{
    const auto x = series.cases_as_double();
    return fit_mle(x, std::move(interventions), opts);
}

double intervention_score_statistic(const LogLinCountModel& fitted, std::span<const double> x,
                                    const InterventionKind& kind, std::size_t time)
{
    const auto der = differentiate(fitted, x, false, false);
    const auto p = der.grad.front().size();
    double s = 0.0;
    double i_gg = 0.0;
    Eigen::VectorXd i_gt = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd i_tt = Eigen::MatrixXd::Zero(p, p);
    double g_new = 0.0;
    for (std::size_t t = 1; t <= x.size(); ++t) {
        g_new = intervention_covariate(kind, time, t) + fitted.a1 * g_new;
        const double lam = std::exp(der.nu[t - 1]);
        const auto& g = der.grad[t - 1];
        s += (x[t - 1] - lam) * g_new;
        i_gg += lam * g_new * g_new;
        i_gt += lam * g_new * g;
        i_tt += lam * g * g.transpose();
    }
    const double schur = i_gg - i_gt.dot(i_tt.ldlt().solve(i_gt));
    if (!(schur > 1e-12)) return 0.0;
    return s * s / schur;
}

DetectionResult detect_interventions(std::span<const double> x, std::span<const InterventionKind> kinds,
                                     const DetectOptions& opts)
{
    if (kinds.empty()) throw ArgumentError("detect_interventions: no intervention kinds given");
    const std::size_t T = x.size();
    if (T < 5) throw ArgumentError("detect_interventions: series too short");

    DetectionResult out;
    out.null_fit = fit_mle(x, {}, opts.fit);
    out.final_fit = out.null_fit;
    const boost::math::chi_squared chi1(1.0);
    const double n_tests = static_cast<double>((T - 4) * kinds.size());

    std::vector<Intervention> current;
    for (int iter = 0; iter < opts.max_interventions; ++iter) {
        // Rank candidates by the score statistic, then test the leaders with
        // the likelihood ratio from a full joint refit.
        std::vector<std::pair<double, Intervention>> ranked;
        for (const auto& kind : kinds) {
            for (std::size_t r = 3; r + 2 <= T; ++r) {
                const bool taken = std::any_of(current.begin(), current.end(),
                                               [&](const Intervention& iv) { return iv.time == r; });
                if (taken) continue;
                const double stat = intervention_score_statistic(out.final_fit.model, x, kind, r);
                ranked.push_back({stat, {r, kind, 0.0}});
            }
        }
        if (ranked.empty()) break;
        const auto n_lead = std::min<std::size_t>(ranked.size(), 5);
        std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(n_lead), ranked.end(),
                          [](const auto& a, const auto& b) { return a.first > b.first; });

        double best_lr = -1.0;
        std::optional<FitReport> best_fit;
        Intervention best;
        for (std::size_t c = 0; c < n_lead; ++c) {
            if (!(ranked[c].first > 0.0)) break;
            auto trial = out.final_fit.model.interventions;
            trial.push_back(ranked[c].second);
            FitReport fit;
            try {
                fit = fit_mle(x, trial, opts.fit);
            }
            catch (const EstimationError&) {
                continue;
            }
            const double lr = 2.0 * (fit.log_likelihood - out.final_fit.log_likelihood);
            if (lr > best_lr) {
                best_lr = lr;
                best = ranked[c].second;
                best_fit = std::move(fit);
            }
        }
        if (!best_fit || best_lr <= 0.0) break;
        const double p = boost::math::cdf(boost::math::complement(chi1, best_lr));
        const double p_adj = std::min(1.0, p * n_tests);
        if (!(p_adj < opts.level)) break;

        out.final_fit = std::move(*best_fit);
        current = out.final_fit.model.interventions;
        out.detected.push_back({best, best_lr, p, p_adj});
    }
    for (auto& d : out.detected) {
        for (const auto& iv : out.final_fit.model.interventions) {
            if (iv.time == d.intervention.time) d.intervention.size = iv.size;
        }
    }
    std::sort(out.detected.begin(), out.detected.end(),
              [](const auto& a, const auto& b) { return a.intervention.time < b.intervention.time; });
    return out;
}

std::vector<double> simulate(const LogLinCountModel& model, std::size_t T, Rng& rng)
{
    if (!model.is_stable()) throw ArgumentError("simulate: model outside the stability region");
    std::vector<double> x(T);
    double prev_nu = model.nu0;
    double prev_l = model.nu0;
    for (std::size_t t = 1; t <= T; ++t) {
        const double nu = model.d + model.a1 * prev_nu + model.b1 * prev_l + covariate_sum(model, t);
        x[t - 1] = static_cast<double>(rng.poisson(std::exp(nu)));
        prev_nu = nu;
        prev_l = std::log1p(x[t - 1]);
    }
    return x;
}

CountForecast predict_counts(const LogLinCountModel& model, std::span<const double> x, int horizon, double level,
                             RngSeed seed, int n_paths)
{
    if (horizon < 1) throw ArgumentError("predict_counts: horizon must be >= 1");
    if (n_paths < 1000) throw ArgumentError("predict_counts: need at least 1000 paths");
    if (!(level > 0.0 && level < 1.0)) throw ArgumentError("predict_counts: level must be in (0,1)");
    if (x.empty()) throw ArgumentError("predict_counts: empty history");
    const auto nu = filter_intensity(model, x);
    const std::size_t T = x.size();
    const auto H = static_cast<std::size_t>(horizon);
    const auto n = static_cast<std::size_t>(n_paths);

    // paths[h][i]
    std::vector<std::vector<double>> paths(H, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng(derive_seed(seed.value, i));
        double prev_nu = nu.back();
        double prev_l = std::log1p(x.back());
        for (std::size_t h = 1; h <= H; ++h) {
            const double v = model.d + model.a1 * prev_nu + model.b1 * prev_l + covariate_sum(model, T + h);
            const double draw = static_cast<double>(rng.poisson(std::exp(v)));
            paths[h - 1][i] = draw;
            prev_nu = v;
            prev_l = std::log1p(draw);
        }
    }

    std::vector<std::vector<double>> sorted = paths;
    for (auto& col : sorted) std::sort(col.begin(), col.end());

    auto band = [&](std::size_t h, double q) {
        const double lo_p = 0.5 * (1.0 - q);
        const double hi_p = 0.5 * (1.0 + q);
        const auto lo_i = std::min(n - 1, static_cast<std::size_t>(std::floor(lo_p * static_cast<double>(n))));
        const auto hi_i = std::min(n - 1, static_cast<std::size_t>(std::ceil(hi_p * static_cast<double>(n))) - 1);
        return std::pair{sorted[h][lo_i], sorted[h][hi_i]};
    };
    auto joint_coverage = [&](double q) {
        std::vector<std::pair<double, double>> b(H);
        for (std::size_t h = 0; h < H; ++h) b[h] = band(h, q);
        std::size_t inside = 0;
        for (std::size_t i = 0; i < n; ++i) {
            bool ok = true;
            for (std::size_t h = 0; h < H && ok; ++h) ok = paths[h][i] >= b[h].first && paths[h][i] <= b[h].second;
            inside += ok ? 1 : 0;
        }
        return static_cast<double>(inside) / static_cast<double>(n);
    };

    // Smallest marginal level whose bands hold whole paths with probability >= level.
    double lo = level;
    double hi = 1.0;
    if (joint_coverage(lo) < level) {
        for (int it = 0; it < 40; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (joint_coverage(mid) >= level) hi = mid;
            else lo = mid;
        }
    }
    else {
        hi = lo;
    }

    CountForecast out;
    out.adjusted_level = hi;
    for (std::size_t h = 0; h < H; ++h) {
        const double m = std::accumulate(paths[h].begin(), paths[h].end(), 0.0) / static_cast<double>(n);
        const auto [pl, pu] = band(h, level);
        const auto [sl, su] = band(h, hi);
        const int day = static_cast<int>(h + 1);
        out.pointwise.push_back({day, m, std::min(pl, m), std::max(pu, m), level});
        out.simultaneous.push_back({day, m, std::min(sl, m), std::max(su, m), level});
    }
    return out;
}

}  // namespace epitk::count_ts
