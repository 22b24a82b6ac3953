#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <tuple>

#include "epitk/changepoint.hpp"
#include "epitk/cli_io.hpp"
#include "epitk/compartmental.hpp"
#include "epitk/count_ts.hpp"
#include "epitk/rt_inference.hpp"

namespace epitk::cli {

namespace cm = epitk::compartmental;
namespace cp = epitk::changepoint;
namespace ct = epitk::count_ts;
using json = nlohmann::ordered_json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Seed tree: command seed -> module key -> replicate.
enum ModuleKey : std::uint64_t { kChangepoint = 1, kCountts, kSimulate, kSeirqpd, kRtMcmc, kRtEakf };

std::uint64_t module_seed(const RunConfig& c, ModuleKey key)
{
    return derive_seed(c.seed, key);
}

IncidenceSeries national_series(const RunConfig& c, bool local)
{
    if (c.data.cases.empty()) throw ConfigError("data.cases", "an input series is required");
    SeriesSchema schema;
    schema.cases = local ? c.data.local_column : c.data.cases_column;
    return load_series(c.data.cases, schema);
}

PlotRow point(std::string x, std::string series, double y)
{
    return {std::move(x), std::move(series), y, kNaN, kNaN};
}

json fit_json(const ct::FitReport& f)
{
    json j;
    j["estimates"] = json::array();
    for (const auto& e : f.estimates) {
        j["estimates"].push_back({{"name", e.name}, {"value", e.value}, {"std_error", e.std_error}});
    }
    j["log_likelihood"] = f.log_likelihood;
    j["bic"] = f.bic;
    j["n_obs"] = f.n_obs;
    j["n_params"] = f.n_params;
    j["boundary"] = f.boundary;
    return j;
}

// ---------------------------------------------------------------------------

void run_changepoint(const RunConfig& c, ReportBundle& b)
{
    const auto series = national_series(c, false);
    const auto& s = c.changepoint;
    json out = json::object();
    for (const auto& name : s.models) {
        const auto model = cp::parse_model(name);
        cp::IdConfig id;
        id.lambda = s.lambda;
        id.threshold = s.threshold;
        auto res = cp::isolate_detect(series, model, id);
        const auto fc = s.forecast > 0 ? cp::forecast(res, s.forecast, s.level) : std::vector<PredictionInterval>{};

        json j;
        j["sigma"] = res.sigma;
        j["threshold"] = res.threshold;
        j["change_points"] = json::array();
        for (auto r : res.locations) j["change_points"].push_back({{"index", r}, {"date", series.date_at(r - 1).iso()}});
        j["segments"] = json::array();
        for (const auto& g : res.segments) {
            j["segments"].push_back({{"start", series.date_at(g.first - 1).iso()},
                                     {"end", series.date_at(g.last - 1).iso()},
                                     {"intercept", g.intercept},
                                     {"slope", g.slope}});
        }
        if (model == cp::SignalModel::PiecewiseConstant) j["jumps"] = cp::segment_jumps(res);
        j["fitted"] = res.fitted;
        j["forecast"] = json::array();
        PlotTable table{"changepoint_" + name, {}};
        for (std::size_t t = 0; t < series.size(); ++t) {
            table.rows.push_back(point(series.date_at(t).iso(), "observed", res.observed[t]));
        }
        for (std::size_t t = 0; t < series.size(); ++t) {
            table.rows.push_back(point(series.date_at(t).iso(), "fitted", res.fitted[t]));
        }
        for (const auto& f : fc) {
            const auto date = series.date_at(series.size() - 1 + static_cast<std::size_t>(f.horizon_day)).iso();
            j["forecast"].push_back({{"date", date}, {"point", f.point}, {"lower", f.lower}, {"upper", f.upper}});
            table.rows.push_back({date, "forecast", f.point, f.lower, f.upper});
        }
        b.tables.push_back(std::move(table));
        out[name] = std::move(j);
    }
    b.summary["changepoint"] = std::move(out);
}

void run_countts(const RunConfig& c, ReportBundle& b)
{
    const auto series = national_series(c, false);
    const auto& s = c.countts;
    const auto all = series.cases_as_double();
    if (static_cast<std::size_t>(s.holdout) + 10 > all.size()) {
        throw ConfigError("countts.holdout", "leaves fewer than 10 observations to fit");
    }
    const std::vector<double> x(all.begin(), all.end() - s.holdout);

    std::vector<ct::InterventionKind> kinds;
    for (const auto& k : s.detect) kinds.push_back(ct::parse_kind(k));
    ct::DetectOptions opts;
    opts.level = s.level;
    const auto det = kinds.empty() ? ct::DetectionResult{{}, ct::fit_mle(x), {}} : ct::detect_interventions(x, kinds, opts);
    const auto& final_fit = kinds.empty() ? det.null_fit : det.final_fit;

    json j;
    j["null_fit"] = fit_json(det.null_fit);
    j["fit"] = fit_json(final_fit);
    j["interventions"] = json::array();
    for (const auto& d : det.detected) {
        j["interventions"].push_back({{"type", ct::to_string(d.intervention.kind)},
                                      {"time", d.intervention.time},
                                      {"date", series.date_at(d.intervention.time - 1).iso()},
                                      {"statistic", d.statistic},
                                      {"p_value", d.p_value},
                                      {"p_adjusted", d.p_adjusted}});
    }

    PlotTable table{"countts", {}};
    for (std::size_t t = 0; t < all.size(); ++t) {
        table.rows.push_back(point(series.date_at(t).iso(), t < x.size() ? "observed" : "realized", all[t]));
    }
    for (std::size_t t = 0; t < final_fit.fitted_means.size(); ++t) {
        table.rows.push_back(point(series.date_at(t).iso(), "fitted", final_fit.fitted_means[t]));
    }
    j["forecast"] = json::array();
    if (s.forecast > 0) {
        const auto fc = ct::predict_counts(final_fit.model, x, s.forecast, s.forecast_level,
                                           RngSeed{module_seed(c, kCountts)}, s.paths);
        j["adjusted_level"] = fc.adjusted_level;
        bool covered = true;
        int compared = 0;
        for (std::size_t h = 0; h < fc.simultaneous.size(); ++h) {
            const auto& sim = fc.simultaneous[h];
            const auto& pw = fc.pointwise[h];
            const auto date = series.date_at(x.size() + h).iso();
            json row{{"date", date},
                     {"point", sim.point},
                     {"lower", sim.lower},
                     {"upper", sim.upper},
                     {"pointwise_lower", pw.lower},
                     {"pointwise_upper", pw.upper}};
            if (x.size() + h < all.size()) {
                const double real = all[x.size() + h];
                row["realized"] = real;
                covered = covered && real >= sim.lower && real <= sim.upper;
                ++compared;
            }
            j["forecast"].push_back(std::move(row));
            table.rows.push_back({date, "forecast", sim.point, sim.lower, sim.upper});
            table.rows.push_back({date, "forecast_pointwise", pw.point, pw.lower, pw.upper});
        }
        if (compared > 0) j["holdout_covered"] = covered;
    }
    b.tables.push_back(std::move(table));
    b.summary["countts"] = std::move(j);
}

// ---------------------------------------------------------------------------

cm::Model1Params disease_params(const SimulateSection& s)
{
    cm::Model1Params p;
    p.beta = s.beta;
    p.mu = s.mu;
    p.Z = s.Z;
    p.D = s.D;
    p.alpha = s.alpha;
    p.tau_d = s.tau_d;
    p.delay_shape = s.delay_shape;
    return p;
}

struct TrajectoryWriter {
    std::ostringstream csv;
    // (day, district, compartment) -> values over replicates
    std::map<std::tuple<int, std::string, std::string>, std::vector<double>> cells;
    bool with_district = false;

    explicit TrajectoryWriter(bool districts) : with_district(districts)
    {
        csv << (districts ? "day,district,compartment,value,replicate\n" : "day,compartment,value,replicate\n");
    }
    void add(int day, const std::string& district, const std::string& compartment, double value, int rep)
    {
        csv << day << ',';
        if (with_district) csv << district << ',';
        csv << compartment << ',' << format_number(value) << ',' << rep << '\n';
        cells[{day, district, compartment}].push_back(value);
    }
    void add_seir(int day, const std::string& district, const cm::SeirState& s, int rep)
    {
        add(day, district, "S", s.S, rep);
        add(day, district, "E", s.E, rep);
        add(day, district, "Ir", s.Ir, rep);
        add(day, district, "Iu", s.Iu, rep);
        add(day, district, "N", s.N, rep);
    }
    PlotTable table(const std::string& name) const
    {
        PlotTable t{name, {}};
        for (const auto& [key, values] : cells) {
            const auto& [day, district, compartment] = key;
            const auto series = district.empty() ? compartment : district + ":" + compartment;
            if (values.size() == 1) {
                t.rows.push_back(point(std::to_string(day), series, values[0]));
            }
            else {
                t.rows.push_back({std::to_string(day), series, mean(values), quantile(values, 0.025),
                                  quantile(values, 0.975)});
            }
        }
        return t;
    }
};

cm::MetaState meta_initial(const RunConfig& c, const MobilityMatrix& mob)
{
    if (c.data.populations.empty()) throw ConfigError("data.populations", "required for meta2");
    const auto pops = load_populations(c.data.populations);
    cm::MetaState st;
    st.names = mob.names;
    for (const auto& name : mob.names) {
        const auto it = std::find(pops.names.begin(), pops.names.end(), name);
        if (it == pops.names.end()) throw ConfigError("data.populations", "no population for district '" + name + "'");
        const double N = pops.population[static_cast<std::size_t>(it - pops.names.begin())];
        const auto& s = c.simulate;
        st.districts.push_back({N - s.E0 - s.Ir0 - s.Iu0, s.E0, s.Ir0, s.Iu0, N});
    }
    return st;
}

void run_simulate(const RunConfig& c, ReportBundle& b)
{
    const auto& s = c.simulate;
    const auto seed = module_seed(c, kSimulate);
    json j;
    j["model"] = s.model;
    j["horizon"] = s.horizon;
    if (s.model == "seir1") {
        const auto p = disease_params(s);
        const cm::SeirState init{s.population - s.E0 - s.Ir0 - s.Iu0, s.E0, s.Ir0, s.Iu0, s.population};
        TrajectoryWriter w(false);
        const int reps = s.mean ? 1 : s.reps;
        std::vector<double> totals;
        for (int r = 0; r < reps; ++r) {
            const auto run = s.mean ? cm::simulate_model1_mean(p, init, s.horizon)
                                    : cm::simulate_model1(p, init, s.horizon, RngSeed{derive_seed(seed, r)});
            for (int t = 0; t <= s.horizon; ++t) w.add_seir(t, "", run.states[static_cast<std::size_t>(t)], r);
            for (int t = 0; t < s.horizon; ++t) {
                w.add(t + 1, "", "reported", run.new_reported[static_cast<std::size_t>(t)], r);
                w.add(t + 1, "", "recorded", run.recorded[static_cast<std::size_t>(t)], r);
            }
            totals.push_back(run.total_reported);
        }
        j["total_reported"] = totals;
        b.extra.push_back({"trajectory.csv", w.csv.str()});
        b.tables.push_back(w.table("simulate"));
    }
    else if (s.model == "meta2") {
        if (c.data.mobility.empty()) throw ConfigError("data.mobility", "required for meta2");
        const auto mob = load_mobility(c.data.mobility);
        const auto init = meta_initial(c, mob);
        cm::Model2Params p{disease_params(s), s.theta};
        TrajectoryWriter w(true);
        const int reps = s.mean ? 1 : s.reps;
        for (int r = 0; r < reps; ++r) {
            const auto run = s.mean ? cm::simulate_model2_mean(p, mob, init, s.horizon)
                                    : cm::simulate_model2(p, mob, init, s.horizon, RngSeed{derive_seed(seed, r)});
            for (int t = 0; t <= s.horizon; ++t) {
                for (std::size_t d = 0; d < mob.size(); ++d) {
                    w.add_seir(t, mob.names[d], run.states[static_cast<std::size_t>(t)].districts[d], r);
                }
            }
            for (std::size_t d = 0; d < mob.size(); ++d) {
                for (int t = 0; t < s.horizon; ++t) {
                    w.add(t + 1, mob.names[d], "recorded", run.recorded[d][static_cast<std::size_t>(t)], r);
                }
            }
        }
        b.extra.push_back({"trajectory.csv", w.csv.str()});
        b.tables.push_back(w.table("simulate"));
    }
    else {
        cm::Model3Params p;
        p.zeta = s.zeta;
        p.beta = s.beta;
        p.gamma_inv = s.gamma_inv;
        p.delta_inv = s.delta_inv;
        std::copy(s.lambda.begin(), s.lambda.end(), p.lambda.begin());
        p.kappa = s.kappa;
        cm::SeirqpdState init;
        init.E = s.E0;
        init.I = s.I0;
        init.Q = s.Q0;
        init.S = s.population - s.E0 - s.I0 - s.Q0;
        const auto traj = cm::integrate_model3(p, init, s.horizon);
        TrajectoryWriter w(false);
        for (int t = 0; t <= s.horizon; ++t) {
            const auto& x = traj[static_cast<std::size_t>(t)];
            w.add(t, "", "S", x.S, 0);
            w.add(t, "", "P", x.P, 0);
            w.add(t, "", "E", x.E, 0);
            w.add(t, "", "I", x.I, 0);
            w.add(t, "", "Q", x.Q, 0);
            w.add(t, "", "R", x.R, 0);
            w.add(t, "", "D", x.D, 0);
        }
        b.extra.push_back({"trajectory.csv", w.csv.str()});
        b.tables.push_back(w.table("simulate"));
    }
    b.summary["simulate"] = std::move(j);
}

// ---------------------------------------------------------------------------

json model3_json(const cm::Model3Fit& f)
{
    return {{"zeta", f.params.zeta},
            {"beta", f.params.beta},
            {"gamma_inv", f.params.gamma_inv},
            {"delta_inv", f.params.delta_inv},
            {"lambda", f.params.lambda},
            {"kappa", f.params.kappa},
            {"E0", f.init.E},
            {"I0", f.init.I},
            {"cost", f.cost},
            {"re_active", f.re_active},
            {"re_recovered", f.re_recovered},
            {"re_deaths", std::isnan(f.re_deaths) ? json() : json(f.re_deaths)}};
}

void run_seirqpd(const RunConfig& c, ReportBundle& b)
{
    const auto series = national_series(c, false);
    const auto obs = cm::model3_observations(series);
    cm::Model3FitOptions opts;
    opts.population = c.seirqpd.population;
    opts.n_starts = c.seirqpd.starts;
    opts.seed = RngSeed{module_seed(c, kSeirqpd)};
    const auto fit = cm::fit_model3(obs, c.seirqpd.gamma_inv, opts);

    json j = model3_json(fit);
    const auto peak = [&](auto member) {
        std::size_t best = 0;
        for (std::size_t t = 0; t < fit.trajectory.size(); ++t) {
            if (fit.trajectory[t].*member > fit.trajectory[best].*member) best = t;
        }
        return json{{"value", fit.trajectory[best].*member}, {"date", series.date_at(best).iso()}};
    };
    j["peak_exposed"] = peak(&cm::SeirqpdState::E);
    j["peak_infectious"] = peak(&cm::SeirqpdState::I);
    j["start_costs"] = fit.start_costs;

    TrajectoryWriter w(false);
    PlotTable table{"seirqpd_fit", {}};
    for (std::size_t t = 0; t < fit.trajectory.size(); ++t) {
        const auto& x = fit.trajectory[t];
        const auto day = static_cast<int>(t);
        for (const auto& [name, v] : {std::pair{"S", x.S}, {"P", x.P}, {"E", x.E}, {"I", x.I}, {"Q", x.Q},
                                      {"R", x.R}, {"D", x.D}}) {
            w.add(day, "", name, v, 0);
        }
        const auto date = series.date_at(t).iso();
        table.rows.push_back(point(date, "active_observed", obs.active[t]));
        table.rows.push_back(point(date, "active_fitted", x.Q));
        table.rows.push_back(point(date, "recovered_observed", obs.recovered[t]));
        table.rows.push_back(point(date, "recovered_fitted", x.R));
        table.rows.push_back(point(date, "deaths_observed", obs.deaths[t]));
        table.rows.push_back(point(date, "deaths_fitted", x.D));
        table.rows.push_back(point(date, "exposed_fitted", x.E));
        table.rows.push_back(point(date, "infectious_fitted", x.I));
    }
    b.extra.push_back({"seirqpd_trajectory.csv", w.csv.str()});
    b.tables.push_back(std::move(table));

    if (!c.seirqpd.sweep.empty()) {
        const auto fits = cm::sweep_model3(obs, c.seirqpd.sweep, opts);
        PlotTable sweep{"seirqpd_sweep", {}};
        j["sweep"] = json::array();
        for (const auto& f : fits) {
            j["sweep"].push_back(model3_json(f));
            const auto x = format_number(f.params.gamma_inv);
            sweep.rows.push_back(point(x, "zeta", f.params.zeta));
            sweep.rows.push_back(point(x, "beta", f.params.beta));
            sweep.rows.push_back(point(x, "cost", f.cost));
        }
        b.tables.push_back(std::move(sweep));
    }
    b.summary["fit_seirqpd"] = std::move(j);
}

// ---------------------------------------------------------------------------

void add_rt(const std::string& method, const std::vector<rt::RtEstimate>& estimates,
            const std::vector<std::string>& warnings, bool dump, ReportBundle& b, json& out)
{
    json j;
    j["estimates"] = json::array();
    PlotTable table{"rt_" + method, {}};
    for (const auto& e : estimates) {
        const auto num = [](double v) { return std::isnan(v) ? json() : json(v); };
        json row{{"start", e.start.iso()},
                 {"end", e.end.iso()},
                 {"median", num(e.median)},
                 {"lower", num(e.lower)},
                 {"upper", num(e.upper)},
                 {"prob_below_one", num(e.prob_below_one)},
                 {"insufficient", e.insufficient}};
        if (dump) {
            if (e.form == rt::PosteriorForm::Samples) row["samples"] = e.samples;
            if (e.form == rt::PosteriorForm::Grid) {
                row["grid"] = e.grid;
                row["mass"] = e.mass;
            }
            if (e.form == rt::PosteriorForm::Gamma) {
                row["shape"] = e.shape;
                row["rate"] = e.rate;
            }
        }
        j["estimates"].push_back(std::move(row));
        table.rows.push_back({e.start.iso(), "R", e.median, e.lower, e.upper});
        table.rows.push_back(point(e.start.iso(), "P(R<1)", e.prob_below_one));
    }
    j["warnings"] = warnings;
    for (const auto& w : warnings) b.diagnostics.push_back(method + ": " + w);
    b.tables.push_back(std::move(table));
    out[method] = std::move(j);
}

void run_rt_method(const RunConfig& c, const std::string& method, ReportBundle& b, json& out)
{
    const auto& s = c.rt;
    if (method == "mcmc1") {
        rt::Mcmc1Config cfg;
        cfg.D = s.D;
        cfg.population = s.population;
        cfg.n_periods = s.periods;
        cfg.n_steps = s.steps;
        cfg.burn_in = s.burn_in;
        cfg.seed = RngSeed{module_seed(c, kRtMcmc)};
        const auto res = rt::mcmc_model1(national_series(c, s.local_only), cfg);
        std::vector<rt::RtEstimate> est;
        for (const auto& p : res.periods) est.push_back(p.rt);
        add_rt(method, est, res.warnings, s.dump_samples, b, out);
        return;
    }
    if (method == "eakf2") {
        if (c.data.districts.empty()) throw ConfigError("data.districts", "required for eakf2");
        if (c.data.mobility.empty()) throw ConfigError("data.mobility", "required for eakf2");
        if (c.data.populations.empty()) throw ConfigError("data.populations", "required for eakf2");
        const auto mob = load_mobility(c.data.mobility);
        const auto districts = load_multi_series(c.data.districts, mob.names);
        const auto pops = load_populations(c.data.populations);
        std::vector<double> n;
        for (const auto& name : mob.names) {
            const auto it = std::find(pops.names.begin(), pops.names.end(), name);
            if (it == pops.names.end()) {
                throw ConfigError("data.populations", "no population for district '" + name + "'");
            }
            n.push_back(pops.population[static_cast<std::size_t>(it - pops.names.begin())]);
        }
        rt::EakfConfig cfg;
        cfg.n_members = s.members;
        if (s.lockdown) cfg.lockdown = Date::parse(*s.lockdown);
        cfg.seed = RngSeed{module_seed(c, kRtEakf)};
        const auto res = rt::eakf_model2(districts, mob, n, cfg);
        add_rt(method, res.weekly, res.warnings, s.dump_samples, b, out);
        return;
    }
    const auto series = national_series(c, s.local_only);
    if (method == "bettencourt") {
        rt::BettencourtConfig cfg;
        cfg.window = s.window;
        cfg.D = s.D;
        add_rt(method, rt::bettencourt_rt(series, cfg), {}, s.dump_samples, b, out);
        return;
    }
    rt::CoriConfig cfg;
    cfg.window = s.window;
    add_rt(method, rt::cori_rt(series, cfg), {}, s.dump_samples, b, out);
}

void run_rt(const RunConfig& c, const std::vector<std::string>& methods, ReportBundle& b, bool tolerant)
{
    json out = json::object();
    for (const auto& m : methods) {
        if (!tolerant) {
            run_rt_method(c, m, b, out);
            continue;
        }
        try {
            run_rt_method(c, m, b, out);
        }
        catch (const ConfigError& e) {
            b.diagnostics.push_back("rt " + m + " skipped: " + e.what());
        }
        catch (const Error& e) {
            b.diagnostics.push_back("rt " + m + " failed: " + e.what());
            b.partial_failure = true;
        }
    }
    b.summary["rt"] = std::move(out);
}

void run_all(const RunConfig& c, ReportBundle& b)
{
    (void)national_series(c, false);
    const auto guarded = [&](const char* name, auto&& step) {
        try {
            step();
        }
        catch (const ConfigError& e) {
            b.diagnostics.push_back(std::string(name) + " skipped: " + e.what());
        }
        catch (const Error& e) {
            b.diagnostics.push_back(std::string(name) + " failed: " + e.what());
            b.partial_failure = true;
        }
    };
    guarded("changepoint", [&] { run_changepoint(c, b); });
    guarded("countts", [&] { run_countts(c, b); });
    const auto series = national_series(c, false);
    if (series.recovered() && series.deaths()) {
        guarded("fit-seirqpd", [&] { run_seirqpd(c, b); });
    }
    else {
        b.diagnostics.push_back("fit-seirqpd skipped: input has no recovered/deaths columns");
    }
    run_rt(c, {"mcmc1", "eakf2", "bettencourt", "cori"}, b, true);
}

}  // namespace

ReportBundle run(const RunConfig& config)
{
    validate(config);
    ReportBundle b;
    b.summary = json::object();
    b.summary["command"] = std::string(to_string(config.command));
    b.summary["seed"] = config.seed;
    switch (config.command) {
    case Command::Changepoint: run_changepoint(config, b); break;
    case Command::Countts: run_countts(config, b); break;
    case Command::Simulate: run_simulate(config, b); break;
    case Command::FitSeirqpd: run_seirqpd(config, b); break;
    case Command::Rt: run_rt(config, config.rt.methods, b, false); break;
    case Command::ReportAll: run_all(config, b); break;
    }
    b.summary["diagnostics"] = b.diagnostics;
    finalize_manifest(b, config);
    return b;
}

}  // namespace epitk::cli
