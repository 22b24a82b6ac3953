#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "epitk/changepoint.hpp"
#include "epitk/cli_io.hpp"
#include "epitk/compartmental.hpp"
#include "epitk/core.hpp"
#include "epitk/count_ts.hpp"
#include "epitk/rt_inference.hpp"

namespace py = pybind11;
using namespace epitk;
namespace cp = epitk::changepoint;
namespace ct = epitk::count_ts;
namespace cm = epitk::compartmental;

namespace {

Date to_date(const py::object& o)
{
    if (py::isinstance<Date>(o)) return o.cast<Date>();
    if (py::isinstance<py::str>(o)) return Date::parse(o.cast<std::string>());
    if (py::hasattr(o, "isoformat")) return Date::parse(o.attr("isoformat")().cast<std::string>().substr(0, 10));
    throw py::type_error("expected a Date, an ISO date string or a datetime.date");
}

std::string repr_interval(const PredictionInterval& p)
{
    std::ostringstream ss;
    ss << "PredictionInterval(day=" << p.horizon_day << ", point=" << p.point << ", lower=" << p.lower
       << ", upper=" << p.upper << ")";
    return ss.str();
}

void bind_core(py::module_& m)
{
    auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ArgumentError>(m, "ArgumentError", error.ptr());
    py::register_exception<DomainError>(m, "DomainError", error.ptr());
    py::register_exception<EstimationError>(m, "EstimationError", error.ptr());
    py::register_exception<IntegrationError>(m, "IntegrationError", error.ptr());
    py::register_exception<ParseError>(m, "ParseError", error.ptr());

    py::class_<Date>(m, "Date")
        .def(py::init([](const py::object& o) { return to_date(o); }), py::arg("value"))
        .def_static("from_ymd", &Date::from_ymd, py::arg("year"), py::arg("month"), py::arg("day"))
        .def_property_readonly("epoch_day", &Date::epoch_day)
        .def("iso", &Date::iso)
        .def("__str__", &Date::iso)
        .def("__repr__", [](const Date& d) { return "Date('" + d.iso() + "')"; })
        .def("__add__", [](const Date& d, int n) { return d + n; })
        .def("__sub__", [](const Date& a, const Date& b) { return a - b; })
        .def(py::self == py::self)
        .def(py::self < py::self)
        .def("__hash__", [](const Date& d) { return d.epoch_day(); });

    py::class_<IncidenceSeries>(m, "IncidenceSeries")
        .def(py::init([](const py::object& start, std::vector<Count> cases, std::optional<std::vector<Count>> recovered,
                         std::optional<std::vector<Count>> deaths, std::string label) {
                 return IncidenceSeries(to_date(start), std::move(cases), std::move(recovered), std::move(deaths),
                                        std::move(label));
             }),
             py::arg("start"), py::arg("cases"), py::arg("recovered") = py::none(), py::arg("deaths") = py::none(),
             py::arg("label") = "")
        .def_property_readonly("start_date", &IncidenceSeries::start_date)
        .def_property_readonly("cases", &IncidenceSeries::cases)
        .def_property_readonly("recovered", &IncidenceSeries::recovered)
        .def_property_readonly("deaths", &IncidenceSeries::deaths)
        .def_property_readonly("label", &IncidenceSeries::label)
        .def("date_at", &IncidenceSeries::date_at)
        .def("slice",
             [](const IncidenceSeries& s, const py::object& first, const py::object& last) {
                 return s.slice(to_date(first), to_date(last));
             })
        .def("__len__", &IncidenceSeries::size);

    py::class_<SeriesSchema>(m, "SeriesSchema")
        .def(py::init<>())
        .def_readwrite("date", &SeriesSchema::date)
        .def_readwrite("cases", &SeriesSchema::cases)
        .def_readwrite("recovered", &SeriesSchema::recovered)
        .def_readwrite("deaths", &SeriesSchema::deaths);

    m.def("load_series", &load_series, py::arg("path"), py::arg("schema") = SeriesSchema{});
    m.def("parse_series", &parse_series, py::arg("text"), py::arg("schema") = SeriesSchema{}, py::arg("label") = "");
    m.def("format_series", &format_series);

    py::class_<PredictionInterval>(m, "PredictionInterval")
        .def_readonly("horizon_day", &PredictionInterval::horizon_day)
        .def_readonly("point", &PredictionInterval::point)
        .def_readonly("lower", &PredictionInterval::lower)
        .def_readonly("upper", &PredictionInterval::upper)
        .def_readonly("level", &PredictionInterval::level)
        .def("__repr__", &repr_interval);

    m.def("derive_seed", &derive_seed, py::arg("parent"), py::arg("key"));
}

void bind_changepoint(py::module_& parent)
{
    auto m = parent.def_submodule("changepoint", "Isolate-Detect change-point detection");

    py::class_<cp::Segment>(m, "Segment")
        .def_readonly("first", &cp::Segment::first)
        .def_readonly("last", &cp::Segment::last)
        .def_readonly("intercept", &cp::Segment::intercept)
        .def_readonly("slope", &cp::Segment::slope);

    py::class_<cp::ChangePointResult>(m, "ChangePointResult")
        .def_property_readonly("model", [](const cp::ChangePointResult& r) { return std::string(cp::to_string(r.model)); })
        .def_readonly("locations", &cp::ChangePointResult::locations)
        .def_readonly("fitted", &cp::ChangePointResult::fitted)
        .def_readonly("segments", &cp::ChangePointResult::segments)
        .def_readonly("threshold", &cp::ChangePointResult::threshold)
        .def_readonly("sigma", &cp::ChangePointResult::sigma)
        .def_property_readonly("jumps", &cp::segment_jumps);

    m.def(
        "detect",
        [](const std::vector<double>& x, const std::string& model, int lambda, std::optional<double> threshold) {
            cp::IdConfig cfg;
            cfg.lambda = lambda;
            cfg.threshold = threshold;
            return cp::isolate_detect(x, cp::parse_model(model), cfg);
        },
        py::arg("x"), py::arg("model") = "constant", py::arg("lambda_") = 10, py::arg("threshold") = py::none(),
        "Change-points of a piecewise-constant or continuous piecewise-linear signal.");
    m.def("forecast", &cp::forecast, py::arg("result"), py::arg("horizon") = 7, py::arg("level") = 0.95);
}

void bind_count_ts(py::module_& parent)
{
    auto m = parent.def_submodule("count_ts", "Log-linear Poisson autoregression with interventions");

    py::class_<ct::Intervention>(m, "Intervention")
        .def(py::init([](std::size_t time, const std::string& kind, double size) {
                 return ct::Intervention{time, ct::parse_kind(kind), size};
             }),
             py::arg("time"), py::arg("kind") = "ao", py::arg("size") = 0.0)
        .def_readwrite("time", &ct::Intervention::time)
        .def_readwrite("size", &ct::Intervention::size)
        .def_property_readonly("kind", [](const ct::Intervention& i) { return ct::to_string(i.kind); });

    py::class_<ct::LogLinCountModel>(m, "LogLinCountModel")
        .def(py::init<>())
        .def_readwrite("d", &ct::LogLinCountModel::d)
        .def_readwrite("a1", &ct::LogLinCountModel::a1)
        .def_readwrite("b1", &ct::LogLinCountModel::b1)
        .def_readwrite("nu0", &ct::LogLinCountModel::nu0)
        .def_readwrite("interventions", &ct::LogLinCountModel::interventions)
        .def("is_stable", &ct::LogLinCountModel::is_stable)
        .def("log_likelihood", [](const ct::LogLinCountModel& mm, const std::vector<double>& x) {
            return ct::log_likelihood(mm, x);
        });

    py::class_<ct::Estimate>(m, "Estimate")
        .def_readonly("name", &ct::Estimate::name)
        .def_readonly("value", &ct::Estimate::value)
        .def_readonly("std_error", &ct::Estimate::std_error);

    py::class_<ct::FitReport>(m, "FitReport")
        .def_readonly("model", &ct::FitReport::model)
        .def_readonly("estimates", &ct::FitReport::estimates)
        .def_readonly("log_likelihood", &ct::FitReport::log_likelihood)
        .def_readonly("bic", &ct::FitReport::bic)
        .def_readonly("fitted_means", &ct::FitReport::fitted_means)
        .def_readonly("boundary", &ct::FitReport::boundary);

    py::class_<ct::DetectedIntervention>(m, "DetectedIntervention")
        .def_readonly("intervention", &ct::DetectedIntervention::intervention)
        .def_readonly("statistic", &ct::DetectedIntervention::statistic)
        .def_readonly("p_value", &ct::DetectedIntervention::p_value)
        .def_readonly("p_adjusted", &ct::DetectedIntervention::p_adjusted);

    py::class_<ct::DetectionResult>(m, "DetectionResult")
        .def_readonly("detected", &ct::DetectionResult::detected)
        .def_readonly("null_fit", &ct::DetectionResult::null_fit)
        .def_readonly("final_fit", &ct::DetectionResult::final_fit);

    py::class_<ct::CountForecast>(m, "CountForecast")
        .def_readonly("simultaneous", &ct::CountForecast::simultaneous)
        .def_readonly("pointwise", &ct::CountForecast::pointwise)
        .def_readonly("adjusted_level", &ct::CountForecast::adjusted_level);

    m.def(
        "fit",
        [](const std::vector<double>& x, std::vector<ct::Intervention> interventions) {
            return ct::fit_mle(x, std::move(interventions));
        },
        py::arg("x"), py::arg("interventions") = std::vector<ct::Intervention>{});
    m.def(
        "detect",
        [](const std::vector<double>& x, const std::vector<std::string>& kinds, double level) {
            std::vector<ct::InterventionKind> k;
            for (const auto& s : kinds) k.push_back(ct::parse_kind(s));
            ct::DetectOptions opts;
            opts.level = level;
            return ct::detect_interventions(x, k, opts);
        },
        py::arg("x"), py::arg("kinds") = std::vector<std::string>{"ao"}, py::arg("level") = 0.05);
    m.def(
        "predict",
        [](const ct::LogLinCountModel& model, const std::vector<double>& x, int horizon, double level,
           std::uint64_t seed, int paths) { return ct::predict_counts(model, x, horizon, level, RngSeed{seed}, paths); },
        py::arg("model"), py::arg("x"), py::arg("horizon") = 7, py::arg("level") = 0.95, py::arg("seed") = 1,
        py::arg("paths") = 10000);
    m.def(
        "simulate",
        [](const ct::LogLinCountModel& model, std::size_t T, std::uint64_t seed) {
            Rng rng(seed);
            return ct::simulate(model, T, rng);
        },
        py::arg("model"), py::arg("length"), py::arg("seed") = 1);
}

void bind_compartmental(py::module_& parent)
{
    auto m = parent.def_submodule("compartmental", "SEIR-type models");

    py::class_<cm::Model1Params>(m, "Model1Params")
        .def(py::init<>())
        .def_readwrite("beta", &cm::Model1Params::beta)
        .def_readwrite("mu", &cm::Model1Params::mu)
        .def_readwrite("Z", &cm::Model1Params::Z)
        .def_readwrite("D", &cm::Model1Params::D)
        .def_readwrite("alpha", &cm::Model1Params::alpha)
        .def_readwrite("tau_d", &cm::Model1Params::tau_d)
        .def_readwrite("delay_shape", &cm::Model1Params::delay_shape);

    py::class_<cm::SeirState>(m, "SeirState")
        .def(py::init<double, double, double, double, double>(), py::arg("S"), py::arg("E"), py::arg("Ir"),
             py::arg("Iu"), py::arg("N"))
        .def_readwrite("S", &cm::SeirState::S)
        .def_readwrite("E", &cm::SeirState::E)
        .def_readwrite("Ir", &cm::SeirState::Ir)
        .def_readwrite("Iu", &cm::SeirState::Iu)
        .def_readwrite("N", &cm::SeirState::N);

    py::class_<cm::Model1Run>(m, "Model1Run")
        .def_readonly("states", &cm::Model1Run::states)
        .def_readonly("new_reported", &cm::Model1Run::new_reported)
        .def_readonly("recorded", &cm::Model1Run::recorded)
        .def_readonly("total_reported", &cm::Model1Run::total_reported);

    m.def(
        "simulate_model1",
        [](const cm::Model1Params& p, const cm::SeirState& init, int horizon, std::optional<std::uint64_t> seed) {
            return seed ? cm::simulate_model1(p, init, horizon, RngSeed{*seed})
                        : cm::simulate_model1_mean(p, init, horizon);
        },
        py::arg("params"), py::arg("init"), py::arg("horizon"), py::arg("seed") = py::none(),
        "Stochastic run when a seed is given, otherwise the deterministic mean.");

    py::class_<cm::Model3Params>(m, "Model3Params")
        .def(py::init<>())
        .def_readwrite("zeta", &cm::Model3Params::zeta)
        .def_readwrite("beta", &cm::Model3Params::beta)
        .def_readwrite("gamma_inv", &cm::Model3Params::gamma_inv)
        .def_readwrite("delta_inv", &cm::Model3Params::delta_inv)
        .def_readwrite("lambda_", &cm::Model3Params::lambda)
        .def_readwrite("kappa", &cm::Model3Params::kappa);

    py::class_<cm::SeirqpdState>(m, "SeirqpdState")
        .def(py::init<double, double, double, double, double, double, double>(), py::arg("S"), py::arg("P") = 0.0,
             py::arg("E") = 0.0, py::arg("I") = 0.0, py::arg("Q") = 0.0, py::arg("R") = 0.0, py::arg("D") = 0.0)
        .def_readwrite("S", &cm::SeirqpdState::S)
        .def_readwrite("P", &cm::SeirqpdState::P)
        .def_readwrite("E", &cm::SeirqpdState::E)
        .def_readwrite("I", &cm::SeirqpdState::I)
        .def_readwrite("Q", &cm::SeirqpdState::Q)
        .def_readwrite("R", &cm::SeirqpdState::R)
        .def_readwrite("D", &cm::SeirqpdState::D)
        .def("total", &cm::SeirqpdState::total);

    m.def("integrate_model3", &cm::integrate_model3, py::arg("params"), py::arg("init"), py::arg("horizon"));

    py::class_<cm::Model3Fit>(m, "Model3Fit")
        .def_readonly("params", &cm::Model3Fit::params)
        .def_readonly("init", &cm::Model3Fit::init)
        .def_readonly("trajectory", &cm::Model3Fit::trajectory)
        .def_readonly("cost", &cm::Model3Fit::cost)
        .def_readonly("re_active", &cm::Model3Fit::re_active)
        .def_readonly("re_recovered", &cm::Model3Fit::re_recovered)
        .def_readonly("re_deaths", &cm::Model3Fit::re_deaths);

    m.def(
        "fit_model3",
        [](const IncidenceSeries& series, double gamma_inv, double population, int starts, std::uint64_t seed) {
            cm::Model3FitOptions opts;
            opts.population = population;
            opts.n_starts = starts;
            opts.seed = RngSeed{seed};
            return cm::fit_model3(cm::model3_observations(series), gamma_inv, opts);
        },
        py::arg("series"), py::arg("gamma_inv") = 3.0, py::arg("population") = 875000.0, py::arg("starts") = 8,
        py::arg("seed") = 20200304, py::call_guard<py::gil_scoped_release>());
}

void bind_rt(py::module_& parent)
{
    auto m = parent.def_submodule("rt", "Effective reproduction number");

    py::class_<rt::RtEstimate>(m, "RtEstimate")
        .def_readonly("start", &rt::RtEstimate::start)
        .def_readonly("end", &rt::RtEstimate::end)
        .def_readonly("samples", &rt::RtEstimate::samples)
        .def_readonly("grid", &rt::RtEstimate::grid)
        .def_readonly("mass", &rt::RtEstimate::mass)
        .def_readonly("shape", &rt::RtEstimate::shape)
        .def_readonly("rate", &rt::RtEstimate::rate)
        .def_readonly("insufficient", &rt::RtEstimate::insufficient)
        .def_readonly("median", &rt::RtEstimate::median)
        .def_readonly("lower", &rt::RtEstimate::lower)
        .def_readonly("upper", &rt::RtEstimate::upper)
        .def_readonly("prob_below_one", &rt::RtEstimate::prob_below_one);

    m.def("effective_r", &rt::effective_r, py::arg("alpha"), py::arg("beta"), py::arg("mu"), py::arg("D"));

    m.def(
        "mcmc",
        [](const IncidenceSeries& data, int periods, int steps, int burn_in, int lead_days, std::uint64_t seed) {
            rt::Mcmc1Config cfg;
            cfg.n_periods = periods;
            cfg.n_steps = steps;
            cfg.burn_in = burn_in;
            cfg.lead_days = lead_days;
            cfg.seed = RngSeed{seed};
            std::vector<rt::RtEstimate> out;
            for (auto& p : rt::mcmc_model1(data, cfg).periods) out.push_back(std::move(p.rt));
            return out;
        },
        py::arg("data"), py::arg("periods") = 6, py::arg("steps") = 10000, py::arg("burn_in") = 2000,
        py::arg("lead_days") = 3, py::arg("seed") = 1, py::call_guard<py::gil_scoped_release>());
    m.def(
        "bettencourt",
        [](const IncidenceSeries& data, int window, double D) {
            rt::BettencourtConfig cfg;
            cfg.window = window;
            cfg.D = D;
            return rt::bettencourt_rt(data, cfg);
        },
        py::arg("data"), py::arg("window") = 7, py::arg("D") = 3.5);
    m.def(
        "cori",
        [](const IncidenceSeries& data, int window, double si_mean, double si_sd) {
            rt::CoriConfig cfg;
            cfg.window = window;
            cfg.si_mean = si_mean;
            cfg.si_sd = si_sd;
            return rt::cori_rt(data, cfg);
        },
        py::arg("data"), py::arg("window") = 7, py::arg("si_mean") = 6.48, py::arg("si_sd") = 3.83);
}

}  // namespace

PYBIND11_MODULE(_epitk, m)
{
    m.doc() = "Epidemic surveillance toolkit";
    m.attr("__version__") = EPITK_VERSION;
    bind_core(m);
    bind_changepoint(m);
    bind_count_ts(m);
    bind_compartmental(m);
    bind_rt(m);

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::vector<std::string> full{"epitk"};
            full.insert(full.end(), args.begin(), args.end());
            std::vector<const char*> argv;
            for (const auto& a : full) argv.push_back(a.c_str());
            std::ostringstream out, err;
            int code = 0;
            {
                py::gil_scoped_release release;
                code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
            }
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs the command line in-process; returns (exit_code, stdout, stderr).");
}
