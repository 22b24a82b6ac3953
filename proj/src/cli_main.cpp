#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#define TOML_EXCEPTIONS 1
#include <tomlplusplus/toml.hpp>

#include "epitk/cli_io.hpp"

namespace epitk::cli {

namespace {

constexpr const char* kReportFormat = "1";

template <class T>
void apply(const std::optional<T>& flag, T& target)
{
    if (flag) target = *flag;
}

std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        const auto next = s.find(',', pos);
        auto item = s.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
        if (!item.empty()) out.push_back(item);
        if (next == std::string::npos) break;
        pos = next + 1;
    }
    return out;
}

// Simulation parameters from a TOML file: either top-level keys or a [simulate] table.
void load_simulate_params(const std::string& path, SimulateSection& s)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("simulate.params", "cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    toml::table t;
    try {
        t = toml::parse(ss.str());
    }
    catch (const toml::parse_error& e) {
        throw ConfigError("simulate.params", std::string(e.description()));
    }
    if (!t.contains("simulate")) {
        toml::table wrapped;
        wrapped.insert("simulate", t);
        t = std::move(wrapped);
    }
    // Reuse the full parser so the key checks and conversions are shared.
    std::ostringstream rendered;
    rendered << t;
    const auto parsed = parse_config(rendered.str());
    const auto& p = parsed.simulate;
    // Only keys present in the file override.
    const auto& sim = *t["simulate"].as_table();
    const auto take = [&](std::string_view key, auto member) {
        if (sim.contains(key)) s.*member = p.*member;
    };
    take("model", &SimulateSection::model);
    take("horizon", &SimulateSection::horizon);
    take("reps", &SimulateSection::reps);
    take("mean", &SimulateSection::mean);
    take("beta", &SimulateSection::beta);
    take("mu", &SimulateSection::mu);
    take("Z", &SimulateSection::Z);
    take("D", &SimulateSection::D);
    take("alpha", &SimulateSection::alpha);
    take("tau_d", &SimulateSection::tau_d);
    take("delay_shape", &SimulateSection::delay_shape);
    take("theta", &SimulateSection::theta);
    take("zeta", &SimulateSection::zeta);
    take("gamma_inv", &SimulateSection::gamma_inv);
    take("delta_inv", &SimulateSection::delta_inv);
    take("lambda", &SimulateSection::lambda);
    take("kappa", &SimulateSection::kappa);
    take("population", &SimulateSection::population);
    take("E0", &SimulateSection::E0);
    take("Ir0", &SimulateSection::Ir0);
    take("Iu0", &SimulateSection::Iu0);
    take("I0", &SimulateSection::I0);
    take("Q0", &SimulateSection::Q0);
}

struct Flags {
    std::optional<std::string> config, output, data, districts, mobility, populations;
    std::optional<std::uint64_t> seed;
    // changepoint
    std::optional<std::string> cp_model, cp_threshold;
    std::optional<int> cp_lambda, cp_forecast;
    std::optional<double> cp_level;
    // countts
    std::optional<std::string> ct_detect;
    std::optional<double> ct_level, ct_forecast_level;
    std::optional<int> ct_forecast, ct_paths, ct_holdout;
    // simulate
    std::optional<std::string> sim_model, sim_params;
    std::optional<int> sim_horizon, sim_reps;
    bool sim_mean = false;
    // fit-seirqpd
    std::optional<double> gamma_inv, population;
    std::optional<int> starts;
    bool sweep = false;
    // rt
    std::optional<std::string> rt_method, lockdown;
    std::optional<int> steps, burn_in, periods, members, window;
    bool local_only = false;
    bool dump_samples = false;
};

RunConfig resolve(const Flags& f, Command command)
{
    RunConfig c = f.config ? load_config(*f.config) : RunConfig{};
    c.command = command;
    if (c.output.empty()) {
        const char* env = std::getenv("EPITK_OUTPUT_DIR");
        c.output = env && *env ? env : "epitk-out";
    }
    apply(f.output, c.output);
    apply(f.seed, c.seed);
    apply(f.data, c.data.cases);
    apply(f.districts, c.data.districts);
    apply(f.mobility, c.data.mobility);
    apply(f.populations, c.data.populations);

    if (f.cp_model) c.changepoint.models = *f.cp_model == "both" ? std::vector<std::string>{"constant", "linear"}
                                                                   : std::vector<std::string>{*f.cp_model};
    apply(f.cp_lambda, c.changepoint.lambda);
    if (f.cp_threshold) {
        if (*f.cp_threshold == "auto") {
            c.changepoint.threshold.reset();
        }
        else {
            try {
                c.changepoint.threshold = std::stod(*f.cp_threshold);
            }
            catch (const std::exception&) {
                throw ConfigError("changepoint.threshold", "expected a number or auto");
            }
        }
    }
    apply(f.cp_forecast, c.changepoint.forecast);
    apply(f.cp_level, c.changepoint.level);

    if (f.ct_detect) c.countts.detect = split_list(*f.ct_detect);
    apply(f.ct_level, c.countts.level);
    apply(f.ct_forecast, c.countts.forecast);
    apply(f.ct_forecast_level, c.countts.forecast_level);
    apply(f.ct_paths, c.countts.paths);
    apply(f.ct_holdout, c.countts.holdout);

    if (f.sim_params) load_simulate_params(*f.sim_params, c.simulate);
    apply(f.sim_model, c.simulate.model);
    apply(f.sim_horizon, c.simulate.horizon);
    apply(f.sim_reps, c.simulate.reps);
    if (f.sim_mean) c.simulate.mean = true;

    apply(f.gamma_inv, c.seirqpd.gamma_inv);
    apply(f.starts, c.seirqpd.starts);
    if (f.population) {
        c.seirqpd.population = *f.population;
        c.rt.population = *f.population;
    }
    if (f.sweep) c.seirqpd.sweep = {1, 2, 3, 4, 5, 6, 7};

    if (f.rt_method) c.rt.methods = split_list(*f.rt_method);
    if (f.lockdown) c.rt.lockdown = *f.lockdown;
    apply(f.steps, c.rt.steps);
    apply(f.burn_in, c.rt.burn_in);
    apply(f.periods, c.rt.periods);
    apply(f.members, c.rt.members);
    apply(f.window, c.rt.window);
    if (f.local_only) c.rt.local_only = true;
    if (f.dump_samples) c.rt.dump_samples = true;
    return c;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Epidemic time-series toolkit", "epitk"};
    app.require_subcommand(0, 1);
    app.fallthrough();
    Flags f;
    bool version = false;
    bool quiet = false;
    app.add_flag("--version", version, "Print the version and exit");
    app.add_option("--config", f.config, "TOML run configuration");
    app.add_option("--output,-o", f.output, "Output directory (default $EPITK_OUTPUT_DIR or epitk-out)");
    app.add_option("--seed", f.seed, "Top-level random seed");
    app.add_flag("--quiet,-q", quiet, "Do not print the JSON summary");

    const auto data_opt = [&](CLI::App* sub) { sub->add_option("--data", f.data, "Daily series CSV"); };
    const auto district_opts = [&](CLI::App* sub) {
        sub->add_option("--districts", f.districts, "Per-district daily cases CSV");
        sub->add_option("--mobility", f.mobility, "Mobility matrix CSV");
        sub->add_option("--populations", f.populations, "District populations CSV");
    };

    auto* cp = app.add_subcommand("changepoint", "Isolate-Detect change-points and forecasts");
    data_opt(cp);
    cp->add_option("--model", f.cp_model, "constant, linear or both")->check(CLI::IsMember({"constant", "linear", "both"}));
    cp->add_option("--lambda", f.cp_lambda, "Expansion step");
    cp->add_option("--threshold", f.cp_threshold, "auto or a number");
    cp->add_option("--forecast", f.cp_forecast, "Forecast horizon in days");
    cp->add_option("--level", f.cp_level, "Prediction interval level");

    auto* ct = app.add_subcommand("countts", "Log-linear Poisson autoregression with interventions");
    data_opt(ct);
    ct->add_option("--detect", f.ct_detect, "Comma-separated intervention kinds (ao,ts,ls)");
    ct->add_option("--level", f.ct_level, "Detection significance level");
    ct->add_option("--forecast", f.ct_forecast, "Forecast horizon in days");
    ct->add_option("--forecast-level", f.ct_forecast_level, "Simultaneous band level");
    ct->add_option("--paths", f.ct_paths, "Monte Carlo paths");
    ct->add_option("--holdout", f.ct_holdout, "Trailing days withheld from the fit");

    auto* sim = app.add_subcommand("simulate", "Simulate a compartmental model");
    sim->add_option("--model", f.sim_model, "seir1, meta2 or seirqpd3")->check(CLI::IsMember({"seir1", "meta2", "seirqpd3"}));
    sim->add_option("--params", f.sim_params, "TOML parameter file");
    sim->add_option("--horizon", f.sim_horizon, "Days to simulate");
    sim->add_option("--reps", f.sim_reps, "Replicates");
    sim->add_flag("--mean", f.sim_mean, "Deterministic-mean trajectories");
    district_opts(sim);

    auto* fit = app.add_subcommand("fit-seirqpd", "Fit the SEIR model with protection, quarantine and deaths");
    data_opt(fit);
    fit->add_option("--gamma-inv", f.gamma_inv, "Latent time in days");
    fit->add_flag("--sweep", f.sweep, "Refit for latent times 1..7");
    fit->add_option("--starts", f.starts, "Multi-start count");
    fit->add_option("--population", f.population, "Population size");

    auto* rt = app.add_subcommand("rt", "Effective reproduction number");
    data_opt(rt);
    district_opts(rt);
    rt->add_option("--method", f.rt_method, "mcmc1, eakf2, bettencourt, cori (comma-separated)");
    rt->add_flag("--local-only", f.local_only, "Use the local-transmission column");
    rt->add_flag("--dump-samples", f.dump_samples, "Include raw posterior samples");
    rt->add_option("--steps", f.steps, "MCMC steps per period");
    rt->add_option("--burn-in", f.burn_in, "MCMC burn-in");
    rt->add_option("--periods", f.periods, "Number of fortnights");
    rt->add_option("--members", f.members, "EAKF ensemble size");
    rt->add_option("--lockdown", f.lockdown, "Lockdown date for the EAKF beta redraw");
    rt->add_option("--window", f.window, "Window length in days");
    rt->add_option("--population", f.population, "Population size");

    auto* all = app.add_subcommand("report-all", "Run every analysis on one dataset");
    data_opt(all);
    district_opts(all);

    try {
        app.parse(argc, argv);
    }
    catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    }
    catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitValidation;
    }
    if (version) {
        out << "epitk " << EPITK_VERSION << " (report format " << kReportFormat << ")\n";
        return kExitOk;
    }

    try {
        std::optional<Command> command;
        for (const auto* sub : app.get_subcommands()) command = parse_command(sub->get_name());
        if (!command) {
            if (!f.config) {
                err << app.help();
                return kExitValidation;
            }
            command = load_config(*f.config).command;
        }
        const auto config = resolve(f, *command);
        const auto bundle = run(config);
        write_bundle(bundle, config.output);
        if (!quiet) out << bundle.summary.dump(2) << '\n';
        for (const auto& d : bundle.diagnostics) err << "warning: " << d << '\n';
        return bundle.partial_failure ? kExitEstimation : kExitOk;
    }
    catch (const EstimationError& e) {
        err << "error: " << e.what() << '\n';
        return kExitEstimation;
    }
    catch (const IntegrationError& e) {
        err << "error: " << e.what() << '\n';
        return kExitEstimation;
    }
    catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitValidation;
    }
    catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace epitk::cli
