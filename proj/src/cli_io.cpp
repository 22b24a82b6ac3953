#include "epitk/cli_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <openssl/evp.h>

#define TOML_EXCEPTIONS 1
#include <tomlplusplus/toml.hpp>

namespace epitk::cli {

Command parse_command(std::string_view name)
{
    if (name == "changepoint") return Command::Changepoint;
    if (name == "countts") return Command::Countts;
    if (name == "simulate") return Command::Simulate;
    if (name == "fit-seirqpd") return Command::FitSeirqpd;
    if (name == "rt") return Command::Rt;
    if (name == "report-all") return Command::ReportAll;
    throw ConfigError("command", "unknown command '" + std::string(name) + "'");
}

std::string_view to_string(Command command)
{
    switch (command) {
    case Command::Changepoint: return "changepoint";
    case Command::Countts: return "countts";
    case Command::Simulate: return "simulate";
    case Command::FitSeirqpd: return "fit-seirqpd";
    case Command::Rt: return "rt";
    case Command::ReportAll: return "report-all";
    }
    return "report-all";
}

std::string format_number(double value)
{
    if (std::isnan(value)) return {};
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

std::string sha256_hex(std::string_view data)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("sha256 failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xF];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Configuration

namespace {

class Reader {
public:
    Reader(const toml::table& table, std::string prefix) : table_(table), prefix_(std::move(prefix)) {}

    void allow(std::initializer_list<std::string_view> keys) const
    {
        for (const auto& [k, v] : table_) {
            if (std::find(keys.begin(), keys.end(), k.str()) == keys.end()) {
                throw ConfigError(field(k.str()), "unknown key");
            }
        }
    }

    void get(std::string_view key, std::string& out) const
    {
        if (const auto* n = table_.get(key)) {
            auto v = n->value_exact<std::string>();
            if (!v) throw ConfigError(field(key), "expected a string");
            out = *v;
        }
    }
    void get(std::string_view key, double& out) const
    {
        if (const auto* n = table_.get(key)) {
            if (!n->is_number()) throw ConfigError(field(key), "expected a number");
            out = *n->value<double>();
        }
    }
    void get(std::string_view key, int& out) const
    {
        if (const auto* n = table_.get(key)) {
            auto v = n->value_exact<std::int64_t>();
            if (!v) throw ConfigError(field(key), "expected an integer");
            if (*v < std::numeric_limits<int>::min() || *v > std::numeric_limits<int>::max()) {
                throw ConfigError(field(key), "out of range");
            }
            out = static_cast<int>(*v);
        }
    }
    void get(std::string_view key, bool& out) const
    {
        if (const auto* n = table_.get(key)) {
            auto v = n->value_exact<bool>();
            if (!v) throw ConfigError(field(key), "expected true or false");
            out = *v;
        }
    }
    void get(std::string_view key, std::vector<std::string>& out) const
    {
        if (const auto* n = table_.get(key)) {
            const auto* arr = n->as_array();
            if (!arr) throw ConfigError(field(key), "expected an array of strings");
            out.clear();
            for (const auto& e : *arr) {
                auto v = e.value_exact<std::string>();
                if (!v) throw ConfigError(field(key), "expected an array of strings");
                out.push_back(*v);
            }
        }
    }
    void get(std::string_view key, std::vector<double>& out) const
    {
        if (const auto* n = table_.get(key)) {
            const auto* arr = n->as_array();
            if (!arr) throw ConfigError(field(key), "expected an array of numbers");
            out.clear();
            for (const auto& e : *arr) {
                if (!e.is_number()) throw ConfigError(field(key), "expected an array of numbers");
                out.push_back(*e.value<double>());
            }
        }
    }
    void get(std::string_view key, std::optional<std::string>& out) const
    {
        if (table_.contains(key)) {
            std::string s;
            get(key, s);
            out = s;
        }
    }

    [[nodiscard]] std::string field(std::string_view key) const
    {
        return prefix_.empty() ? std::string(key) : prefix_ + "." + std::string(key);
    }

private:
    const toml::table& table_;
    std::string prefix_;
};

const toml::table& section(const toml::table& root, std::string_view name)
{
    static const toml::table empty;
    const auto* n = root.get(name);
    if (!n) return empty;
    const auto* t = n->as_table();
    if (!t) throw ConfigError(std::string(name), "expected a table");
    return *t;
}

void read_simulate(const toml::table& t, const std::string& prefix, SimulateSection& s)
{
    const Reader r(t, prefix);
    r.allow({"model", "horizon", "reps", "mean", "beta", "mu", "Z", "D", "alpha", "tau_d", "delay_shape", "theta",
             "zeta", "gamma_inv", "delta_inv", "lambda", "kappa", "population", "E0", "Ir0", "Iu0", "I0", "Q0"});
    r.get("model", s.model);
    r.get("horizon", s.horizon);
    r.get("reps", s.reps);
    r.get("mean", s.mean);
    r.get("beta", s.beta);
    r.get("mu", s.mu);
    r.get("Z", s.Z);
    r.get("D", s.D);
    r.get("alpha", s.alpha);
    r.get("tau_d", s.tau_d);
    r.get("delay_shape", s.delay_shape);
    r.get("theta", s.theta);
    r.get("zeta", s.zeta);
    r.get("gamma_inv", s.gamma_inv);
    r.get("delta_inv", s.delta_inv);
    r.get("lambda", s.lambda);
    r.get("kappa", s.kappa);
    r.get("population", s.population);
    r.get("E0", s.E0);
    r.get("Ir0", s.Ir0);
    r.get("Iu0", s.Iu0);
    r.get("I0", s.I0);
    r.get("Q0", s.Q0);
}

RunConfig from_table(const toml::table& root)
{
    RunConfig c;
    const Reader top(root, "");
    top.allow({"command", "seed", "output", "data", "changepoint", "countts", "simulate", "seirqpd", "rt"});
    std::string command(to_string(c.command));
    top.get("command", command);
    c.command = parse_command(command);
    if (const auto* n = root.get("seed")) {
        auto v = n->value_exact<std::int64_t>();
        if (!v || *v < 0) throw ConfigError("seed", "expected a non-negative integer");
        c.seed = static_cast<std::uint64_t>(*v);
    }
    top.get("output", c.output);

    {
        const Reader r(section(root, "data"), "data");
        r.allow({"cases", "districts", "mobility", "populations", "cases_column", "local_column"});
        r.get("cases", c.data.cases);
        r.get("districts", c.data.districts);
        r.get("mobility", c.data.mobility);
        r.get("populations", c.data.populations);
        r.get("cases_column", c.data.cases_column);
        r.get("local_column", c.data.local_column);
    }
    {
        const auto& t = section(root, "changepoint");
        const Reader r(t, "changepoint");
        r.allow({"models", "lambda", "threshold", "forecast", "level"});
        r.get("models", c.changepoint.models);
        r.get("lambda", c.changepoint.lambda);
        if (const auto* n = t.get("threshold")) {
            if (n->is_number()) c.changepoint.threshold = *n->value<double>();
            else if (n->value_exact<std::string>() != "auto") throw ConfigError("changepoint.threshold", "expected a number or \"auto\"");
        }
        r.get("forecast", c.changepoint.forecast);
        r.get("level", c.changepoint.level);
    }
    {
        const Reader r(section(root, "countts"), "countts");
        r.allow({"detect", "level", "forecast", "forecast_level", "paths", "holdout"});
        r.get("detect", c.countts.detect);
        r.get("level", c.countts.level);
        r.get("forecast", c.countts.forecast);
        r.get("forecast_level", c.countts.forecast_level);
        r.get("paths", c.countts.paths);
        r.get("holdout", c.countts.holdout);
    }
    read_simulate(section(root, "simulate"), "simulate", c.simulate);
    {
        const Reader r(section(root, "seirqpd"), "seirqpd");
        r.allow({"gamma_inv", "sweep", "starts", "population"});
        r.get("gamma_inv", c.seirqpd.gamma_inv);
        r.get("sweep", c.seirqpd.sweep);
        r.get("starts", c.seirqpd.starts);
        r.get("population", c.seirqpd.population);
    }
    {
        const Reader r(section(root, "rt"), "rt");
        r.allow({"methods", "steps", "burn_in", "periods", "local_only", "dump_samples", "members", "lockdown",
                 "window", "D", "population"});
        r.get("methods", c.rt.methods);
        r.get("steps", c.rt.steps);
        r.get("burn_in", c.rt.burn_in);
        r.get("periods", c.rt.periods);
        r.get("local_only", c.rt.local_only);
        r.get("dump_samples", c.rt.dump_samples);
        r.get("members", c.rt.members);
        r.get("lockdown", c.rt.lockdown);
        r.get("window", c.rt.window);
        r.get("D", c.rt.D);
        r.get("population", c.rt.population);
    }
    return c;
}

toml::table parse_toml(std::string_view text)
{
    try {
        return toml::parse(text);
    }
    catch (const toml::parse_error& e) {
        std::ostringstream msg;
        msg << "line " << e.source().begin.line << ": " << e.description();
        throw ConfigError("config", msg.str());
    }
}

std::string quote(std::string_view s)
{
    std::string out = "\"";
    for (char ch : s) {
        switch (ch) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\t': out += "\\t"; break;
        default: out += ch;
        }
    }
    return out + "\"";
}

std::string toml_number(double v)
{
    auto s = format_number(v);
    if (s.find_first_of(".en") == std::string::npos) s += ".0";
    return s;
}

template <class T, class F>
std::string toml_array(const std::vector<T>& values, F&& fmt)
{
    std::string out = "[";
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ", ";
        out += fmt(values[i]);
    }
    return out + "]";
}

}  // namespace

RunConfig parse_config(std::string_view toml_text)
{
    return from_table(parse_toml(toml_text));
}

RunConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config", "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string to_toml(const RunConfig& c)
{
    const auto qs = [](const std::string& s) { return quote(s); };
    std::ostringstream o;
    o << "command = " << quote(to_string(c.command)) << '\n';
    o << "seed = " << c.seed << '\n';
    o << "output = " << quote(c.output) << "\n\n";

    o << "[data]\n";
    o << "cases = " << quote(c.data.cases) << '\n';
    o << "districts = " << quote(c.data.districts) << '\n';
    o << "mobility = " << quote(c.data.mobility) << '\n';
    o << "populations = " << quote(c.data.populations) << '\n';
    o << "cases_column = " << quote(c.data.cases_column) << '\n';
    o << "local_column = " << quote(c.data.local_column) << "\n\n";

    o << "[changepoint]\n";
    o << "models = " << toml_array(c.changepoint.models, qs) << '\n';
    o << "lambda = " << c.changepoint.lambda << '\n';
    o << "threshold = " << (c.changepoint.threshold ? toml_number(*c.changepoint.threshold) : quote("auto")) << '\n';
    o << "forecast = " << c.changepoint.forecast << '\n';
    o << "level = " << toml_number(c.changepoint.level) << "\n\n";

    o << "[countts]\n";
    o << "detect = " << toml_array(c.countts.detect, qs) << '\n';
    o << "level = " << toml_number(c.countts.level) << '\n';
    o << "forecast = " << c.countts.forecast << '\n';
    o << "forecast_level = " << toml_number(c.countts.forecast_level) << '\n';
    o << "paths = " << c.countts.paths << '\n';
    o << "holdout = " << c.countts.holdout << "\n\n";

    const auto& s = c.simulate;
    o << "[simulate]\n";
    o << "model = " << quote(s.model) << '\n';
    o << "horizon = " << s.horizon << '\n';
    o << "reps = " << s.reps << '\n';
    o << "mean = " << (s.mean ? "true" : "false") << '\n';
    const std::pair<const char*, double> sim_numbers[] = {
        {"beta", s.beta},   {"mu", s.mu},       {"Z", s.Z},           {"D", s.D},
        {"alpha", s.alpha}, {"tau_d", s.tau_d}, {"delay_shape", s.delay_shape}, {"theta", s.theta},
        {"zeta", s.zeta},   {"gamma_inv", s.gamma_inv}, {"delta_inv", s.delta_inv}, {"kappa", s.kappa},
        {"population", s.population}, {"E0", s.E0}, {"Ir0", s.Ir0}, {"Iu0", s.Iu0}, {"I0", s.I0}, {"Q0", s.Q0}};
    for (const auto& [k, v] : sim_numbers) o << k << " = " << toml_number(v) << '\n';
    o << "lambda = " << toml_array(s.lambda, toml_number) << "\n\n";

    o << "[seirqpd]\n";
    o << "gamma_inv = " << toml_number(c.seirqpd.gamma_inv) << '\n';
    o << "sweep = " << toml_array(c.seirqpd.sweep, toml_number) << '\n';
    o << "starts = " << c.seirqpd.starts << '\n';
    o << "population = " << toml_number(c.seirqpd.population) << "\n\n";

    o << "[rt]\n";
    o << "methods = " << toml_array(c.rt.methods, qs) << '\n';
    o << "steps = " << c.rt.steps << '\n';
    o << "burn_in = " << c.rt.burn_in << '\n';
    o << "periods = " << c.rt.periods << '\n';
    o << "local_only = " << (c.rt.local_only ? "true" : "false") << '\n';
    o << "dump_samples = " << (c.rt.dump_samples ? "true" : "false") << '\n';
    o << "members = " << c.rt.members << '\n';
    if (c.rt.lockdown) o << "lockdown = " << quote(*c.rt.lockdown) << '\n';
    o << "window = " << c.rt.window << '\n';
    o << "D = " << toml_number(c.rt.D) << '\n';
    o << "population = " << toml_number(c.rt.population) << '\n';
    return o.str();
}

void validate(const RunConfig& c)
{
    const auto require = [](bool ok, const char* field, const std::string& msg) {
        if (!ok) throw ConfigError(field, msg);
    };
    const auto probability = [](double v) { return v > 0.0 && v < 1.0; };
    require(c.seed <= static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()), "seed",
            "must be below 2^63");

    for (const auto& m : c.changepoint.models) {
        require(m == "constant" || m == "linear", "changepoint.models", "unknown model '" + m + "'");
    }
    require(c.changepoint.lambda >= 1, "changepoint.lambda", "must be >= 1");
    require(!c.changepoint.threshold || *c.changepoint.threshold > 0.0, "changepoint.threshold", "must be positive");
    require(c.changepoint.forecast >= 0, "changepoint.forecast", "must be >= 0");
    require(probability(c.changepoint.level), "changepoint.level", "must lie in (0, 1)");

    for (const auto& k : c.countts.detect) {
        require(k == "ao" || k == "ts" || k == "ls" || k == "AO" || k == "TS" || k == "LS", "countts.detect",
                "unknown intervention kind '" + k + "'");
    }
    require(probability(c.countts.level), "countts.level", "must lie in (0, 1)");
    require(c.countts.forecast >= 0, "countts.forecast", "must be >= 0");
    require(probability(c.countts.forecast_level), "countts.forecast_level", "must lie in (0, 1)");
    require(c.countts.paths >= 1000, "countts.paths", "must be >= 1000");
    require(c.countts.holdout >= 0, "countts.holdout", "must be >= 0");

    const auto& s = c.simulate;
    require(s.model == "seir1" || s.model == "meta2" || s.model == "seirqpd3", "simulate.model",
            "expected seir1, meta2 or seirqpd3");
    require(s.horizon >= 1, "simulate.horizon", "must be >= 1");
    require(s.reps >= 1, "simulate.reps", "must be >= 1");
    require(s.beta >= 0.0, "simulate.beta", "must be >= 0");
    require(s.mu > 0.0 && s.mu <= 1.0, "simulate.mu", "must lie in (0, 1]");
    require(s.Z > 0.0, "simulate.Z", "must be positive");
    require(s.D > 0.0, "simulate.D", "must be positive");
    require(s.alpha > 0.0 && s.alpha <= 1.0, "simulate.alpha", "must lie in (0, 1]");
    require(s.tau_d > 0.0, "simulate.tau_d", "must be positive");
    require(s.delay_shape > 0.0, "simulate.delay_shape", "must be positive");
    require(s.theta >= 1.0, "simulate.theta", "must be >= 1");
    require(s.zeta >= 0.0, "simulate.zeta", "must be >= 0");
    require(s.gamma_inv > 0.0, "simulate.gamma_inv", "must be positive");
    require(s.delta_inv > 0.0, "simulate.delta_inv", "must be positive");
    require(s.lambda.size() == 3 && std::all_of(s.lambda.begin(), s.lambda.end(), [](double v) { return v >= 0.0; }),
            "simulate.lambda", "expected three non-negative numbers");
    require(s.kappa >= 0.0, "simulate.kappa", "must be >= 0");
    require(s.population > 0.0, "simulate.population", "must be positive");
    for (const auto& [name, v] : {std::pair{"simulate.E0", s.E0}, std::pair{"simulate.Ir0", s.Ir0},
                                  std::pair{"simulate.Iu0", s.Iu0}, std::pair{"simulate.I0", s.I0},
                                  std::pair{"simulate.Q0", s.Q0}}) {
        require(v >= 0.0, name, "must be >= 0");
    }
    require(s.E0 + s.Ir0 + s.Iu0 <= s.population && s.E0 + s.I0 + s.Q0 <= s.population, "simulate.population",
            "initial compartments exceed the population");

    require(c.seirqpd.gamma_inv > 0.0, "seirqpd.gamma_inv", "must be positive");
    for (double g : c.seirqpd.sweep) require(g > 0.0, "seirqpd.sweep", "latent times must be positive");
    require(c.seirqpd.starts >= 1, "seirqpd.starts", "must be >= 1");
    require(c.seirqpd.population > 0.0, "seirqpd.population", "must be positive");

    for (const auto& m : c.rt.methods) {
        require(m == "mcmc1" || m == "eakf2" || m == "bettencourt" || m == "cori", "rt.methods",
                "unknown method '" + m + "'");
    }
    require(c.rt.steps >= 1, "rt.steps", "must be >= 1");
    require(c.rt.burn_in >= 0 && c.rt.burn_in < c.rt.steps, "rt.burn_in", "must lie in [0, steps)");
    require(c.rt.periods >= 1, "rt.periods", "must be >= 1");
    require(c.rt.members >= 100, "rt.members", "must be >= 100");
    if (c.rt.lockdown) {
        try {
            (void)Date::parse(*c.rt.lockdown);
        }
        catch (const Error&) {
            throw ConfigError("rt.lockdown", "expected an ISO date");
        }
    }
    require(c.rt.window >= 1, "rt.window", "must be >= 1");
    require(c.rt.D > 0.0, "rt.D", "must be positive");
    require(c.rt.population > 0.0, "rt.population", "must be positive");
}

// ---------------------------------------------------------------------------
// Bundles

std::vector<OutputFile> emit_plot_data(const ReportBundle& bundle)
{
    std::vector<OutputFile> out;
    for (const auto& table : bundle.tables) {
        std::string csv = "x,series,y,lower,upper\n";
        for (const auto& r : table.rows) {
            csv += r.x + ',' + r.series + ',' + format_number(r.y) + ',' + format_number(r.lower) + ',' +
                   format_number(r.upper) + '\n';
        }
        out.push_back({table.name + ".csv", std::move(csv)});
    }
    return out;
}

namespace {

std::vector<OutputFile> bundle_files(const ReportBundle& bundle)
{
    auto files = emit_plot_data(bundle);
    files.insert(files.end(), bundle.extra.begin(), bundle.extra.end());
    files.push_back({"summary.json", bundle.summary.dump(2) + "\n"});
    return files;
}

nlohmann::ordered_json manifest_json(const Manifest& m)
{
    nlohmann::ordered_json j;
    j["command"] = m.command;
    j["version"] = m.version;
    j["seed"] = m.seed;
    j["config_hash"] = m.config_hash;
    j["files"] = nlohmann::ordered_json::array();
    for (const auto& f : m.files) j["files"].push_back({{"name", f.name}, {"sha256", f.sha256}});
    j["bundle_hash"] = m.bundle_hash;
    return j;
}

}  // namespace

void finalize_manifest(ReportBundle& bundle, const RunConfig& config)
{
    auto hashed = config;
    hashed.output.clear();
    auto& m = bundle.manifest;
    m.command = std::string(to_string(config.command));
    m.version = EPITK_VERSION;
    m.seed = config.seed;
    m.config_hash = sha256_hex(to_toml(hashed));
    m.files.clear();
    std::string all = m.config_hash + "\n";
    for (const auto& f : bundle_files(bundle)) {
        m.files.push_back({f.name, sha256_hex(f.content)});
        all += f.name + " " + m.files.back().sha256 + "\n";
    }
    m.bundle_hash = sha256_hex(all);
}

void write_bundle(const ReportBundle& bundle, const std::filesystem::path& directory)
{
    std::filesystem::create_directories(directory);
    auto files = bundle_files(bundle);
    files.push_back({"manifest.json", manifest_json(bundle.manifest).dump(2) + "\n"});
    for (const auto& f : files) {
        std::ofstream out(directory / f.name, std::ios::binary);
        if (!out) throw Error("cannot write " + (directory / f.name).string());
        out << f.content;
    }
}

}  // namespace epitk::cli
