#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "epitk/cli_io.hpp"

using namespace epitk;
using namespace epitk::cli;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = fs::path(EPITK_SOURCE_DIR) / "data" / "fixtures";

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name)
{
    const auto dir = fs::temp_directory_path() / ("epitk_cli_test_" + name);
    fs::remove_all(dir);
    return dir;
}

struct CliRun {
    int code;
    std::string out;
    std::string err;
};

CliRun invoke(std::vector<std::string> args)
{
    args.insert(args.begin(), "epitk");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

RunConfig fixture_config(Command command)
{
    RunConfig c;
    c.command = command;
    c.data.cases = (kFixtures / "synthetic_outbreak.csv").string();
    c.data.districts = (kFixtures / "synthetic_districts.csv").string();
    c.data.mobility = (kFixtures / "mobility.csv").string();
    c.data.populations = (kFixtures / "districts.csv").string();
    c.countts.paths = 2000;
    c.rt.steps = 400;
    c.rt.burn_in = 100;
    c.rt.members = 100;
    return c;
}

std::vector<std::string> series_of(const PlotTable& t)
{
    std::vector<std::string> out;
    for (const auto& r : t.rows) {
        if (std::find(out.begin(), out.end(), r.series) == out.end()) out.push_back(r.series);
    }
    return out;
}

}  // namespace

TEST_CASE("config round trip")
{
    RunConfig c;
    CHECK(parse_config(to_toml(c)) == c);

    c.command = Command::Rt;
    c.seed = 99;
    c.output = "out dir/\"quoted\"";
    c.changepoint.threshold = 3.25;
    c.changepoint.models = {"linear"};
    c.countts.detect = {"ao", "ls"};
    c.simulate.lambda = {0.1, 0.2, 1e-7};
    c.simulate.beta = 1.0 / 3.0;
    c.seirqpd.sweep = {1, 2, 3.5};
    c.rt.lockdown = "2020-03-24";
    c.rt.methods = {"cori", "bettencourt"};
    const auto text = to_toml(c);
    CHECK(parse_config(text) == c);
    CHECK(to_toml(parse_config(text)) == text);

    const auto partial = parse_config("command = \"countts\"\n[countts]\nforecast = 3\n");
    CHECK(partial.command == Command::Countts);
    CHECK(partial.countts.forecast == 3);
    CHECK(partial.countts.paths == 10000);
    CHECK(parse_config("[simulate]\nbeta = 2\n").simulate.beta == 2.0);
}

TEST_CASE("config errors name the field")
{
    const auto field_of = [](const std::string& text) {
        try {
            validate(parse_config(text));
        }
        catch (const ConfigError& e) {
            return e.field();
        }
        return std::string("<none>");
    };
    CHECK(field_of("[changepoint]\nlambda = 0\n") == "changepoint.lambda");
    CHECK(field_of("[changepoint]\nlambda = \"ten\"\n") == "changepoint.lambda");
    CHECK(field_of("[countts]\nbogus = 1\n") == "countts.bogus");
    CHECK(field_of("[countts]\npaths = 10\n") == "countts.paths");
    CHECK(field_of("[rt]\nburn_in = 20000\n") == "rt.burn_in");
    CHECK(field_of("[rt]\nlockdown = \"24/03/2020\"\n") == "rt.lockdown");
    CHECK(field_of("[rt]\nmethods = [\"wallinga\"]\n") == "rt.methods");
    CHECK(field_of("[simulate]\nalpha = 1.5\n") == "simulate.alpha");
    CHECK(field_of("[simulate]\nlambda = [1, 2]\n") == "simulate.lambda");
    CHECK(field_of("command = \"plot\"\n") == "command");
    CHECK(field_of("seed = -1\n") == "seed");
    CHECK(field_of("[data\n") == "config");
    CHECK(field_of("") == "<none>");
}

TEST_CASE("plot data projection")
{
    ReportBundle b;
    b.tables.push_back({"demo", {{"2020-03-01", "observed", 3, std::nan(""), std::nan("")},
                                 {"2020-03-02", "forecast", 2.5, 0, 7}}});
    const auto files = emit_plot_data(b);
    REQUIRE(files.size() == 1);
    CHECK(files[0].name == "demo.csv");
    CHECK(files[0].content == "x,series,y,lower,upper\n2020-03-01,observed,3,,\n2020-03-02,forecast,2.5,0,7\n");
    CHECK(format_number(0.1) == "0.1");
    CHECK(format_number(1.0 / 3.0) == "0.3333333333333333");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("changepoint bundle")
{
    auto c = fixture_config(Command::Changepoint);
    const auto b = run(c);
    REQUIRE(b.tables.size() == 2);
    CHECK(b.tables[0].name == "changepoint_constant");
    CHECK(series_of(b.tables[1]) == std::vector<std::string>{"observed", "fitted", "forecast"});
    int forecast_rows = 0;
    for (const auto& r : b.tables[1].rows) {
        if (r.series != "forecast") continue;
        ++forecast_rows;
        CHECK(r.lower <= r.y);
        CHECK(r.y <= r.upper);
    }
    CHECK(forecast_rows == 7);
    CHECK(b.summary["changepoint"]["constant"].contains("jumps"));

    c.changepoint.forecast = 0;
    const auto no_fc = run(c);
    CHECK(series_of(no_fc.tables[0]) == std::vector<std::string>{"observed", "fitted"});
}

TEST_CASE("rt bundle projects period summaries")
{
    auto c = fixture_config(Command::Rt);
    c.rt.methods = {"mcmc1", "cori"};
    c.rt.periods = 3;
    const auto b = run(c);
    REQUIRE(b.tables.size() == 2);
    const auto& t = b.tables[0];
    CHECK(t.name == "rt_mcmc1");
    CHECK(series_of(t) == std::vector<std::string>{"R", "P(R<1)"});
    CHECK(t.rows.size() == 6);
    const auto& est = b.summary["rt"]["mcmc1"]["estimates"];
    REQUIRE(est.size() == 3);
    for (std::size_t k = 0; k < 3; ++k) {
        const auto& r = t.rows[2 * k];
        CHECK(r.x == est[k]["start"].get<std::string>());
        CHECK(r.y == est[k]["median"].get<double>());
        CHECK(r.lower == est[k]["lower"].get<double>());
        CHECK(r.upper == est[k]["upper"].get<double>());
        CHECK(t.rows[2 * k + 1].y == est[k]["prob_below_one"].get<double>());
    }
    CHECK_FALSE(est[0].contains("samples"));
    c.rt.dump_samples = true;
    c.rt.methods = {"mcmc1"};
    CHECK(run(c).summary["rt"]["mcmc1"]["estimates"][0]["samples"].size() == 300);
}

TEST_CASE("same config and seed reproduce the bundle byte for byte")
{
    auto c = fixture_config(Command::ReportAll);
    c.seirqpd.starts = 2;
    const auto d1 = scratch("det1");
    const auto d2 = scratch("det2");
    const auto inputs_before = slurp(c.data.cases);
    const auto a = run(c);
    const auto b = run(c);
    CHECK(a.manifest.bundle_hash == b.manifest.bundle_hash);
    CHECK(a.manifest.config_hash == b.manifest.config_hash);
    write_bundle(a, d1);
    write_bundle(b, d2);
    CHECK(slurp(c.data.cases) == inputs_before);

    for (const auto& entry : a.manifest.files) {
        const auto content = slurp(d1 / entry.name);
        CHECK(content == slurp(d2 / entry.name));
        CHECK(sha256_hex(content) == entry.sha256);
    }
    CHECK(slurp(d1 / "manifest.json") == slurp(d2 / "manifest.json"));
    // report-all carries change-point, count, model-3 and all four Rt outputs.
    const auto& s = a.summary;
    CHECK(s.contains("changepoint"));
    CHECK(s.contains("countts"));
    CHECK(s.contains("fit_seirqpd"));
    for (const char* m : {"mcmc1", "eakf2", "bettencourt", "cori"}) CHECK(s["rt"].contains(m));
    CHECK_FALSE(a.partial_failure);

    c.seed += 1;
    CHECK(run(c).manifest.bundle_hash != a.manifest.bundle_hash);
}

TEST_CASE("command line")
{
    SUBCASE("version")
    {
        const auto r = invoke({"--version"});
        CHECK(r.code == 0);
        CHECK(r.out.rfind("epitk ", 0) == 0);
    }
    SUBCASE("empty input is a validation error and writes nothing")
    {
        const auto dir = scratch("empty");
        const auto empty = fs::temp_directory_path() / "epitk_cli_empty.csv";
        std::ofstream(empty).close();
        const auto r = invoke({"-o", dir.string(), "changepoint", "--data", empty.string()});
        CHECK(r.code == kExitValidation);
        CHECK_FALSE(fs::exists(dir));
    }
    SUBCASE("flags override the config file")
    {
        const auto cfg = fs::temp_directory_path() / "epitk_cli_override.toml";
        std::ofstream(cfg) << "command = \"changepoint\"\n[data]\ncases = \""
                           << (kFixtures / "synthetic_outbreak.csv").string() << "\"\n[changepoint]\nlambda = 0\n";
        const auto dir = scratch("override");
        auto r = invoke({"--config", cfg.string(), "-o", dir.string(), "-q", "changepoint"});
        CHECK(r.code == kExitValidation);
        CHECK(r.err.find("changepoint.lambda") != std::string::npos);
        r = invoke({"--config", cfg.string(), "-o", dir.string(), "-q", "changepoint", "--lambda", "10"});
        CHECK(r.code == kExitOk);
        CHECK(fs::exists(dir / "manifest.json"));
        // Without a subcommand the file's command is used.
        r = invoke({"--config", cfg.string(), "-q", "-o", dir.string()});
        CHECK(r.code == kExitValidation);
    }
    SUBCASE("integration failure exits with 3")
    {
        const auto mob = fs::temp_directory_path() / "epitk_cli_mob.csv";
        const auto pop = fs::temp_directory_path() / "epitk_cli_pop.csv";
        std::ofstream(mob) << "district,A,B\nA,0,500\nB,0,0\n";
        std::ofstream(pop) << "district,population\nA,100\nB,1000\n";
        const auto r = invoke({"-q", "-o", scratch("fail").string(), "simulate", "--model", "meta2", "--mobility",
                            mob.string(), "--populations", pop.string(), "--horizon", "5"});
        CHECK(r.code == kExitEstimation);
    }
    SUBCASE("bad flag value")
    {
        CHECK(invoke({"changepoint", "--model", "cubic"}).code == kExitValidation);
        CHECK(invoke({"simulate", "--horizon", "0", "-o", scratch("h0").string()}).code == kExitValidation);
    }
    SUBCASE("simulate writes a long-format trajectory")
    {
        const auto dir = scratch("sim");
        const auto r = invoke({"-q", "-o", dir.string(), "--seed", "5", "simulate", "--model", "seir1", "--reps", "2",
                            "--horizon", "10"});
        REQUIRE(r.code == kExitOk);
        const auto traj = slurp(dir / "trajectory.csv");
        CHECK(traj.rfind("day,compartment,value,replicate\n", 0) == 0);
        CHECK(traj.find("\n10,S,") != std::string::npos);
        CHECK(traj.find(",1\n") != std::string::npos);
    }
}
