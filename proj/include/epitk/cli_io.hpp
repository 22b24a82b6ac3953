#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "epitk/core.hpp"

namespace epitk::cli {

enum class Command { Changepoint, Countts, Simulate, FitSeirqpd, Rt, ReportAll };

Command parse_command(std::string_view name);
std::string_view to_string(Command command);

/// Raised for invalid configuration; `field` is the dotted config key.
class ConfigError : public ArgumentError {
public:
    ConfigError(std::string field, const std::string& message)
        : ArgumentError(field + ": " + message), field_(std::move(field))
    {
    }
    [[nodiscard]] const std::string& field() const { return field_; }

private:
    std::string field_;
};

struct DataSection {
    std::string cases;        ///< national daily series (date, cases[, recovered, deaths])
    std::string districts;    ///< one cases column per district, named as in the mobility file
    std::string mobility;
    std::string populations;  ///< district,population
    std::string cases_column = "cases";
    std::string local_column = "local";
    bool operator==(const DataSection&) const = default;
};

struct ChangepointSection {
    std::vector<std::string> models{"constant", "linear"};
    int lambda = 10;
    std::optional<double> threshold;  ///< empty: automatic
    int forecast = 7;
    double level = 0.95;
    bool operator==(const ChangepointSection&) const = default;
};

struct CounttsSection {
    std::vector<std::string> detect{"ao"};
    double level = 0.05;
    int forecast = 7;
    double forecast_level = 0.95;
    int paths = 10000;
    int holdout = 0;  ///< trailing days withheld from the fit and compared with the forecast
    bool operator==(const CounttsSection&) const = default;
};

struct SimulateSection {
    std::string model = "seir1";  ///< seir1 | meta2 | seirqpd3
    int horizon = 60;
    int reps = 1;
    bool mean = false;  ///< deterministic-mean trajectories for seir1/meta2
    // Disease parameters (seir1, meta2).
    double beta = 1.0;
    double mu = 0.5;
    double Z = 5.1;
    double D = 3.5;
    double alpha = 0.5;
    double tau_d = 6.0;
    double delay_shape = 1.85;
    double theta = 1.0;
    // seirqpd3 parameters.
    double zeta = 0.04;
    double gamma_inv = 3.0;
    double delta_inv = 4.0;
    std::vector<double> lambda{0.08, 0.15, 35.0};
    double kappa = 0.002;
    // Initial state; seir1/seirqpd3 use `population`, meta2 applies E/Ir/Iu per district.
    double population = 875000.0;
    double E0 = 10.0;
    double Ir0 = 0.0;
    double Iu0 = 5.0;
    double I0 = 5.0;
    double Q0 = 0.0;
    bool operator==(const SimulateSection&) const = default;
};

struct SeirqpdSection {
    double gamma_inv = 3.0;
    std::vector<double> sweep;  ///< latent times for the sensitivity sweep
    int starts = 8;
    double population = 875000.0;
    bool operator==(const SeirqpdSection&) const = default;
};

struct RtSection {
    std::vector<std::string> methods{"mcmc1"};  ///< mcmc1 | eakf2 | bettencourt | cori
    int steps = 10000;
    int burn_in = 2000;
    int periods = 6;
    bool local_only = false;
    bool dump_samples = false;
    int members = 300;
    std::optional<std::string> lockdown;  ///< ISO date
    int window = 7;
    double D = 3.5;
    double population = 875000.0;
    bool operator==(const RtSection&) const = default;
};

struct RunConfig {
    Command command = Command::ReportAll;
    std::uint64_t seed = 20200304;
    std::string output;  ///< empty: $EPITK_OUTPUT_DIR, else "epitk-out"
    DataSection data;
    ChangepointSection changepoint;
    CounttsSection countts;
    SimulateSection simulate;
    SeirqpdSection seirqpd;
    RtSection rt;
    bool operator==(const RunConfig&) const = default;
};

RunConfig parse_config(std::string_view toml_text);
RunConfig load_config(const std::filesystem::path& path);
/// Complete TOML rendering; parse_config(to_toml(c)) == c.
std::string to_toml(const RunConfig& config);
/// Range checks; throws ConfigError naming the field.
void validate(const RunConfig& config);

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct PlotRow {
    std::string x;
    std::string series;
    double y = 0.0;
    double lower = 0.0;  ///< NaN when the row has no band
    double upper = 0.0;
};

/// One long-format table per figure analog: x, series, y, lower, upper.
struct PlotTable {
    std::string name;
    std::vector<PlotRow> rows;
};

struct OutputFile {
    std::string name;
    std::string content;
};

struct ManifestEntry {
    std::string name;
    std::string sha256;
};

struct Manifest {
    std::string command;
    std::string config_hash;
    std::string version;
    std::uint64_t seed = 0;
    std::vector<ManifestEntry> files;
    /// Hash over the config hash and every file hash.
    std::string bundle_hash;
};

struct ReportBundle {
    Manifest manifest;
    nlohmann::ordered_json summary;
    std::vector<PlotTable> tables;
    std::vector<OutputFile> extra;  ///< e.g. long-format trajectories
    std::vector<std::string> diagnostics;
    bool partial_failure = false;
};

/// Executes the configured command in memory; nothing is written.
ReportBundle run(const RunConfig& config);
/// Fills the manifest from the bundle contents; the output path is not hashed.
void finalize_manifest(ReportBundle& bundle, const RunConfig& config);
/// Tidy CSV per table.
std::vector<OutputFile> emit_plot_data(const ReportBundle& bundle);
/// Writes plot CSVs, extra files, summary.json and manifest.json.
void write_bundle(const ReportBundle& bundle, const std::filesystem::path& directory);

std::string sha256_hex(std::string_view data);

/// Shortest round-trip decimal; NaN becomes an empty field.
std::string format_number(double value);

/// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitEstimation = 3;

/// Full command-line entry point. Flags override values from `--config`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace epitk::cli
