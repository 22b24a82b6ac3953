#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace epitk {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ArgumentError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

/// Raised by numerical fitting when no acceptable optimum is reached.
/// Carries the best iterate found so callers can inspect or warm-start.
class EstimationError : public Error {
public:
    EstimationError(const std::string& what, std::vector<double> best = {}, double objective = 0.0)
        : Error(what), best_iterate(std::move(best)), best_objective(objective) {}
    std::vector<double> best_iterate;
    double best_objective;
};

class IntegrationError : public Error {
public:
    using Error::Error;
};

/// Base of all series-loading failures; each concrete cause has its own type.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line) : Error(what), line(line) {}
    std::size_t line;
};

class MissingColumnError : public ParseError {
public:
    using ParseError::ParseError;
};
class NonIntegerCountError : public ParseError {
public:
    using ParseError::ParseError;
};
class NegativeCountError : public ParseError {
public:
    using ParseError::ParseError;
};
class DateGapError : public ParseError {
public:
    using ParseError::ParseError;
};
class BadDateError : public ParseError {
public:
    using ParseError::ParseError;
};

// ---------------------------------------------------------------------------
// Calendar
// ---------------------------------------------------------------------------

/// Calendar date stored as days since 1970-01-01.
class Date {
public:
    constexpr Date() = default;
    constexpr explicit Date(std::int32_t epoch_day) : epoch_day_(epoch_day) {}

    static Date from_ymd(int year, unsigned month, unsigned day);
    /// Parses YYYY-MM-DD; throws ArgumentError on malformed input.
    static Date parse(std::string_view iso);

    [[nodiscard]] constexpr std::int32_t epoch_day() const { return epoch_day_; }
    [[nodiscard]] std::string iso() const;

    constexpr Date operator+(std::int32_t days) const { return Date{epoch_day_ + days}; }
    constexpr std::int32_t operator-(Date other) const { return epoch_day_ - other.epoch_day_; }
    constexpr auto operator<=>(const Date&) const = default;

private:
    std::int32_t epoch_day_ = 0;
};

// ---------------------------------------------------------------------------
// Incidence data
// ---------------------------------------------------------------------------

using Count = std::int64_t;

/// Dated daily counts. Index 0 of every vector is `start_date`; callers that
/// follow the 1-based day convention use `t - 1`.
class IncidenceSeries {
public:
    IncidenceSeries(Date start, std::vector<Count> cases,
                    std::optional<std::vector<Count>> recovered = std::nullopt,
                    std::optional<std::vector<Count>> deaths = std::nullopt, std::string label = {});

    [[nodiscard]] Date start_date() const { return start_; }
    [[nodiscard]] Date date_at(std::size_t index) const { return start_ + static_cast<std::int32_t>(index); }
    [[nodiscard]] std::size_t size() const { return cases_.size(); }
    [[nodiscard]] const std::vector<Count>& cases() const { return cases_; }
    [[nodiscard]] const std::optional<std::vector<Count>>& recovered() const { return recovered_; }
    [[nodiscard]] const std::optional<std::vector<Count>>& deaths() const { return deaths_; }
    [[nodiscard]] const std::string& label() const { return label_; }

    [[nodiscard]] std::vector<double> cases_as_double() const;
    /// Index of `d` in the series; throws ArgumentError when outside.
    [[nodiscard]] std::size_t index_of(Date d) const;
    /// Days [first, last] inclusive, re-dated.
    [[nodiscard]] IncidenceSeries slice(std::size_t first, std::size_t last) const;
    [[nodiscard]] IncidenceSeries slice(Date first, Date last) const;

private:
    Date start_;
    std::vector<Count> cases_;
    std::optional<std::vector<Count>> recovered_;
    std::optional<std::vector<Count>> deaths_;
    std::string label_;
};

/// Column names to read from a CSV file. Empty optional columns are skipped.
struct SeriesSchema {
    std::string date = "date";
    std::string cases = "cases";
    std::string recovered = "recovered";
    std::string deaths = "deaths";
};

IncidenceSeries load_series(const std::filesystem::path& path, const SeriesSchema& schema = {});
IncidenceSeries parse_series(std::string_view csv_text, const SeriesSchema& schema = {},
                             std::string label = {});
void save_series(const std::filesystem::path& path, const IncidenceSeries& series);
std::string format_series(const IncidenceSeries& series);

/// Reads every integer column other than `date` as its own series (e.g. one
/// column per district). Column order is preserved.
std::vector<IncidenceSeries> load_multi_series(const std::filesystem::path& path,
                                               std::span<const std::string> columns);

// ---------------------------------------------------------------------------
// Forecast intervals
// ---------------------------------------------------------------------------

struct PredictionInterval {
    int horizon_day = 1;
    double point = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    double level = 0.95;
};

// ---------------------------------------------------------------------------
// Randomness
// ---------------------------------------------------------------------------

struct RngSeed {
    std::uint64_t value = 0;
};

/// Mixes a parent seed with a stream key (splitmix64 finaliser). Used to build
/// the seed tree command -> module -> replicate.
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t key);

/// Seeded random stream. Distributions come from Boost.Random, whose
/// algorithms are fixed across platforms, so a seed reproduces bit-identical
/// draws everywhere.
class Rng {
public:
    explicit Rng(RngSeed seed) : engine_(seed.value) {}
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Poisson draw; a non-positive mean returns 0 without consuming state.
    Count poisson(double mean);
    double gamma(double shape, double scale);
    double beta(double a, double b);
    double uniform(double lo, double hi);
    int uniform_int(int lo, int hi);
    double normal(double mean, double sd);
    double exponential(double rate);

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

// ---------------------------------------------------------------------------
// Error metrics and small numerics
// ---------------------------------------------------------------------------

/// sqrt(sum (pred - obs)^2 / sum obs^2).
double relative_error(std::span<const double> pred, std::span<const double> obs);

double median(std::vector<double> values);
/// Type-7 (linear interpolation) sample quantile.
double quantile(std::vector<double> values, double p);
double mean(std::span<const double> values);
double variance(std::span<const double> values);

/// Five-district mobility matrix with names; entry (i, j) is the daily number
/// of people moving from district i to district j.
struct MobilityMatrix {
    std::vector<std::string> names;
    std::vector<double> flows;  // row-major n x n
    [[nodiscard]] std::size_t size() const { return names.size(); }
    [[nodiscard]] double at(std::size_t from, std::size_t to) const { return flows[from * names.size() + to]; }
};

MobilityMatrix load_mobility(const std::filesystem::path& path);
MobilityMatrix parse_mobility(std::string_view csv_text);

struct DistrictPopulations {
    std::vector<std::string> names;
    std::vector<double> population;
};

DistrictPopulations load_populations(const std::filesystem::path& path);

}  // namespace epitk
