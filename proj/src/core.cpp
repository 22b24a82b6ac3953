#include "epitk/core.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <boost/random/beta_distribution.hpp>
#include <boost/random/exponential_distribution.hpp>
#include <boost/random/gamma_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>

namespace epitk {

// ---------------------------------------------------------------------------
// Date

Date Date::from_ymd(int year, unsigned month, unsigned day)
{
    using namespace std::chrono;
    const year_month_day ymd{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}};
    if (!ymd.ok()) {
        throw ArgumentError("invalid calendar date");
    }
    return Date{static_cast<std::int32_t>(sys_days{ymd}.time_since_epoch().count())};
}

Date Date::parse(std::string_view iso)
{
    int y = 0;
    unsigned m = 0;
    unsigned d = 0;
    if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') {
        throw ArgumentError("malformed date '" + std::string(iso) + "', expected YYYY-MM-DD");
    }
    auto parse_part = [&](std::size_t off, std::size_t len, auto& out) {
        auto [ptr, ec] = std::from_chars(iso.data() + off, iso.data() + off + len, out);
        if (ec != std::errc{} || ptr != iso.data() + off + len) {
            throw ArgumentError("malformed date '" + std::string(iso) + "'");
        }
    };
    parse_part(0, 4, y);
    parse_part(5, 2, m);
    parse_part(8, 2, d);
    return from_ymd(y, m, d);
}

std::string Date::iso() const
{
    using namespace std::chrono;
    const year_month_day ymd{sys_days{days{epoch_day_}}};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

// ---------------------------------------------------------------------------
// IncidenceSeries

namespace {

void check_counts(const std::vector<Count>& v, const char* name)
{
    for (Count c : v) {
        if (c < 0) {
            throw ArgumentError(std::string("negative count in ") + name);
        }
    }
}

}  // namespace

IncidenceSeries::IncidenceSeries(Date start, std::vector<Count> cases, std::optional<std::vector<Count>> recovered,
                                 std::optional<std::vector<Count>> deaths, std::string label)
    : start_(start), cases_(std::move(cases)), recovered_(std::move(recovered)), deaths_(std::move(deaths)),
      label_(std::move(label))
{
    if (cases_.empty()) {
        throw ArgumentError("incidence series must contain at least one day");
    }
    check_counts(cases_, "cases");
    if (recovered_) {
        if (recovered_->size() != cases_.size()) {
            throw ArgumentError("recovered series length differs from cases");
        }
        check_counts(*recovered_, "recovered");
    }
    if (deaths_) {
        if (deaths_->size() != cases_.size()) {
            throw ArgumentError("deaths series length differs from cases");
        }
        check_counts(*deaths_, "deaths");
    }
}

std::vector<double> IncidenceSeries::cases_as_double() const
{
    return {cases_.begin(), cases_.end()};
}

std::size_t IncidenceSeries::index_of(Date d) const
{
    const auto off = d - start_;
    if (off < 0 || static_cast<std::size_t>(off) >= cases_.size()) {
        throw ArgumentError("date " + d.iso() + " outside series " + start_.iso() + ".." +
                            date_at(cases_.size() - 1).iso());
    }
    return static_cast<std::size_t>(off);
}

IncidenceSeries IncidenceSeries::slice(std::size_t first, std::size_t last) const
{
    if (first > last || last >= cases_.size()) {
        throw ArgumentError("invalid slice range");
    }
    auto cut = [&](const std::vector<Count>& v) {
        return std::vector<Count>(v.begin() + static_cast<std::ptrdiff_t>(first),
                                  v.begin() + static_cast<std::ptrdiff_t>(last) + 1);
    };
    std::optional<std::vector<Count>> rec;
    std::optional<std::vector<Count>> dea;
    if (recovered_) rec = cut(*recovered_);
    if (deaths_) dea = cut(*deaths_);
    return IncidenceSeries(date_at(first), cut(cases_), std::move(rec), std::move(dea), label_);
}

IncidenceSeries IncidenceSeries::slice(Date first, Date last) const
{
    return slice(index_of(first), index_of(last));
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r' || s.front() == '"')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"')) {
        s.remove_suffix(1);
    }
    return s;
}

std::vector<std::string_view> split_row(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        const auto next = line.find(',', pos);
        out.push_back(trim(line.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos)));
        if (next == std::string_view::npos) break;
        pos = next + 1;
    }
    return out;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;

    [[nodiscard]] std::optional<std::size_t> column(std::string_view name) const
    {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) return std::nullopt;
        return static_cast<std::size_t>(it - header.begin());
    }
};

CsvTable read_csv(std::string_view text)
{
    CsvTable table;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    bool have_header = false;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        const auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        ++line_no;
        pos = (nl == std::string_view::npos) ? text.size() + 1 : nl + 1;
        if (trim(line).empty() || trim(line).front() == '#') continue;
        auto cells = split_row(line);
        if (!have_header) {
            for (auto c : cells) table.header.emplace_back(c);
            have_header = true;
            continue;
        }
        table.rows.emplace_back(cells.begin(), cells.end());
        table.line_numbers.push_back(line_no);
    }
    return table;
}

std::string slurp(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ArgumentError("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Count parse_count(std::string_view cell, std::size_t line, const std::string& column)
{
    Count value = 0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc{} || ptr != cell.data() + cell.size() || cell.empty()) {
        // Accept "12.0" style integers written by spreadsheet tools.
        double d = 0.0;
        auto [p2, e2] = std::from_chars(cell.data(), cell.data() + cell.size(), d);
        if (e2 == std::errc{} && p2 == cell.data() + cell.size() && !cell.empty() && std::floor(d) == d &&
            std::isfinite(d)) {
            value = static_cast<Count>(d);
        }
        else {
            throw NonIntegerCountError("line " + std::to_string(line) + ": column '" + column +
                                           "' is not an integer count: '" + std::string(cell) + "'",
                                       line);
        }
    }
    if (value < 0) {
        throw NegativeCountError("line " + std::to_string(line) + ": column '" + column + "' has negative count",
                                 line);
    }
    return value;
}

std::vector<Date> parse_dates(const CsvTable& table, std::size_t date_col)
{
    std::vector<Date> dates;
    dates.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto line = table.line_numbers[r];
        if (date_col >= table.rows[r].size()) {
            throw MissingColumnError("line " + std::to_string(line) + ": row too short", line);
        }
        Date d;
        try {
            d = Date::parse(table.rows[r][date_col]);
        }
        catch (const ArgumentError& e) {
            throw BadDateError("line " + std::to_string(line) + ": " + e.what(), line);
        }
        if (!dates.empty() && d - dates.back() != 1) {
            throw DateGapError("line " + std::to_string(line) + ": date " + d.iso() + " does not follow " +
                                   dates.back().iso(),
                               line);
        }
        dates.push_back(d);
    }
    return dates;
}

std::vector<Count> read_count_column(const CsvTable& table, std::size_t col, const std::string& name)
{
    std::vector<Count> out;
    out.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto line = table.line_numbers[r];
        if (col >= table.rows[r].size()) {
            throw MissingColumnError("line " + std::to_string(line) + ": row too short", line);
        }
        out.push_back(parse_count(table.rows[r][col], line, name));
    }
    return out;
}

}  // namespace

IncidenceSeries parse_series(std::string_view csv_text, const SeriesSchema& schema, std::string label)
{
    const auto table = read_csv(csv_text);
    const auto date_col = table.column(schema.date);
    if (!date_col) throw MissingColumnError("missing column '" + schema.date + "'", 1);
    const auto cases_col = table.column(schema.cases);
    if (!cases_col) throw MissingColumnError("missing column '" + schema.cases + "'", 1);
    if (table.rows.empty()) throw ArgumentError("series file has no data rows");

    const auto dates = parse_dates(table, *date_col);
    auto cases = read_count_column(table, *cases_col, schema.cases);
    std::optional<std::vector<Count>> recovered;
    std::optional<std::vector<Count>> deaths;
    if (!schema.recovered.empty()) {
        if (auto c = table.column(schema.recovered)) recovered = read_count_column(table, *c, schema.recovered);
    }
    if (!schema.deaths.empty()) {
        if (auto c = table.column(schema.deaths)) deaths = read_count_column(table, *c, schema.deaths);
    }
    return IncidenceSeries(dates.front(), std::move(cases), std::move(recovered), std::move(deaths),
                           std::move(label));
}

IncidenceSeries load_series(const std::filesystem::path& path, const SeriesSchema& schema)
{
    return parse_series(slurp(path), schema, path.stem().string());
}

std::string format_series(const IncidenceSeries& series)
{
    std::ostringstream out;
    out << "date,cases";
    if (series.recovered()) out << ",recovered";
    if (series.deaths()) out << ",deaths";
    out << '\n';
    for (std::size_t i = 0; i < series.size(); ++i) {
        out << series.date_at(i).iso() << ',' << series.cases()[i];
        if (series.recovered()) out << ',' << (*series.recovered())[i];
        if (series.deaths()) out << ',' << (*series.deaths())[i];
        out << '\n';
    }
    return out.str();
}

void save_series(const std::filesystem::path& path, const IncidenceSeries& series)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ArgumentError("cannot write " + path.string());
    out << format_series(series);
}

std::vector<IncidenceSeries> load_multi_series(const std::filesystem::path& path, std::span<const std::string> columns)
{
    const auto table = read_csv(slurp(path));
    const auto date_col = table.column("date");
    if (!date_col) throw MissingColumnError("missing column 'date'", 1);
    if (table.rows.empty()) throw ArgumentError("series file has no data rows");
    const auto dates = parse_dates(table, *date_col);
    std::vector<IncidenceSeries> out;
    for (const auto& name : columns) {
        const auto col = table.column(name);
        if (!col) throw MissingColumnError("missing column '" + name + "'", 1);
        out.emplace_back(dates.front(), read_count_column(table, *col, name), std::nullopt, std::nullopt, name);
    }
    return out;
}

MobilityMatrix parse_mobility(std::string_view csv_text)
{
    const auto table = read_csv(csv_text);
    if (table.header.size() < 2) throw ArgumentError("mobility matrix needs a header row of district names");
    MobilityMatrix m;
    m.names.assign(table.header.begin() + 1, table.header.end());
    const auto n = m.names.size();
    if (table.rows.size() != n) {
        throw ArgumentError("mobility matrix must be square: " + std::to_string(n) + " columns but " +
                            std::to_string(table.rows.size()) + " rows");
    }
    m.flows.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& row = table.rows[i];
        if (row.size() != n + 1) throw ArgumentError("mobility row " + std::to_string(i + 1) + " has wrong width");
        if (row[0] != m.names[i]) {
            throw ArgumentError("mobility row label '" + row[0] + "' does not match column '" + m.names[i] + "'");
        }
        for (std::size_t j = 0; j < n; ++j) {
            double v = 0.0;
            const auto& cell = row[j + 1];
            auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (ec != std::errc{} || ptr != cell.data() + cell.size() || !std::isfinite(v) || v < 0.0) {
                throw ArgumentError("mobility entry (" + m.names[i] + "," + m.names[j] +
                                    ") must be a non-negative number");
            }
            if (i == j && v != 0.0) throw ArgumentError("mobility diagonal must be zero for " + m.names[i]);
            m.flows[i * n + j] = v;
        }
    }
    return m;
}

MobilityMatrix load_mobility(const std::filesystem::path& path)
{
    return parse_mobility(slurp(path));
}

DistrictPopulations load_populations(const std::filesystem::path& path)
{
    const auto table = read_csv(slurp(path));
    const auto name_col = table.column("district");
    const auto pop_col = table.column("population");
    if (!name_col || !pop_col) throw MissingColumnError("population file needs 'district' and 'population'", 1);
    DistrictPopulations out;
    for (const auto& row : table.rows) {
        out.names.push_back(row.at(*name_col));
        const double v = std::stod(row.at(*pop_col));
        if (!(v > 0.0)) throw ArgumentError("district population must be positive");
        out.population.push_back(v);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Randomness

std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t key)
{
    std::uint64_t z = parent + 0x9E3779B97F4A7C15ULL * (key + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

Count Rng::poisson(double mean)
{
    if (!(mean > 0.0)) return 0;
    boost::random::poisson_distribution<Count, double> dist(mean);
    return dist(engine_);
}

double Rng::gamma(double shape, double scale)
{
    boost::random::gamma_distribution<double> dist(shape, scale);
    return dist(engine_);
}

double Rng::beta(double a, double b)
{
    boost::random::beta_distribution<double> dist(a, b);
    return dist(engine_);
}

double Rng::uniform(double lo, double hi)
{
    boost::random::uniform_real_distribution<double> dist(lo, hi);
    return dist(engine_);
}

int Rng::uniform_int(int lo, int hi)
{
    boost::random::uniform_int_distribution<int> dist(lo, hi);
    return dist(engine_);
}

double Rng::normal(double mean, double sd)
{
    boost::random::normal_distribution<double> dist(mean, sd);
    return dist(engine_);
}

double Rng::exponential(double rate)
{
    boost::random::exponential_distribution<double> dist(rate);
    return dist(engine_);
}

// ---------------------------------------------------------------------------
// Metrics

double relative_error(std::span<const double> pred, std::span<const double> obs)
{
    if (pred.size() != obs.size()) throw ArgumentError("relative_error: length mismatch");
    if (obs.empty()) throw ArgumentError("relative_error: empty series");
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        num += (pred[i] - obs[i]) * (pred[i] - obs[i]);
        den += obs[i] * obs[i];
    }
    if (den == 0.0) throw DomainError("relative_error: observations are identically zero");
    return std::sqrt(num / den);
}

double quantile(std::vector<double> values, double p)
{
    if (values.empty()) throw ArgumentError("quantile of empty sample");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * std::clamp(p, 0.0, 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double median(std::vector<double> values)
{
    return quantile(std::move(values), 0.5);
}

double mean(std::span<const double> values)
{
    if (values.empty()) throw ArgumentError("mean of empty sample");
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double variance(std::span<const double> values)
{
    if (values.size() < 2) return 0.0;
    const double m = mean(values);
    double ss = 0.0;
    for (double v : values) ss += (v - m) * (v - m);
    return ss / static_cast<double>(values.size() - 1);
}

}  // namespace epitk
