#pragma once

#include "mps/csv.hpp"
#include "mps/engine.hpp"
#include "mps/loss_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mps::metrics {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

namespace detail {
inline void require_log(std::span<const StepRecord> records, std::size_t window) {
    if (records.empty()) throw std::invalid_argument("empty step log");
    if (window < 1) throw std::invalid_argument("window must be at least 1");
}
}  // namespace detail

/// Trailing mean over the last `window` values; partial windows at the start
/// average whatever is available. NaN entries are skipped; an all-NaN window
/// yields NaN.
[[nodiscard]] inline std::vector<double> trailing_mean(std::span<const double> x, std::size_t window) {
    if (window < 1) throw std::invalid_argument("window must be at least 1");
    std::vector<double> out(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
        const std::size_t begin = k + 1 >= window ? k + 1 - window : 0;
        double sum = 0.0;
        std::size_t n = 0;
        for (std::size_t j = begin; j <= k; ++j) {
            if (std::isnan(x[j])) continue;
            sum += x[j];
            ++n;
        }
        out[k] = n ? sum / static_cast<double>(n) : kNaN;
    }
    return out;
}

/// Fraction of misses among the resolved records of each trailing window.
[[nodiscard]] inline std::vector<double> moving_miscoverage(std::span<const StepRecord> records,
                                                            std::size_t window = 100) {
    detail::require_log(records, window);
    std::vector<double> miss(records.size());
    for (std::size_t k = 0; k < records.size(); ++k) {
        miss[k] = records[k].covered ? (*records[k].covered ? 0.0 : 1.0) : kNaN;
    }
    return trailing_mean(miss, window);
}

[[nodiscard]] inline std::vector<double> moving_cardinality(std::span<const StepRecord> records,
                                                            std::size_t window = 100) {
    detail::require_log(records, window);
    std::vector<double> card(records.size());
    for (std::size_t k = 0; k < records.size(); ++k) card[k] = static_cast<double>(records[k].cardinality);
    return trailing_mean(card, window);
}

/// Minimum-cardinality emitted set within a trailing window.
struct QualitySet {
    std::size_t cardinality = 0;
    std::size_t origin = 0;  ///< index into the step log
    std::vector<std::size_t> set;
};

/// Earliest step wins ties.
[[nodiscard]] inline std::vector<QualitySet> quality_sets(std::span<const StepRecord> records,
                                                          std::size_t window = 20) {
    detail::require_log(records, window);
    std::vector<QualitySet> out;
    out.reserve(records.size());
    for (std::size_t k = 0; k < records.size(); ++k) {
        const std::size_t begin = k + 1 >= window ? k + 1 - window : 0;
        std::size_t best = begin;
        for (std::size_t j = begin + 1; j <= k; ++j) {
            if (records[j].cardinality < records[best].cardinality) best = j;
        }
        out.push_back({records[best].cardinality, best, records[best].emitted_set});
    }
    return out;
}

struct LossRange {
    double min = 0.0;
    double max = 0.0;
    double quality_mean = 0.0;
};

/// Smallest and largest loss of the emitted set at each step (row t of `lm`),
/// and the mean loss of each quality set at its origin step, all averaged over
/// a trailing `window`.
[[nodiscard]] inline std::vector<LossRange> loss_ranges(std::span<const StepRecord> records,
                                                        const LossMatrix& lm, std::size_t window = 100,
                                                        std::size_t quality_window = 20) {
    detail::require_log(records, window);
    const std::size_t n = records.size();
    auto row_of = [&](const StepRecord& r) {
        if (r.t < 1 || r.t > lm.rows()) {
            throw std::invalid_argument("step t=" + std::to_string(r.t) + " has no loss row (" +
                                        std::to_string(lm.rows()) + " rows)");
        }
        for (auto i : r.emitted_set) {
            if (i >= lm.models()) {
                throw std::invalid_argument("step t=" + std::to_string(r.t) + " names model " +
                                            std::to_string(i + 1) + " beyond the loss matrix");
            }
        }
        return lm.row(r.t - 1);
    };

    std::vector<double> lo(n), hi(n), qmean(n);
    for (std::size_t k = 0; k < n; ++k) {
        const auto row = row_of(records[k]);
        lo[k] = std::numeric_limits<double>::infinity();
        hi[k] = -std::numeric_limits<double>::infinity();
        for (auto i : records[k].emitted_set) {
            lo[k] = std::min(lo[k], row[i]);
            hi[k] = std::max(hi[k], row[i]);
        }
    }
    const auto qs = quality_sets(records, quality_window);
    for (std::size_t k = 0; k < n; ++k) {
        const auto row = row_of(records[qs[k].origin]);
        double sum = 0.0;
        for (auto i : qs[k].set) sum += row[i];
        qmean[k] = sum / static_cast<double>(qs[k].set.size());
    }

    const auto lo_w = trailing_mean(lo, window), hi_w = trailing_mean(hi, window),
               q_w = trailing_mean(qmean, window);
    std::vector<LossRange> out(n);
    for (std::size_t k = 0; k < n; ++k) out[k] = {lo_w[k], hi_w[k], q_w[k]};
    return out;
}

struct ReportRow {
    std::size_t t = 0;
    double miscoverage_w100 = 0.0;
    double mean_cardinality_w100 = 0.0;
    std::size_t min_cardinality_w20 = 0;
    std::vector<std::size_t> quality_set;
    double loss_min = kNaN;
    double loss_max = kNaN;
    double quality_mean_loss = kNaN;
};

/// One row per step. Loss columns are NaN when `lm` is absent.
[[nodiscard]] inline std::vector<ReportRow> build_report(std::span<const StepRecord> records,
                                                         const LossMatrix* lm, std::size_t window = 100,
                                                         std::size_t quality_window = 20) {
    const auto miss = moving_miscoverage(records, window);
    const auto card = moving_cardinality(records, window);
    const auto qs = quality_sets(records, quality_window);
    std::vector<LossRange> ranges;
    if (lm) ranges = loss_ranges(records, *lm, window, quality_window);

    std::vector<ReportRow> rows(records.size());
    for (std::size_t k = 0; k < records.size(); ++k) {
        auto& r = rows[k];
        r.t = records[k].t;
        r.miscoverage_w100 = miss[k];
        r.mean_cardinality_w100 = card[k];
        r.min_cardinality_w20 = qs[k].cardinality;
        r.quality_set = qs[k].set;
        if (lm) {
            r.loss_min = ranges[k].min;
            r.loss_max = ranges[k].max;
            r.quality_mean_loss = ranges[k].quality_mean;
        }
    }
    return rows;
}

inline constexpr const char* kReportHeader =
    "t,miscoverage_w100,mean_cardinality_w100,min_cardinality_w20,quality_set,loss_min,loss_max,"
    "quality_mean_loss";

namespace detail {
inline std::string fmt(double v) { return std::isnan(v) ? "NA" : csv::format_double(v); }

inline std::optional<double> parse_or_na(std::string_view s) {
    if (csv::trim(s) == "NA") return kNaN;
    return csv::parse_double(s);
}
}  // namespace detail

inline void write_report(std::ostream& out, std::span<const ReportRow> rows) {
    out << kReportHeader << '\n';
    for (const auto& r : rows) {
        out << r.t << ',' << detail::fmt(r.miscoverage_w100) << ',' << detail::fmt(r.mean_cardinality_w100)
            << ',' << r.min_cardinality_w20 << ',';
        for (std::size_t k = 0; k < r.quality_set.size(); ++k) out << (k ? ";" : "") << r.quality_set[k] + 1;
        out << ',' << detail::fmt(r.loss_min) << ',' << detail::fmt(r.loss_max) << ','
            << detail::fmt(r.quality_mean_loss) << '\n';
    }
}

/// Refuses to replace an existing file unless `force` is set.
inline void write_report(std::span<const ReportRow> rows, const std::filesystem::path& path, bool force) {
    auto out = csv::open_for_write(path, force);
    write_report(out, rows);
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline std::vector<ReportRow> read_report(std::istream& in, const std::string& source = "<input>") {
    std::string line;
    if (!std::getline(in, line) || csv::strip_cr(line) != kReportHeader) {
        throw ParseError(source, 1, 0, "missing report header");
    }
    std::vector<ReportRow> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        const auto text = csv::strip_cr(line);
        if (csv::trim(text).empty()) continue;
        const auto f = csv::split(text);
        if (f.size() != 8) throw ParseError(source, lineno, 0, "expected 8 fields");
        auto need = [&](auto v, std::size_t col) {
            if (!v) throw ParseError(source, lineno, col, "malformed field");
            return *v;
        };
        ReportRow r;
        r.t = need(csv::parse_uint(f[0]), 1);
        r.miscoverage_w100 = need(detail::parse_or_na(f[1]), 2);
        r.mean_cardinality_w100 = need(detail::parse_or_na(f[2]), 3);
        r.min_cardinality_w20 = need(csv::parse_uint(f[3]), 4);
        for (auto idx : csv::split(f[4], ';')) r.quality_set.push_back(need(csv::parse_uint(idx), 5) - 1);
        r.loss_min = need(detail::parse_or_na(f[5]), 6);
        r.loss_max = need(detail::parse_or_na(f[6]), 7);
        r.quality_mean_loss = need(detail::parse_or_na(f[7]), 8);
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace mps::metrics
