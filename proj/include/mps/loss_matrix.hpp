#pragma once

#include "mps/csv.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mps {

/// Time-by-model matrix of finite losses, stored row-major.
///
/// Rows and models are addressed 0-based in code; row `r` is time period
/// `r + 1`. Rows only ever grow, so a prefix `[0, t)` is the information
/// available at time `t`.
class LossMatrix {
public:
    LossMatrix() = default;

    explicit LossMatrix(std::vector<std::string> labels) : labels_(std::move(labels)) {
        validate_labels();
    }

    LossMatrix(std::vector<std::string> labels, std::vector<double> values)
        : labels_(std::move(labels)) {
        validate_labels();
        if (values.size() % labels_.size() != 0) {
            throw std::invalid_argument("loss values do not form whole rows");
        }
        for (double v : values) require_finite(v);
        values_ = std::move(values);
    }

    /// Matrix with labels m1..mM and no rows.
    static LossMatrix with_default_labels(std::size_t models) {
        std::vector<std::string> labels;
        labels.reserve(models);
        for (std::size_t i = 0; i < models; ++i) labels.push_back("m" + std::to_string(i + 1));
        return LossMatrix(std::move(labels));
    }

    [[nodiscard]] std::size_t rows() const noexcept {
        return labels_.empty() ? 0 : values_.size() / labels_.size();
    }
    [[nodiscard]] std::size_t models() const noexcept { return labels_.size(); }
    [[nodiscard]] const std::vector<std::string>& labels() const noexcept { return labels_; }
    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }

    [[nodiscard]] double operator()(std::size_t row, std::size_t model) const {
        return values_[row * models() + model];
    }

    [[nodiscard]] std::span<const double> row(std::size_t r) const {
        if (r >= rows()) throw std::out_of_range("row " + std::to_string(r) + " out of range");
        return std::span<const double>(values_).subspan(r * models(), models());
    }

    void append_row(std::span<const double> row) {
        if (row.size() != models()) {
            throw std::invalid_argument("row has " + std::to_string(row.size()) +
                                        " entries, expected " + std::to_string(models()));
        }
        for (double v : row) require_finite(v);
        values_.insert(values_.end(), row.begin(), row.end());
    }

    /// Copy of the first `n` rows.
    [[nodiscard]] LossMatrix head(std::size_t n) const {
        if (n > rows()) throw std::out_of_range("head beyond matrix length");
        LossMatrix out(labels_);
        out.values_.assign(values_.begin(), values_.begin() + static_cast<std::ptrdiff_t>(n * models()));
        return out;
    }

    friend bool operator==(const LossMatrix&, const LossMatrix&) = default;

private:
    void validate_labels() const {
        if (labels_.empty()) throw std::invalid_argument("loss matrix needs at least one model");
        std::set<std::string> seen;
        for (const auto& l : labels_) {
            if (l.empty()) throw std::invalid_argument("empty model label");
            if (!seen.insert(l).second) throw std::invalid_argument("duplicate model label '" + l + "'");
        }
    }

    static void require_finite(double v) {
        if (!std::isfinite(v)) throw std::invalid_argument("non-finite loss value");
    }

    std::vector<std::string> labels_;
    std::vector<double> values_;
};

/// Functional form of LossMatrix::append_row.
[[nodiscard]] inline LossMatrix append_row(LossMatrix lm, std::span<const double> row) {
    lm.append_row(row);
    return lm;
}

/// Index of the smallest loss in row `r`; ties go to the lowest index.
[[nodiscard]] inline std::size_t best_model(std::span<const double> row) {
    if (row.empty()) throw std::invalid_argument("best_model on empty row");
    return static_cast<std::size_t>(std::min_element(row.begin(), row.end()) - row.begin());
}

[[nodiscard]] inline std::size_t best_model(const LossMatrix& lm, std::size_t r) {
    return best_model(lm.row(r));
}

/// Reads a loss matrix: a header of model labels, then one row of losses per
/// time period. `source` names the input in error messages.
inline LossMatrix read_loss_csv(std::istream& in, const std::string& source = "<input>") {
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line)) throw ParseError(source, 1, 0, "empty file");
    ++lineno;

    std::vector<std::string> labels;
    for (auto field : csv::split(csv::strip_cr(line))) labels.emplace_back(csv::trim(field));
    std::optional<LossMatrix> lm;
    try {
        lm.emplace(std::move(labels));
    } catch (const std::invalid_argument& e) {
        throw ParseError(source, 1, 0, std::string("bad header: ") + e.what());
    }

    const std::size_t m = lm->models();
    std::vector<double> row(m);
    while (std::getline(in, line)) {
        ++lineno;
        const auto text = csv::strip_cr(line);
        if (csv::trim(text).empty()) continue;
        const auto fields = csv::split(text);
        if (fields.size() != m) {
            throw ParseError(source, lineno, 0,
                             "expected " + std::to_string(m) + " fields, found " +
                                 std::to_string(fields.size()));
        }
        for (std::size_t j = 0; j < m; ++j) {
            const auto v = csv::parse_double(fields[j]);
            if (!v) {
                throw ParseError(source, lineno, j + 1,
                                 "not a number: '" + std::string(csv::trim(fields[j])) + "'");
            }
            if (!std::isfinite(*v)) throw ParseError(source, lineno, j + 1, "non-finite value");
            row[j] = *v;
        }
        lm->append_row(row);
    }
    return std::move(*lm);
}

inline LossMatrix ingest_csv(const std::filesystem::path& path) {
    auto in = csv::open_for_read(path);
    return read_loss_csv(in, path.string());
}

inline void write_loss_csv(std::ostream& out, const LossMatrix& lm) {
    const auto& labels = lm.labels();
    for (std::size_t j = 0; j < labels.size(); ++j) out << (j ? "," : "") << labels[j];
    out << '\n';
    for (std::size_t r = 0; r < lm.rows(); ++r) {
        const auto row = lm.row(r);
        for (std::size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << csv::format_double(row[j]);
        out << '\n';
    }
}

inline void write_loss_csv(const std::filesystem::path& path, const LossMatrix& lm, bool force = true) {
    auto out = csv::open_for_write(path, force);
    write_loss_csv(out, lm);
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace mps
