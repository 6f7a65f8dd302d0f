#pragma once

#include "mps/loss_matrix.hpp"
#include "mps/random.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mps::sim {

enum class Design { A, B, C };

[[nodiscard]] inline Design parse_design(std::string_view tag) {
    if (tag == "a" || tag == "A") return Design::A;
    if (tag == "b" || tag == "B") return Design::B;
    if (tag == "c" || tag == "C") return Design::C;
    throw std::invalid_argument("unknown design '" + std::string(tag) + "' (expected a, b or c)");
}

struct DesignSpec {
    Design design = Design::A;
    std::size_t T = 2000;
    std::size_t m = 10;
    std::uint64_t seed = 0;
};

/// Lower endpoint of the first drifting column in design (c) at time t.
[[nodiscard]] constexpr double drift_up(std::size_t t, std::size_t T) noexcept {
    const double td = static_cast<double>(t), Td = static_cast<double>(T);
    return 2.0 * td <= Td ? 2.0 * td / Td : 2.0 * (Td - td) / Td;
}

/// Lower endpoint of the mirrored column in design (c).
[[nodiscard]] constexpr double drift_down(std::size_t t, std::size_t T) noexcept {
    const double td = static_cast<double>(t), Td = static_cast<double>(T);
    return 2.0 * td <= Td ? (Td - 2.0 * td) / Td : (2.0 * td - Td) / Td;
}

/// Designed loss matrices:
///  (a) every entry U(0, 2);
///  (b) columns 1-2 alternate 25 rows of U(0.5, 1.5) and 25 rows of U(1, 2),
///      phase-aligned from t = 1; other columns U(0, 2);
///  (c) column 1 U(mu_t, mu_t + 1), column 2 U(mu'_t, mu'_t + 1) with the
///      tent-shaped drift_up/drift_down endpoints; other columns U(0, 2).
/// Column j draws from the substream keyed by (seed, j).
[[nodiscard]] inline LossMatrix gen_design(const DesignSpec& spec) {
    if (spec.T < 1) throw std::invalid_argument("T must be at least 1");
    if (spec.m < 1) throw std::invalid_argument("m must be at least 1");
    if (spec.design != Design::A && spec.m < 2) {
        throw std::invalid_argument("designs b and c need at least 2 models");
    }
    const std::size_t T = spec.T, m = spec.m;
    std::vector<double> values(T * m);
    for (std::size_t j = 0; j < m; ++j) {
        Rng rng = make_substream(spec.seed, j);
        for (std::size_t r = 0; r < T; ++r) {
            const std::size_t t = r + 1;
            double lo = 0.0, hi = 2.0;
            if (spec.design == Design::B && j < 2) {
                const bool low_block = (r % 50) < 25;
                lo = low_block ? 0.5 : 1.0;
                hi = low_block ? 1.5 : 2.0;
            } else if (spec.design == Design::C && j < 2) {
                lo = j == 0 ? drift_up(t, T) : drift_down(t, T);
                hi = lo + 1.0;
            }
            values[r * m + j] = uniform(rng, lo, hi);
        }
    }
    auto lm = LossMatrix::with_default_labels(m);
    return LossMatrix(lm.labels(), std::move(values));
}

struct ArmaSpec {
    std::size_t T = 2000;
    std::size_t switch_point = 1000;
    double ar_coef = 0.3;
    double ma_coef = 0.3;
    std::uint64_t seed = 0;
    std::size_t max_ar_order = 5;
    std::size_t max_ma_order = 5;
};

/// Y_t = ar Y_{t-1} + e_t + ma 1(t <= switch_point) e_{t-1}, Y_0 = e_0 = 0,
/// e_t iid N(0, 1).
[[nodiscard]] inline std::vector<double> gen_arma_series(const ArmaSpec& spec) {
    if (spec.switch_point < 1 || spec.switch_point > spec.T) {
        throw std::invalid_argument("switch point must lie in [1, T]");
    }
    Rng rng = make_substream(spec.seed, 0);
    std::vector<double> y(spec.T);
    double y_prev = 0.0, e_prev = 0.0;
    for (std::size_t t = 1; t <= spec.T; ++t) {
        const double e = standard_normal(rng);
        const double ma = t <= spec.switch_point ? spec.ma_coef * e_prev : 0.0;
        y[t - 1] = spec.ar_coef * y_prev + e + ma;
        y_prev = y[t - 1];
        e_prev = e;
    }
    return y;
}

/// Linear fit with a one-step forecast of Y_{upto+1}.
struct LinearFit {
    double intercept = 0.0;
    std::vector<double> ar;  ///< phi_1..phi_p
    std::vector<double> ma;  ///< theta_1..theta_q
    double forecast = 0.0;
};

class SingularFit : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline Eigen::VectorXd least_squares(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(1e-10);
    if (qr.rank() < X.cols()) throw SingularFit("singular design matrix");
    return qr.solve(y);
}

// OLS of y_t on (1, y_{t-1}, ..., y_{t-p}) over t = first..upto (1-based).
inline Eigen::VectorXd ar_ols(std::span<const double> y, std::size_t p, std::size_t first,
                              std::size_t upto) {
    const auto n = static_cast<Eigen::Index>(upto - first + 1);
    Eigen::MatrixXd X(n, static_cast<Eigen::Index>(p + 1));
    Eigen::VectorXd target(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const std::size_t t = first + static_cast<std::size_t>(k);
        target(k) = y[t - 1];
        X(k, 0) = 1.0;
        for (std::size_t j = 1; j <= p; ++j) X(k, static_cast<Eigen::Index>(j)) = y[t - 1 - j];
    }
    return least_squares(X, target);
}

}  // namespace detail

/// OLS AR(p) on Y_1..Y_upto. Requires upto > p + 10.
[[nodiscard]] inline LinearFit fit_ar(std::span<const double> series, std::size_t p, std::size_t upto) {
    if (p < 1) throw std::invalid_argument("AR order must be positive");
    if (upto > series.size()) throw std::invalid_argument("upto beyond series length");
    if (upto <= p + 10) throw std::invalid_argument("too few observations for AR(" + std::to_string(p) + ")");
    const auto beta = detail::ar_ols(series, p, p + 1, upto);
    LinearFit fit;
    fit.intercept = beta(0);
    fit.forecast = beta(0);
    for (std::size_t j = 1; j <= p; ++j) {
        fit.ar.push_back(beta(static_cast<Eigen::Index>(j)));
        fit.forecast += fit.ar.back() * series[upto - j];
    }
    return fit;
}

/// Hannan-Rissanen ARMA(p, q): residuals of a long AR(h), h = max(10, 2(p+q)),
/// stand in for the innovations in an OLS of Y_t on (1, Y lags, residual lags).
[[nodiscard]] inline LinearFit fit_arma_hr(std::span<const double> series, std::size_t p, std::size_t q,
                                           std::size_t upto) {
    if (q < 1) throw std::invalid_argument("MA order must be positive");
    if (upto > series.size()) throw std::invalid_argument("upto beyond series length");
    const std::size_t h = std::max<std::size_t>(10, 2 * (p + q));
    const std::size_t first = h + std::max(p, q) + 1;
    if (upto < first + p + q + 10) throw std::invalid_argument("too few observations for Hannan-Rissanen");

    const auto phi = detail::ar_ols(series, h, h + 1, upto);
    std::vector<double> resid(upto, 0.0);
    for (std::size_t t = h + 1; t <= upto; ++t) {
        double fitted = phi(0);
        for (std::size_t j = 1; j <= h; ++j) fitted += phi(static_cast<Eigen::Index>(j)) * series[t - 1 - j];
        resid[t - 1] = series[t - 1] - fitted;
    }

    const auto n = static_cast<Eigen::Index>(upto - first + 1);
    const auto k = static_cast<Eigen::Index>(1 + p + q);
    Eigen::MatrixXd X(n, k);
    Eigen::VectorXd target(n);
    for (Eigen::Index row = 0; row < n; ++row) {
        const std::size_t t = first + static_cast<std::size_t>(row);
        target(row) = series[t - 1];
        X(row, 0) = 1.0;
        for (std::size_t j = 1; j <= p; ++j) X(row, static_cast<Eigen::Index>(j)) = series[t - 1 - j];
        for (std::size_t j = 1; j <= q; ++j) X(row, static_cast<Eigen::Index>(p + j)) = resid[t - 1 - j];
    }
    const auto beta = detail::least_squares(X, target);

    LinearFit fit;
    fit.intercept = beta(0);
    fit.forecast = beta(0);
    for (std::size_t j = 1; j <= p; ++j) {
        fit.ar.push_back(beta(static_cast<Eigen::Index>(j)));
        fit.forecast += fit.ar.back() * series[upto - j];
    }
    for (std::size_t j = 1; j <= q; ++j) {
        fit.ma.push_back(beta(static_cast<Eigen::Index>(p + j)));
        fit.forecast += fit.ma.back() * resid[upto - j];
    }
    return fit;
}

/// Hannan-Rissanen MA(q). Requires upto > 4q + 20.
[[nodiscard]] inline LinearFit fit_ma(std::span<const double> series, std::size_t q, std::size_t upto) {
    if (upto <= 4 * q + 20) throw std::invalid_argument("too few observations for MA(" + std::to_string(q) + ")");
    return fit_arma_hr(series, 0, q, upto);
}

inline constexpr std::size_t kArmaWarmup = 50;

/// Squared one-step forecast errors of AR(1..P) and MA(1..Q) candidates, each
/// refit on the expanding window 1..t-1 for t > kArmaWarmup. Rows 1..kArmaWarmup
/// repeat the first fitted row.
[[nodiscard]] inline LossMatrix arma_experiment_losses(std::span<const double> y, const ArmaSpec& spec) {
    const std::size_t T = y.size();
    if (T <= kArmaWarmup + 1) throw std::invalid_argument("series too short for the warm-up");
    std::vector<std::string> labels;
    for (std::size_t p = 1; p <= spec.max_ar_order; ++p) labels.push_back("AR" + std::to_string(p));
    for (std::size_t q = 1; q <= spec.max_ma_order; ++q) labels.push_back("MA" + std::to_string(q));
    const std::size_t m = labels.size();

    std::vector<double> values(T * m);
    for (std::size_t t = kArmaWarmup + 1; t <= T; ++t) {
        double* row = values.data() + (t - 1) * m;
        std::size_t col = 0;
        for (std::size_t p = 1; p <= spec.max_ar_order; ++p) {
            const double err = y[t - 1] - fit_ar(y, p, t - 1).forecast;
            row[col++] = err * err;
        }
        for (std::size_t q = 1; q <= spec.max_ma_order; ++q) {
            const double err = y[t - 1] - fit_ma(y, q, t - 1).forecast;
            row[col++] = err * err;
        }
    }
    for (std::size_t t = 1; t <= kArmaWarmup; ++t) {
        std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(kArmaWarmup * m), m,
                    values.begin() + static_cast<std::ptrdiff_t>((t - 1) * m));
    }
    return LossMatrix(std::move(labels), std::move(values));
}

[[nodiscard]] inline LossMatrix arma_experiment_losses(const ArmaSpec& spec) {
    return arma_experiment_losses(gen_arma_series(spec), spec);
}

}  // namespace mps::sim
