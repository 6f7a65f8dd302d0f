#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mps {

/// Evenly spaced grid {0, step, 2 step, ...} below 1. When 1/step is an
/// integer N the points are computed as k/N so they compare exactly with
/// p-values of the form count/B.
[[nodiscard]] inline std::vector<double> make_grid(double step) {
    if (!(step > 0.0 && step < 1.0)) throw std::invalid_argument("grid step must lie in (0, 1)");
    std::vector<double> grid;
    const double n = std::round(1.0 / step);
    if (std::abs(n * step - 1.0) < 1e-9) {
        for (int k = 0; k < static_cast<int>(n); ++k) grid.push_back(k / n);
    } else {
        for (int k = 0; k * step < 1.0; ++k) grid.push_back(k * step);
    }
    return grid;
}

/// All tunables of the online procedure. Defaults are the recommended
/// settings: alpha_bar 0.2, lambda_max 2000, c 0.2, B 100, grid {k/20}.
struct MpsConfig {
    double alpha_bar = 0.2;
    double lambda_max = 2000.0;
    double c = 0.2;
    std::size_t tau = 100;
    std::size_t B = 100;
    std::vector<double> grid = make_grid(0.05);
    std::size_t train_n = 500;
    std::optional<std::size_t> block_len_override;
    std::uint64_t seed = 0;
    /// Worker threads for bootstrap replicates; results do not depend on it.
    unsigned threads = 1;

    /// Step size of the penalty weight; always c * lambda_max.
    [[nodiscard]] double gamma() const noexcept { return c * lambda_max; }

    void validate() const {
        auto fail = [](const std::string& msg) { throw std::invalid_argument(msg); };
        if (!(alpha_bar > 0.0 && alpha_bar < 1.0)) fail("alpha-bar must lie in (0, 1)");
        if (!(lambda_max > 0.0) || !std::isfinite(lambda_max)) fail("lambda-max must be positive");
        if (!(c > 0.0 && c < 1.0)) fail("c must lie in (0, 1)");
        if (tau < 1) fail("tau must be at least 1");
        if (B < 1) fail("B must be at least 1");
        if (train_n < 2) fail("train-n must be at least 2");
        if (train_n < tau) {
            fail("train-n (" + std::to_string(train_n) + ") must be at least tau (" +
                 std::to_string(tau) + ")");
        }
        if (grid.empty() || grid.front() != 0.0) fail("grid must start at 0");
        for (std::size_t k = 1; k < grid.size(); ++k) {
            if (!(grid[k] > grid[k - 1])) fail("grid must be strictly ascending");
        }
        if (!(grid.back() < 1.0)) fail("grid values must be below 1");
        if (block_len_override && *block_len_override == 0) fail("block length must be positive");
    }
};

/// Fixed-capacity history of realized beta values, oldest first.
class BetaBuffer {
public:
    BetaBuffer() = default;
    explicit BetaBuffer(std::vector<double> initial) : values_(initial.begin(), initial.end()) {}

    /// Evicts the oldest value and appends `beta`.
    void push(double beta) {
        if (values_.empty()) throw std::logic_error("beta buffer is not initialized");
        values_.pop_front();
        values_.push_back(beta);
    }

    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
    [[nodiscard]] std::vector<double> values() const { return {values_.begin(), values_.end()}; }

private:
    std::deque<double> values_;
};

struct CalibratorState {
    double lambda = 0.0;
    double alpha = 0.0;
    BetaBuffer betas;
};

/// lambda + gamma * (1{missed} - alpha_bar). Not clipped: a negative weight
/// rewards miscoverage and pulls over-covering runs back toward alpha_bar.
[[nodiscard]] constexpr double lambda_update(double lambda_prev, bool missed, double gamma,
                                             double alpha_bar) noexcept {
    return lambda_prev + gamma * ((missed ? 1.0 : 0.0) - alpha_bar);
}

namespace detail {
inline std::size_t grid_position(std::span<const double> grid, double alpha) {
    const auto it = std::find(grid.begin(), grid.end(), alpha);
    if (it == grid.end()) throw std::invalid_argument("alpha is not a grid point");
    return static_cast<std::size_t>(it - grid.begin());
}
}  // namespace detail

/// Empirical cost of cutting the family at `alpha`:
///   (1/tau) sum_s { |C(1 - alpha)| + lambda * max[1(alpha > beta_s) - alpha_bar, 0] }
/// `cardinality` is aligned with `grid`.
[[nodiscard]] inline double alpha_cost(std::span<const std::size_t> cardinality,
                                       std::span<const double> beta_history, double lambda,
                                       double alpha_bar, std::span<const double> grid, double alpha) {
    if (cardinality.size() != grid.size()) throw std::invalid_argument("cardinalities must align with grid");
    if (beta_history.empty()) throw std::invalid_argument("empty beta history");
    const double size = static_cast<double>(cardinality[detail::grid_position(grid, alpha)]);
    double total = 0.0;
    for (double beta : beta_history) {
        const double miss = alpha > beta ? 1.0 : 0.0;
        total += size + lambda * std::max(miss - alpha_bar, 0.0);
    }
    return total / static_cast<double>(beta_history.size());
}

/// Grid minimizer of alpha_cost; ties go to the largest alpha (smaller set).
[[nodiscard]] inline double alpha_optimize(std::span<const std::size_t> cardinality,
                                           std::span<const double> beta_history, double lambda,
                                           double alpha_bar, std::span<const double> grid) {
    if (grid.empty()) throw std::invalid_argument("empty grid");
    double best_alpha = grid.front();
    double best_cost = alpha_cost(cardinality, beta_history, lambda, alpha_bar, grid, grid.front());
    for (std::size_t k = 1; k < grid.size(); ++k) {
        const double cost = alpha_cost(cardinality, beta_history, lambda, alpha_bar, grid, grid[k]);
        if (cost <= best_cost) {
            best_cost = cost;
            best_alpha = grid[k];
        }
    }
    return best_alpha;
}

/// alpha_star while lambda < lambda_max, otherwise 0 (the full model set).
[[nodiscard]] constexpr double gate_alpha(double alpha_star, double lambda, double lambda_max) noexcept {
    return lambda < lambda_max ? alpha_star : 0.0;
}

[[nodiscard]] inline CalibratorState push_beta(CalibratorState state, double beta) {
    state.betas.push(beta);
    return state;
}

}  // namespace mps
