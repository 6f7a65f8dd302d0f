#pragma once

#include "mps/loss_matrix.hpp"
#include "mps/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <thread>
#include <vector>

namespace mps {

/// Moving-block bootstrap resampling plan over `time_len` rows.
///
/// Sequences depend only on (time_len, block_len, B, seed), never on the
/// losses or the number of models, so one plan can be shared by every
/// elimination round and every threshold at a given time step.
struct BootstrapPlan {
    std::size_t replicates = 0;
    std::size_t block_len = 0;
    std::uint64_t seed = 0;
    std::size_t time_len = 0;
    /// replicates x time_len row indices (0-based), replicate-major.
    std::vector<std::uint32_t> indices;

    [[nodiscard]] std::span<const std::uint32_t> sequence(std::size_t r) const {
        return std::span<const std::uint32_t>(indices).subspan(r * time_len, time_len);
    }
};

/// Replicate `r` is drawn from the substream keyed by (seed, r).
[[nodiscard]] inline BootstrapPlan block_bootstrap_indices(std::size_t time_len,
                                                           std::size_t block_len,
                                                           std::size_t replicates,
                                                           std::uint64_t seed) {
    if (time_len < 2) throw std::invalid_argument("block bootstrap needs at least 2 rows");
    if (block_len == 0 || block_len > time_len) {
        throw std::invalid_argument("block length " + std::to_string(block_len) +
                                    " outside [1, " + std::to_string(time_len) + "]");
    }
    if (replicates == 0) throw std::invalid_argument("bootstrap needs at least one replicate");

    BootstrapPlan plan{replicates, block_len, seed, time_len, {}};
    plan.indices.resize(replicates * time_len);
    const std::uint64_t starts = time_len - block_len + 1;
    for (std::size_t r = 0; r < replicates; ++r) {
        Rng rng = make_substream(seed, r);
        auto* out = plan.indices.data() + r * time_len;
        std::size_t filled = 0;
        while (filled < time_len) {
            const auto start = uniform_index(rng, starts);
            for (std::size_t k = 0; k < block_len && filled < time_len; ++k) {
                out[filled++] = static_cast<std::uint32_t>(start + k);
            }
        }
    }
    return plan;
}

/// Plan whose every replicate is the identity resample; the only plan
/// possible for a single row.
[[nodiscard]] inline BootstrapPlan identity_plan(std::size_t time_len, std::size_t replicates) {
    BootstrapPlan plan{replicates, time_len, 0, time_len, {}};
    plan.indices.resize(replicates * time_len);
    for (std::size_t r = 0; r < replicates; ++r) {
        std::iota(plan.indices.begin() + static_cast<std::ptrdiff_t>(r * time_len),
                  plan.indices.begin() + static_cast<std::ptrdiff_t>((r + 1) * time_len), 0u);
    }
    return plan;
}

/// max(2, round(t^(1/3))), capped at t.
[[nodiscard]] inline std::size_t default_block_len(std::size_t time_len) {
    const auto cube = static_cast<std::size_t>(std::llround(std::cbrt(static_cast<double>(time_len))));
    return std::min(std::max<std::size_t>(2, cube), time_len);
}

/// Per-model MCS p-values; thresholding them gives the nested family of
/// model confidence sets C(1 - beta) for every beta at once.
struct ModelSetFamily {
    std::vector<double> pvalues;
    std::size_t time_len = 0;

    [[nodiscard]] std::size_t models() const noexcept { return pvalues.size(); }
    friend bool operator==(const ModelSetFamily&, const ModelSetFamily&) = default;
};

inline constexpr double kVarianceFloor = 1e-12;

namespace detail {

// Sum in ascending order so the result does not depend on model order.
inline double order_free_mean(std::vector<double>& scratch) {
    std::sort(scratch.begin(), scratch.end());
    double s = 0.0;
    for (double v : scratch) s += v;
    return s / static_cast<double>(scratch.size());
}

// Column means of each bootstrap replicate, replicates x models.
inline std::vector<double> replicate_means(const LossMatrix& L, const BootstrapPlan& plan,
                                           unsigned threads) {
    const std::size_t m = L.models();
    const std::size_t B = plan.replicates;
    const auto t = static_cast<double>(plan.time_len);
    const auto values = L.values();
    std::vector<double> means(B * m, 0.0);

    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t b = begin; b < end; ++b) {
            double* acc = means.data() + b * m;
            for (auto idx : plan.sequence(b)) {
                const double* row = values.data() + static_cast<std::size_t>(idx) * m;
                for (std::size_t i = 0; i < m; ++i) acc[i] += row[i];
            }
            for (std::size_t i = 0; i < m; ++i) acc[i] /= t;
        }
    };

    // Each replicate is accumulated by exactly one thread in a fixed order,
    // so the result is identical for any thread count.
    const std::size_t workers = std::clamp<std::size_t>(threads, 1, B);
    if (workers == 1) {
        work(0, B);
        return means;
    }
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (B + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(B, begin + chunk);
        if (begin < end) pool.emplace_back(work, begin, end);
    }
    return means;
}

}  // namespace detail

/// MCS p-values from rows [0, plan.time_len) of `L`.
///
/// Sequential elimination with the max-deviation statistic: within the
/// surviving set S each model's mean loss is compared to the average over S,
/// studentized by a bootstrap variance (floored at kVarianceFloor). The model
/// with the largest statistic is eliminated at every round; its p-value is the
/// running maximum of the step p-values, and the final survivor receives 1.
[[nodiscard]] inline ModelSetFamily mcs_pvalues(const LossMatrix& L, const BootstrapPlan& plan,
                                                unsigned threads = 1) {
    const std::size_t m = L.models();
    const std::size_t t = plan.time_len;
    if (t == 0 || t > L.rows()) throw std::invalid_argument("bootstrap plan does not fit the loss matrix");
    ModelSetFamily fam{std::vector<double>(m, 1.0), t};
    if (m == 1) return fam;

    const std::size_t B = plan.replicates;
    std::vector<double> col_mean(m, 0.0);
    for (std::size_t r = 0; r < t; ++r) {
        const auto row = L.row(r);
        for (std::size_t i = 0; i < m; ++i) col_mean[i] += row[i];
    }
    for (auto& v : col_mean) v /= static_cast<double>(t);
    const auto boot = detail::replicate_means(L, plan, threads);

    std::vector<std::size_t> alive(m);
    std::iota(alive.begin(), alive.end(), 0);
    std::vector<double> scratch, dev(m), sd(m), centered(B * m);
    double running = 0.0;

    while (alive.size() > 1) {
        scratch.clear();
        for (auto i : alive) scratch.push_back(col_mean[i]);
        const double avg = detail::order_free_mean(scratch);
        for (auto i : alive) dev[i] = col_mean[i] - avg;

        for (std::size_t b = 0; b < B; ++b) {
            const double* row = boot.data() + b * m;
            scratch.clear();
            for (auto i : alive) scratch.push_back(row[i]);
            const double avg_b = detail::order_free_mean(scratch);
            for (auto i : alive) centered[b * m + i] = row[i] - avg_b - dev[i];
        }

        std::size_t worst = alive.front();
        double t_obs = -std::numeric_limits<double>::infinity();
        for (auto i : alive) {
            double var = 0.0;
            for (std::size_t b = 0; b < B; ++b) var += centered[b * m + i] * centered[b * m + i];
            var = std::max(var / static_cast<double>(B), kVarianceFloor);
            sd[i] = std::sqrt(var);
            const double stat = dev[i] / sd[i];
            if (stat > t_obs) {  // strict: ties keep the lowest index
                t_obs = stat;
                worst = i;
            }
        }

        std::size_t exceed = 0;
        for (std::size_t b = 0; b < B; ++b) {
            double tb = -std::numeric_limits<double>::infinity();
            for (auto i : alive) tb = std::max(tb, centered[b * m + i] / sd[i]);
            if (tb > t_obs) ++exceed;
        }
        running = std::max(running, static_cast<double>(exceed) / static_cast<double>(B));
        fam.pvalues[worst] = running;
        alive.erase(std::find(alive.begin(), alive.end(), worst));
    }
    fam.pvalues[alive.front()] = 1.0;
    return fam;
}

/// { i : p_i >= beta }, ascending.
[[nodiscard]] inline std::vector<std::size_t> model_set(const ModelSetFamily& fam, double beta) {
    if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("beta must lie in [0, 1]");
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fam.pvalues.size(); ++i) {
        if (fam.pvalues[i] >= beta) out.push_back(i);
    }
    return out;
}

[[nodiscard]] inline std::size_t set_size(const ModelSetFamily& fam, double beta) {
    return static_cast<std::size_t>(
        std::count_if(fam.pvalues.begin(), fam.pvalues.end(), [beta](double p) { return p >= beta; }));
}

/// Largest grid value beta with `model` in C(1 - beta). The grid must be
/// ascending and contain 0.
[[nodiscard]] inline double beta_realized(const ModelSetFamily& fam, std::size_t model,
                                          std::span<const double> grid) {
    if (model >= fam.pvalues.size()) throw std::out_of_range("model index out of range");
    if (grid.empty() || grid.front() != 0.0) throw std::invalid_argument("grid must start at 0");
    const double p = fam.pvalues[model];
    const auto it = std::upper_bound(grid.begin(), grid.end(), p);
    return *(it - 1);
}

}  // namespace mps
