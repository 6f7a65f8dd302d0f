#pragma once

#include "mps/calibrator.hpp"
#include "mps/csv.hpp"
#include "mps/loss_matrix.hpp"
#include "mps/mcs.hpp"
#include "mps/random.hpp"

#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mps {

/// Output of one online step at time `t` (1-based: rows 1..t observed).
struct StepRecord {
    std::size_t t = 0;
    double alpha = 0.0;
    double lambda = 0.0;
    /// Realized beta of the previous step, observed at this step.
    double beta_prev = 0.0;
    /// Emitted model set C_t(1 - alpha), ascending 0-based indices.
    std::vector<std::size_t> emitted_set;
    std::size_t cardinality = 0;
    /// Best model at t + 1; empty on the live frontier.
    std::optional<std::size_t> best_next;
    /// 1(best_next in emitted_set); empty until resolved.
    std::optional<bool> covered;
    /// Family the set was cut from. Not serialized.
    ModelSetFamily family;
};

/// Model-set family on rows [0, rows) with the bootstrap plan keyed by
/// (config.seed, rows). A single row admits only the identity resample.
[[nodiscard]] inline ModelSetFamily family_at(const LossMatrix& L, std::size_t rows,
                                              const MpsConfig& config) {
    if (rows == 0 || rows > L.rows()) throw std::out_of_range("family rows out of range");
    if (rows == 1) return mcs_pvalues(L, identity_plan(1, config.B), config.threads);
    const std::size_t block = config.block_len_override
                                  ? std::min(*config.block_len_override, rows)
                                  : default_block_len(rows);
    const auto plan = block_bootstrap_indices(rows, block, config.B, substream_seed(config.seed, rows));
    return mcs_pvalues(L, plan, config.threads);
}

/// Online model prediction set: offline initialization of the beta history,
/// then one observe-score-calibrate-emit cycle per new loss row.
class Engine {
public:
    /// Builds the initial state from `train` (n rows, n >= tau, n >= 2).
    ///
    /// The beta history holds beta_{t-1} for t in n-tau+2..n, each computed
    /// against the family on rows 1..t-1, with the earliest value repeated once
    /// to fill tau slots. lambda starts at lambda_max / 2 and alpha at alpha_bar.
    static Engine offline_init(LossMatrix train, MpsConfig config) {
        config.validate();
        const std::size_t n = train.rows();
        if (n < 2) throw std::invalid_argument("training data needs at least 2 rows");
        if (n < config.tau) {
            throw std::invalid_argument("training length " + std::to_string(n) +
                                        " is shorter than tau " + std::to_string(config.tau));
        }

        Engine e(std::move(train), std::move(config));
        const auto& cfg = e.config_;
        const std::size_t first = cfg.tau >= 2 ? n - cfg.tau + 2 : n;
        std::vector<double> betas;
        betas.reserve(cfg.tau);
        for (std::size_t t = first; t <= n; ++t) {
            const auto best = best_model(e.losses_, t - 1);
            const auto fam = family_at(e.losses_, t - 1, cfg);
            betas.push_back(beta_realized(fam, best, cfg.grid));
        }
        while (betas.size() < cfg.tau) betas.insert(betas.begin(), betas.front());

        e.state_ = CalibratorState{cfg.lambda_max / 2.0, cfg.alpha_bar, BetaBuffer(std::move(betas))};
        e.initial_lambda_ = e.state_.lambda;
        e.family_ = family_at(e.losses_, n, cfg);
        return e;
    }

    /// Observes row t and emits C_t(1 - alpha_t). Resolves the coverage flag of
    /// the previous record.
    const StepRecord& online_step(std::span<const double> row) {
        losses_.append_row(row);
        const std::size_t t = losses_.rows();
        const auto& cfg = config_;

        const auto best = best_model(losses_, t - 1);
        const double beta = beta_realized(family_, best, cfg.grid);
        const bool missed = state_.alpha > beta;
        if (!log_.empty()) {
            log_.back().best_next = best;
            log_.back().covered = !missed;
        }

        family_ = family_at(losses_, t, cfg);
        state_.lambda = lambda_update(state_.lambda, missed, cfg.gamma(), cfg.alpha_bar);
        misses_.push_back(missed);
        state_.betas.push(beta);

        std::vector<std::size_t> sizes(cfg.grid.size());
        for (std::size_t k = 0; k < cfg.grid.size(); ++k) sizes[k] = set_size(family_, cfg.grid[k]);
        const auto history = state_.betas.values();
        const double alpha_star = alpha_optimize(sizes, history, state_.lambda, cfg.alpha_bar, cfg.grid);
        state_.alpha = gate_alpha(alpha_star, state_.lambda, cfg.lambda_max);

        StepRecord rec;
        rec.t = t;
        rec.alpha = state_.alpha;
        rec.lambda = state_.lambda;
        rec.beta_prev = beta;
        rec.emitted_set = model_set(family_, state_.alpha);
        rec.cardinality = rec.emitted_set.size();
        rec.family = family_;
        log_.push_back(std::move(rec));
        return log_.back();
    }

    [[nodiscard]] const MpsConfig& config() const noexcept { return config_; }
    [[nodiscard]] const LossMatrix& losses() const noexcept { return losses_; }
    [[nodiscard]] const CalibratorState& calibrator() const noexcept { return state_; }
    [[nodiscard]] const ModelSetFamily& family() const noexcept { return family_; }
    [[nodiscard]] const std::vector<StepRecord>& log() const noexcept { return log_; }
    [[nodiscard]] double initial_lambda() const noexcept { return initial_lambda_; }

    /// Miss indicators 1(alpha_s > beta_s) consumed by every lambda update so
    /// far, starting with the initial alpha. One longer than the resolved part
    /// of the log.
    [[nodiscard]] const std::vector<bool>& misses() const noexcept { return misses_; }

    /// Moves the log out, leaving the engine without history.
    [[nodiscard]] std::vector<StepRecord> take_log() && { return std::move(log_); }

private:
    Engine(LossMatrix losses, MpsConfig config)
        : losses_(std::move(losses)), config_(std::move(config)) {}

    LossMatrix losses_;
    MpsConfig config_;
    CalibratorState state_;
    ModelSetFamily family_;
    std::vector<StepRecord> log_;
    std::vector<bool> misses_;
    double initial_lambda_ = 0.0;
};

/// offline_init on the first train_n rows, then one online step per remaining
/// row. The last record stays unresolved.
inline std::vector<StepRecord> run(const LossMatrix& L, const MpsConfig& config,
                                   const std::function<void(const StepRecord&)>& on_step = {}) {
    if (L.rows() <= config.train_n) {
        throw std::invalid_argument("loss matrix has " + std::to_string(L.rows()) +
                                    " rows; need more than train-n = " + std::to_string(config.train_n));
    }
    auto engine = Engine::offline_init(L.head(config.train_n), config);
    for (std::size_t r = config.train_n; r < L.rows(); ++r) {
        const auto& rec = engine.online_step(L.row(r));
        if (on_step) on_step(rec);
    }
    return std::move(engine).take_log();
}

// Step log CSV: t,alpha,lambda,beta_prev,cardinality,set,best_next,covered
// Model indices are written 1-based; unresolved fields are NA.

inline constexpr const char* kStepLogHeader = "t,alpha,lambda,beta_prev,cardinality,set,best_next,covered";

inline void write_step_log(std::ostream& out, std::span<const StepRecord> records) {
    out << kStepLogHeader << '\n';
    for (const auto& r : records) {
        out << r.t << ',' << csv::format_double(r.alpha) << ',' << csv::format_double(r.lambda) << ','
            << csv::format_double(r.beta_prev) << ',' << r.cardinality << ',';
        for (std::size_t k = 0; k < r.emitted_set.size(); ++k) out << (k ? ";" : "") << r.emitted_set[k] + 1;
        out << ',';
        if (r.best_next) out << *r.best_next + 1; else out << "NA";
        out << ',';
        if (r.covered) out << (*r.covered ? '1' : '0'); else out << "NA";
        out << '\n';
    }
}

inline void write_step_log(const std::filesystem::path& path, std::span<const StepRecord> records,
                           bool force = true) {
    auto out = csv::open_for_write(path, force);
    write_step_log(out, records);
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline std::vector<StepRecord> read_step_log(std::istream& in, const std::string& source = "<input>") {
    std::string line;
    if (!std::getline(in, line)) throw ParseError(source, 1, 0, "empty file");
    if (csv::strip_cr(line) != kStepLogHeader) {
        throw ParseError(source, 1, 0, std::string("expected header '") + kStepLogHeader + "'");
    }
    std::vector<StepRecord> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        const auto text = csv::strip_cr(line);
        if (csv::trim(text).empty()) continue;
        const auto f = csv::split(text);
        if (f.size() != 8) throw ParseError(source, lineno, 0, "expected 8 fields");
        auto bad = [&](std::size_t col) { return ParseError(source, lineno, col, "malformed field"); };

        StepRecord r;
        const auto t = csv::parse_uint(f[0]);
        const auto alpha = csv::parse_double(f[1]);
        const auto lambda = csv::parse_double(f[2]);
        const auto beta = csv::parse_double(f[3]);
        const auto card = csv::parse_uint(f[4]);
        if (!t) throw bad(1);
        if (!alpha) throw bad(2);
        if (!lambda) throw bad(3);
        if (!beta) throw bad(4);
        if (!card) throw bad(5);
        r.t = *t;
        r.alpha = *alpha;
        r.lambda = *lambda;
        r.beta_prev = *beta;
        r.cardinality = *card;
        for (auto idx : csv::split(f[5], ';')) {
            const auto v = csv::parse_uint(idx);
            if (!v || *v == 0) throw bad(6);
            r.emitted_set.push_back(*v - 1);
        }
        if (r.emitted_set.size() != r.cardinality) {
            throw ParseError(source, lineno, 5, "cardinality does not match the set");
        }
        if (csv::trim(f[6]) != "NA") {
            const auto v = csv::parse_uint(f[6]);
            if (!v || *v == 0) throw bad(7);
            r.best_next = *v - 1;
        }
        const auto cov = csv::trim(f[7]);
        if (cov == "1") r.covered = true;
        else if (cov == "0") r.covered = false;
        else if (cov != "NA") throw bad(8);
        if (!out.empty() && r.t <= out.back().t) throw ParseError(source, lineno, 1, "time index not increasing");
        out.push_back(std::move(r));
    }
    return out;
}

inline std::vector<StepRecord> read_step_log(const std::filesystem::path& path) {
    auto in = csv::open_for_read(path);
    return read_step_log(in, path.string());
}

}  // namespace mps
