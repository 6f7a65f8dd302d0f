#pragma once

#include "mps/mps.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace mps::cli {

inline constexpr int kOk = 0;
inline constexpr int kUsageError = 1;
inline constexpr int kDataError = 2;

inline const std::vector<std::string> kSubcommands = {"simulate", "simulate-arma", "run", "mcs", "report"};

/// Reads a flat `key=value` file (blank lines and `#` comments ignored) into
/// `--key=value` arguments.
inline std::vector<std::string> config_arguments(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw CLI::FileError("cannot read config file " + path);
    std::vector<std::string> args;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto text = std::string(csv::trim(csv::strip_cr(line)));
        if (text.empty() || text.front() == '#') continue;
        const auto eq = text.find('=');
        if (eq == std::string::npos) {
            throw CLI::ConversionError("config " + path + ":" + std::to_string(lineno) + ": expected key=value");
        }
        auto key = std::string(csv::trim(std::string_view(text).substr(0, eq)));
        const auto value = std::string(csv::trim(std::string_view(text).substr(eq + 1)));
        std::replace(key.begin(), key.end(), '_', '-');
        args.push_back("--" + key + "=" + value);
    }
    return args;
}

// Config values are spliced in right after the subcommand name so that any
// flag given on the command line, which is parsed later, takes precedence.
inline std::vector<std::string> expand_config(std::vector<std::string> args) {
    std::optional<std::string> path;
    for (std::size_t k = 0; k < args.size(); ++k) {
        if (args[k] == "--config" && k + 1 < args.size()) {
            path = args[k + 1];
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(k), args.begin() + static_cast<std::ptrdiff_t>(k + 2));
            break;
        }
        if (args[k].rfind("--config=", 0) == 0) {
            path = args[k].substr(9);
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(k));
            break;
        }
    }
    if (!path) return args;
    auto extra = config_arguments(*path);
    const auto sub = std::find_if(args.begin(), args.end(), [](const std::string& a) {
        return std::find(kSubcommands.begin(), kSubcommands.end(), a) != kSubcommands.end();
    });
    const auto at = sub == args.end() ? args.end() : sub + 1;
    args.insert(at, extra.begin(), extra.end());
    return args;
}

/// Runs one invocation. `args` excludes the program name.
inline int run_cli(std::vector<std::string> args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Online model prediction sets over loss streams"};
    app.require_subcommand(1);
    app.fallthrough();
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    std::uint64_t seed = 0;
    app.add_option("--seed", seed, "Random seed")->capture_default_str();
    app.add_option("--config", "Flat key=value file of option defaults; flags win");

    // simulate
    auto* sim = app.add_subcommand("simulate", "Generate a designed loss matrix");
    std::string design_tag;
    sim::DesignSpec design;
    std::string sim_out;
    bool sim_force = false;
    sim->add_option("--design", design_tag, "Design a, b or c")->required()->check(CLI::IsMember({"a", "b", "c"}));
    sim->add_option("--T", design.T, "Number of time periods")->capture_default_str();
    sim->add_option("--m", design.m, "Number of models")->capture_default_str();
    sim->add_option("--out", sim_out, "Output loss CSV")->required();
    sim->add_flag("--force", sim_force, "Overwrite an existing output");

    // simulate-arma
    auto* arma = app.add_subcommand("simulate-arma", "Generate the AR/MA forecasting experiment losses");
    sim::ArmaSpec arma_spec;
    std::string arma_out, arma_series_out;
    bool arma_force = false;
    arma->add_option("--T", arma_spec.T, "Series length")->capture_default_str();
    arma->add_option("--switch-point", arma_spec.switch_point, "Last period with the MA term")->capture_default_str();
    arma->add_option("--ar-coef", arma_spec.ar_coef, "AR coefficient")->capture_default_str();
    arma->add_option("--ma-coef", arma_spec.ma_coef, "MA coefficient before the switch")->capture_default_str();
    arma->add_option("--out", arma_out, "Output loss CSV")->required();
    arma->add_option("--series-out", arma_series_out, "Also write the simulated series");
    arma->add_flag("--force", arma_force, "Overwrite existing outputs");

    // run
    auto* run_cmd = app.add_subcommand("run", "Run the online procedure on a loss CSV");
    MpsConfig cfg;
    double grid_step = 0.05;
    std::string run_losses, run_out;
    std::size_t block_len = 0;
    std::size_t progress = 0;
    bool run_force = false;
    run_cmd->add_option("--losses", run_losses, "Input loss CSV")->required();
    run_cmd->add_option("--alpha-bar", cfg.alpha_bar, "Target long-run miscoverage")->capture_default_str();
    run_cmd->add_option("--lambda-max", cfg.lambda_max, "Penalty threshold")->capture_default_str();
    run_cmd->add_option("--c", cfg.c, "Relative step size; gamma = c * lambda-max")->capture_default_str();
    run_cmd->add_option("--tau", cfg.tau, "Beta history length")->capture_default_str();
    run_cmd->add_option("--B", cfg.B, "Bootstrap replicates")->capture_default_str();
    run_cmd->add_option("--grid-step", grid_step, "Spacing of the alpha grid")->capture_default_str();
    run_cmd->add_option("--train-n", cfg.train_n, "Initial training length")->capture_default_str();
    run_cmd->add_option("--block-len", block_len, "Bootstrap block length (default max(2, round(t^(1/3))))");
    run_cmd->add_option("--threads", cfg.threads, "Bootstrap worker threads")->capture_default_str();
    run_cmd->add_option("--progress", progress, "Log every N steps to stderr (0 = quiet)");
    run_cmd->add_option("--out", run_out, "Output step-log CSV")->required();
    run_cmd->add_flag("--force", run_force, "Overwrite an existing output");

    // mcs
    auto* mcs_cmd = app.add_subcommand("mcs", "Offline model confidence set on a loss CSV");
    std::string mcs_losses;
    double mcs_beta = 0.2;
    std::size_t mcs_B = 100, mcs_block = 0;
    unsigned mcs_threads = 1;
    mcs_cmd->add_option("--losses", mcs_losses, "Input loss CSV")->required();
    mcs_cmd->add_option("--beta", mcs_beta, "Nominal miscoverage of the set")->capture_default_str();
    mcs_cmd->add_option("--B", mcs_B, "Bootstrap replicates")->capture_default_str();
    mcs_cmd->add_option("--block-len", mcs_block, "Bootstrap block length");
    mcs_cmd->add_option("--threads", mcs_threads, "Bootstrap worker threads")->capture_default_str();

    // report
    auto* rep = app.add_subcommand("report", "Windowed metrics from a step log");
    std::string rep_steps, rep_losses, rep_out;
    std::size_t window = 100, quality_window = 20;
    bool rep_force = false, loss_ranges = true;
    rep->add_option("--steps", rep_steps, "Step-log CSV")->required();
    rep->add_option("--losses", rep_losses, "Loss CSV the steps were run on");
    rep->add_option("--window", window, "Moving window for miscoverage, cardinality and losses")->capture_default_str();
    rep->add_option("--quality-window", quality_window, "Window of the quality-set minimum")->capture_default_str();
    rep->add_flag("--loss-ranges,!--no-loss-ranges", loss_ranges, "Include loss-range columns (needs --losses)");
    rep->add_option("--out", rep_out, "Output report CSV")->required();
    rep->add_flag("--force", rep_force, "Overwrite an existing output");

    std::vector<std::string> argv_store;
    try {
        argv_store = expand_config(std::move(args));
    } catch (const CLI::Error& e) {
        err << "error: " << e.what() << '\n';
        return kUsageError;
    }
    std::vector<const char*> argv{"mps"};
    for (const auto& a : argv_store) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsageError;
    }

    try {
        if (sim->parsed()) {
            design.design = sim::parse_design(design_tag);
            design.seed = seed;
            write_loss_csv(sim_out, sim::gen_design(design), sim_force);
        } else if (arma->parsed()) {
            arma_spec.seed = seed;
            const auto y = sim::gen_arma_series(arma_spec);
            if (!arma_series_out.empty()) {
                LossMatrix series(std::vector<std::string>{"y"}, y);
                write_loss_csv(arma_series_out, series, arma_force);
            }
            write_loss_csv(arma_out, sim::arma_experiment_losses(y, arma_spec), arma_force);
        } else if (run_cmd->parsed()) {
            cfg.seed = seed;
            cfg.grid = make_grid(grid_step);
            if (block_len > 0) cfg.block_len_override = block_len;
            cfg.validate();
            const auto L = ingest_csv(run_losses);
            std::size_t count = 0;
            const auto log = run(L, cfg, [&](const StepRecord& r) {
                if (progress > 0 && ++count % progress == 0) {
                    err << "t=" << r.t << " alpha=" << r.alpha << " lambda=" << r.lambda
                        << " |C|=" << r.cardinality << '\n';
                }
            });
            write_step_log(run_out, log, run_force);
        } else if (mcs_cmd->parsed()) {
            if (!(mcs_beta >= 0.0 && mcs_beta <= 1.0)) throw std::invalid_argument("--beta must lie in [0, 1]");
            const auto L = ingest_csv(mcs_losses);
            if (L.rows() < 2) throw std::invalid_argument("mcs needs at least 2 loss rows");
            MpsConfig mc;
            mc.B = mcs_B;
            mc.seed = seed;
            mc.threads = mcs_threads;
            if (mcs_block > 0) mc.block_len_override = mcs_block;
            const auto fam = family_at(L, L.rows(), mc);
            const auto set = model_set(fam, mcs_beta);
            out << "model,label,pvalue,in_set\n";
            for (std::size_t i = 0; i < fam.models(); ++i) {
                const bool in = std::binary_search(set.begin(), set.end(), i);
                out << i + 1 << ',' << L.labels()[i] << ',' << csv::format_double(fam.pvalues[i]) << ','
                    << (in ? 1 : 0) << '\n';
            }
            out << "set=";
            for (std::size_t k = 0; k < set.size(); ++k) out << (k ? ";" : "") << set[k] + 1;
            out << '\n';
        } else if (rep->parsed()) {
            if (loss_ranges && rep_losses.empty()) {
                throw CLI::RequiredError("--losses is required for loss ranges (or pass --no-loss-ranges)");
            }
            const auto steps = read_step_log(std::filesystem::path(rep_steps));
            std::optional<LossMatrix> L;
            if (loss_ranges) L = ingest_csv(rep_losses);
            const auto rows = metrics::build_report(steps, L ? &*L : nullptr, window, quality_window);
            metrics::write_report(rows, rep_out, rep_force);
        }
    } catch (const CLI::Error& e) {
        err << "error: " << e.what() << '\n';
        return kUsageError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kDataError;
    }
    return kOk;
}

}  // namespace mps::cli
