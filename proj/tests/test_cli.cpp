#include "cli.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <sstream>

using mps::testing::read_text;
using mps::testing::TempDir;
using mps::testing::write_text;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = mps::cli::run_cli(std::move(args), out, err);
    return {code, out.str(), err.str()};
}

std::size_t line_count(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST(CliSimulate, WritesMatrixAndIsReproducible) {
    TempDir dir("sim");
    const auto out = (dir / "a.csv").string();
    ASSERT_EQ(cli({"simulate", "--design", "a", "--T", "2000", "--m", "10", "--seed", "1", "--out", out}).code, 0);
    const auto L = mps::ingest_csv(out);
    EXPECT_EQ(L.rows(), 2000u);
    EXPECT_EQ(L.models(), 10u);
    const auto first = read_text(out);

    EXPECT_EQ(cli({"simulate", "--design", "a", "--T", "2000", "--m", "10", "--seed", "1", "--out", out}).code, 2);
    ASSERT_EQ(cli({"simulate", "--design", "a", "--T", "2000", "--m", "10", "--seed", "1", "--out", out, "--force"}).code, 0);
    EXPECT_EQ(read_text(out), first);
    ASSERT_EQ(cli({"--seed", "1", "simulate", "--design", "a", "--T", "2000", "--m", "10", "--out", (dir / "b.csv").string()}).code, 0);
    EXPECT_EQ(read_text(dir / "b.csv"), first);
}

TEST(CliSimulate, Errors) {
    TempDir dir("simerr");
    const auto r = cli({"simulate", "--design", "c", "--m", "1", "--out", (dir / "c.csv").string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("at least 2"), std::string::npos);
    EXPECT_EQ(cli({"simulate", "--design", "z", "--out", (dir / "c.csv").string()}).code, 1);
    EXPECT_EQ(cli({"simulate", "--design", "a"}).code, 1);
    EXPECT_EQ(cli({}).code, 1);
    EXPECT_EQ(cli({"--help"}).code, 0);
}

TEST(CliSimulateArma, WritesLossesAndSeries) {
    TempDir dir("arma");
    ASSERT_EQ(cli({"simulate-arma", "--T", "120", "--switch-point", "60", "--seed", "3", "--out",
                   (dir / "l.csv").string(), "--series-out", (dir / "y.csv").string()})
                  .code,
              0);
    EXPECT_EQ(mps::ingest_csv(dir / "l.csv").models(), 10u);
    const auto y = mps::ingest_csv(dir / "y.csv");
    EXPECT_EQ(y.rows(), 120u);
    EXPECT_EQ(y.labels(), std::vector<std::string>{"y"});
}

TEST(CliRun, DefaultsProduceOneRecordPerOnlineRow) {
    TempDir dir("run");
    const auto losses = (dir / "l.csv").string(), steps = (dir / "s.csv").string();
    ASSERT_EQ(cli({"simulate", "--design", "a", "--T", "620", "--m", "4", "--seed", "5", "--out", losses}).code, 0);
    const auto r = cli({"run", "--losses", losses, "--train-n", "500", "--tau", "100", "--seed", "2", "--out", steps});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto log = mps::read_step_log(std::filesystem::path(steps));
    EXPECT_EQ(log.size(), 120u);
    for (const auto& rec : log) {
        const double k = rec.alpha * 20;
        EXPECT_EQ(rec.alpha, std::round(k) / 20.0);
        EXPECT_LE(rec.alpha, 0.95);
    }
}

TEST(CliRun, PreconditionErrors) {
    TempDir dir("runerr");
    const auto losses = (dir / "l.csv").string();
    ASSERT_EQ(cli({"simulate", "--design", "a", "--T", "200", "--m", "3", "--out", losses}).code, 0);
    auto r = cli({"run", "--losses", losses, "--train-n", "50", "--tau", "100", "--out", (dir / "s.csv").string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("train-n"), std::string::npos);
    r = cli({"run", "--losses", losses, "--train-n", "200", "--tau", "100", "--out", (dir / "s.csv").string()});
    EXPECT_EQ(r.code, 2);
    r = cli({"run", "--losses", (dir / "missing.csv").string(), "--out", (dir / "s.csv").string()});
    EXPECT_EQ(r.code, 2);
    write_text(dir / "bad.csv", "m1,m2\n1,x\n");
    r = cli({"run", "--losses", (dir / "bad.csv").string(), "--out", (dir / "s.csv").string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("line 2, column 2"), std::string::npos);
}

TEST(CliRun, ConfigFileDefaultsAndFlagPrecedence) {
    TempDir dir("cfg");
    const auto losses = (dir / "l.csv").string();
    ASSERT_EQ(cli({"simulate", "--design", "b", "--T", "90", "--m", "3", "--seed", "4", "--out", losses}).code, 0);
    write_text(dir / "run.cfg", "# desk run\ntrain_n = 40\ntau=20\nB=20\nseed=3\nalpha-bar=0.5\n");
    const auto cfg = (dir / "run.cfg").string();

    ASSERT_EQ(cli({"run", "--config", cfg, "--losses", losses, "--out", (dir / "a.csv").string()}).code, 0);
    ASSERT_EQ(cli({"run", "--losses", losses, "--train-n", "40", "--tau", "20", "--B", "20", "--seed", "3",
                   "--alpha-bar", "0.5", "--out", (dir / "b.csv").string()})
                  .code,
              0);
    EXPECT_EQ(read_text(dir / "a.csv"), read_text(dir / "b.csv"));
    EXPECT_EQ(mps::read_step_log(dir / "a.csv").size(), 50u);

    ASSERT_EQ(cli({"run", "--config", cfg, "--losses", losses, "--train-n", "60", "--out", (dir / "c.csv").string()}).code, 0);
    EXPECT_EQ(mps::read_step_log(dir / "c.csv").size(), 30u);

    write_text(dir / "bad.cfg", "bogus-key=1\n");
    EXPECT_EQ(cli({"run", "--config", (dir / "bad.cfg").string(), "--losses", losses, "--out",
                   (dir / "d.csv").string()})
                  .code,
              1);
    EXPECT_EQ(cli({"run", "--config", (dir / "nope.cfg").string(), "--losses", losses, "--out",
                   (dir / "d.csv").string()})
                  .code,
              1);
}

TEST(CliMcs, DominantColumnAndThresholds) {
    TempDir dir("mcs");
    std::string text = "good,bad,mid\n";
    mps::Rng rng(1);
    for (int r = 0; r < 30; ++r) text += "1," + std::to_string(3 + mps::uniform01(rng)) + ",2\n";
    write_text(dir / "l.csv", text);
    const auto losses = (dir / "l.csv").string();

    auto r = cli({"mcs", "--losses", losses, "--B", "50", "--beta", "0.2"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("1,good,1,1\n"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("set=1\n"), std::string::npos);

    r = cli({"mcs", "--losses", losses, "--beta", "0"});
    EXPECT_NE(r.out.find("set=1;2;3\n"), std::string::npos);
    r = cli({"mcs", "--losses", losses, "--beta", "1.0"});
    EXPECT_NE(r.out.find("set=1\n"), std::string::npos);
    EXPECT_EQ(line_count(r.out), 5u);

    EXPECT_EQ(cli({"mcs", "--losses", losses, "--beta", "1.5"}).code, 2);
}

TEST(CliReport, PipelineAndErrors) {
    TempDir dir("rep");
    const auto losses = (dir / "l.csv").string(), steps = (dir / "s.csv").string();
    const auto report = (dir / "r.csv").string();
    ASSERT_EQ(cli({"simulate", "--design", "a", "--T", "260", "--m", "4", "--seed", "8", "--out", losses}).code, 0);
    ASSERT_EQ(cli({"run", "--losses", losses, "--train-n", "60", "--tau", "30", "--B", "30", "--out", steps}).code, 0);
    auto r = cli({"report", "--steps", steps, "--losses", losses, "--out", report});
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream in(read_text(report));
    const auto rows = mps::metrics::read_report(in);
    EXPECT_EQ(rows.size(), 200u);

    EXPECT_EQ(cli({"report", "--steps", steps, "--losses", losses, "--out", report}).code, 2);
    ASSERT_EQ(cli({"report", "--steps", steps, "--losses", losses, "--window", "1", "--out", report, "--force"}).code, 0);
    std::istringstream raw(read_text(report));
    const auto raw_rows = mps::metrics::read_report(raw);
    const auto log = mps::read_step_log(std::filesystem::path(steps));
    for (std::size_t k = 0; k + 1 < raw_rows.size(); ++k) {
        EXPECT_EQ(raw_rows[k].miscoverage_w100, *log[k].covered ? 0.0 : 1.0);
    }
    EXPECT_TRUE(std::isnan(raw_rows.back().miscoverage_w100));

    r = cli({"report", "--steps", steps, "--out", (dir / "x.csv").string()});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("--losses"), std::string::npos);
    ASSERT_EQ(cli({"report", "--steps", steps, "--no-loss-ranges", "--out", (dir / "x.csv").string()}).code, 0);

    write_text(dir / "short.csv", "m1,m2,m3,m4\n1,2,3,4\n");
    EXPECT_EQ(cli({"report", "--steps", steps, "--losses", (dir / "short.csv").string(), "--out",
                   (dir / "y.csv").string()})
                  .code,
              2);
}
