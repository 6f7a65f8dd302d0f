#include "mps/metrics.hpp"
#include "mps/simharness.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using mps::StepRecord;
namespace metrics = mps::metrics;

namespace {

std::vector<StepRecord> records_with(const std::vector<int>& covered, std::size_t first_t = 1) {
    std::vector<StepRecord> out;
    for (std::size_t k = 0; k < covered.size(); ++k) {
        StepRecord r;
        r.t = first_t + k;
        r.emitted_set = {0};
        r.cardinality = 1;
        if (covered[k] >= 0) r.covered = covered[k] == 1;
        out.push_back(r);
    }
    return out;
}

std::vector<StepRecord> records_with_sets(const std::vector<std::vector<std::size_t>>& sets) {
    std::vector<StepRecord> out;
    for (std::size_t k = 0; k < sets.size(); ++k) {
        StepRecord r;
        r.t = k + 1;
        r.emitted_set = sets[k];
        r.cardinality = sets[k].size();
        r.covered = true;
        out.push_back(r);
    }
    return out;
}

}  // namespace

TEST(MovingMiscoverage, AllCoveredIsZero) {
    for (double v : metrics::moving_miscoverage(records_with(std::vector<int>(150, 1)))) EXPECT_EQ(v, 0.0);
}

TEST(MovingMiscoverage, AlternatingIsHalf) {
    std::vector<int> flags;
    for (int k = 0; k < 300; ++k) flags.push_back(k % 2);
    const auto mc = metrics::moving_miscoverage(records_with(flags), 100);
    for (std::size_t k = 99; k < mc.size(); ++k) EXPECT_DOUBLE_EQ(mc[k], 0.5);
}

TEST(MovingMiscoverage, WindowOneIsRawIndicator) {
    const auto mc = metrics::moving_miscoverage(records_with({1, 0, 0, 1, -1}), 1);
    EXPECT_EQ(mc[0], 0.0);
    EXPECT_EQ(mc[1], 1.0);
    EXPECT_EQ(mc[2], 1.0);
    EXPECT_EQ(mc[3], 0.0);
    EXPECT_TRUE(std::isnan(mc[4]));
}

TEST(MovingMiscoverage, PartialWindowsAndSmoothness) {
    mps::Rng rng(1);
    std::vector<int> flags(400);
    for (auto& f : flags) f = mps::uniform01(rng) < 0.2 ? 0 : 1;
    const auto mc = metrics::moving_miscoverage(records_with(flags), 50);
    EXPECT_EQ(mc[0], flags[0] ? 0.0 : 1.0);
    for (std::size_t k = 0; k < mc.size(); ++k) {
        EXPECT_GE(mc[k], 0.0);
        EXPECT_LE(mc[k], 1.0);
        if (k >= 50) { EXPECT_LE(std::fabs(mc[k] - mc[k - 1]), 1.0 / 50 + 1e-12); }
    }
    EXPECT_THROW((void)metrics::moving_miscoverage({}, 10), std::invalid_argument);
    EXPECT_THROW((void)metrics::moving_miscoverage(records_with({1}), 0), std::invalid_argument);
}

TEST(QualitySets, Examples) {
    const auto recs = records_with_sets({{0, 1, 2, 3, 4}, {1, 2, 3}, {0, 1, 2, 3}});
    const auto qs = metrics::quality_sets(recs, 3);
    EXPECT_EQ(qs[2].cardinality, 3u);
    EXPECT_EQ(qs[2].origin, 1u);
    EXPECT_EQ(qs[2].set, (std::vector<std::size_t>{1, 2, 3}));
    EXPECT_EQ(qs[0].cardinality, 5u);

    for (const auto& q : metrics::quality_sets(records_with(std::vector<int>(30, 1)), 20)) {
        EXPECT_EQ(q.cardinality, 1u);
    }
    const auto global = metrics::quality_sets(recs, 50);
    EXPECT_EQ(global.back().origin, 1u);
}

TEST(QualitySets, EarliestTieWins) {
    const auto recs = records_with_sets({{0, 1}, {2}, {3}, {1}});
    const auto qs = metrics::quality_sets(recs, 3);
    EXPECT_EQ(qs[2].origin, 1u);
    EXPECT_EQ(qs[3].origin, 1u);
}

TEST(LossRanges, SingletonAndFullSets) {
    const auto L = mps::testing::from_rows({{3, 1, 2}, {0.5, 4, 2}});
    const auto single = metrics::loss_ranges(records_with_sets({{0}, {2}}), L, 1, 1);
    EXPECT_EQ(single[0].min, 3.0);
    EXPECT_EQ(single[0].max, 3.0);
    EXPECT_EQ(single[1].min, 2.0);
    EXPECT_EQ(single[1].quality_mean, 2.0);

    const auto full = metrics::loss_ranges(records_with_sets({{0, 1, 2}, {0, 1, 2}}), L, 1, 1);
    EXPECT_EQ(full[0].min, 1.0);
    EXPECT_EQ(full[0].max, 3.0);
    EXPECT_EQ(full[1].min, 0.5);
    EXPECT_EQ(full[1].max, 4.0);
    EXPECT_DOUBLE_EQ(full[1].quality_mean, 6.5 / 3);
}

TEST(LossRanges, WindowAverageOfConstantIsConstant) {
    auto L = mps::LossMatrix::with_default_labels(2);
    std::vector<std::vector<std::size_t>> sets;
    for (int k = 0; k < 40; ++k) {
        L.append_row(std::vector<double>{0.75, 0.75});
        sets.push_back({0, 1});
    }
    for (const auto& r : metrics::loss_ranges(records_with_sets(sets), L, 10, 5)) {
        EXPECT_EQ(r.min, 0.75);
        EXPECT_EQ(r.max, 0.75);
        EXPECT_EQ(r.quality_mean, 0.75);
    }
}

TEST(LossRanges, Misalignment) {
    const auto L = mps::testing::from_rows({{3, 1}});
    EXPECT_THROW((void)metrics::loss_ranges(records_with_sets({{0}, {1}}), L, 1, 1), std::invalid_argument);
    EXPECT_THROW((void)metrics::loss_ranges(records_with_sets({{2}}), L, 1, 1), std::invalid_argument);
}

TEST(Report, InvariantsOnEngineRun) {
    mps::MpsConfig cfg;
    cfg.tau = 20;
    cfg.train_n = 40;
    cfg.B = 30;
    const auto L = mps::sim::gen_design({mps::sim::Design::B, 300, 5, 4});
    const auto log = mps::run(L, cfg);
    const auto rows = metrics::build_report(log, &L, 100, 20);
    const auto qs = metrics::quality_sets(log, 20);
    ASSERT_EQ(rows.size(), log.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        EXPECT_EQ(rows[k].t, log[k].t);
        EXPECT_LE(rows[k].loss_min, rows[k].loss_max);
        EXPECT_EQ(rows[k].min_cardinality_w20, rows[k].quality_set.size());
        // quality cardinality is at most the mean over the window holding its origin
        const std::size_t o = qs[k].origin;
        double mean = 0.0;
        for (std::size_t j = o; j <= k; ++j) mean += static_cast<double>(log[j].cardinality);
        EXPECT_LE(static_cast<double>(rows[k].min_cardinality_w20), mean / static_cast<double>(k - o + 1));
    }
}

TEST(Report, WriteReadAndOverwriteRules) {
    mps::testing::TempDir dir("report");
    const auto path = dir / "r.csv";
    metrics::write_report({}, path, false);
    EXPECT_EQ(mps::testing::read_text(path), std::string(metrics::kReportHeader) + "\n");
    EXPECT_THROW(metrics::write_report({}, path, false), std::runtime_error);

    metrics::ReportRow a;
    a.t = 7;
    a.miscoverage_w100 = 0.123456789012345;
    a.mean_cardinality_w100 = 2.0 / 3.0;
    a.min_cardinality_w20 = 2;
    a.quality_set = {1, 4};
    a.loss_min = 0.1;
    a.loss_max = 1.0 / 7.0;
    a.quality_mean_loss = 1e-300;
    metrics::ReportRow b = a;
    b.t = 8;
    b.loss_min = b.loss_max = b.quality_mean_loss = metrics::kNaN;
    metrics::write_report(std::vector<metrics::ReportRow>{a, b}, path, true);

    std::istringstream in(mps::testing::read_text(path));
    const auto back = metrics::read_report(in);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_NEAR(back[0].miscoverage_w100, a.miscoverage_w100, 1e-12);
    EXPECT_NEAR(back[0].mean_cardinality_w100, a.mean_cardinality_w100, 1e-12);
    EXPECT_NEAR(back[0].loss_max, a.loss_max, 1e-12);
    EXPECT_EQ(back[0].quality_set, a.quality_set);
    EXPECT_EQ(back[0].quality_mean_loss, 1e-300);
    EXPECT_TRUE(std::isnan(back[1].loss_min));
}
