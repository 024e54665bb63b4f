// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "minder/lstm.hpp"  // Vec
#include "minder/rng.hpp"
#include "minder/zscore.hpp"

using namespace minder;

namespace {

AlignedTensor tensor_from(const std::vector<Vec>& rows, MetricKind metric = MetricKind::CpuUsage) {
    AlignedTensor t;
    t.task_id = "t";
    t.metric = metric;
    t.normalized = true;
    for (std::size_t i = 0; i < rows.size(); ++i) t.machine_ids.push_back("m" + std::to_string(i));
    for (const Vec& row : rows) t.values.insert(t.values.end(), row.begin(), row.end());
    return t;
}

/// Exhaustive oracle: recompute max |Z| by enumerating every (machine, t).
double max_z_oracle(const std::vector<AlignedTensor>& tensors, MetricKind metric,
                    std::size_t begin, std::size_t end) {
    const AlignedTensor* tensor = nullptr;
    for (const auto& t : tensors)
        if (t.metric == metric) tensor = &t;
    double best = 0.0;
    for (std::size_t t = begin; t < end; ++t) {
        const std::size_t m = tensor->machines();
        double mean = 0.0;
        for (std::size_t i = 0; i < m; ++i) mean += tensor->at(i, t);
        mean /= static_cast<double>(m);
        double var = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double d = tensor->at(i, t) - mean;
            var += d * d;
        }
        const double sd = std::sqrt(var / static_cast<double>(m));
        if (sd < 1e-9) continue;
        for (std::size_t i = 0; i < m; ++i) {
            best = std::max(best, std::abs((tensor->at(i, t) - mean) / sd));
        }
    }
    return best;
}

}  // namespace

TEST(ZScore, EqualMachinesGiveZeros) {
    AlignedTensor t = tensor_from({{0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}});
    for (double z : zscore_per_machine(t, 0)) EXPECT_DOUBLE_EQ(z, 0.0);
}

TEST(ZScore, HandComputedCase) {
    // values {0, 0, 3}: mean 1, population std sqrt(2)
    AlignedTensor t = tensor_from({{0.0}, {0.0}, {3.0}});
    const auto z = zscore_per_machine(t, 0);
    EXPECT_NEAR(z[0], -1.0 / std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(z[1], -1.0 / std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(z[2], 2.0 / std::sqrt(2.0), 1e-12);
}

TEST(ZScore, PermutationEquivariance) {
    AlignedTensor t = tensor_from({{0.1}, {0.9}, {0.4}, {0.3}});
    AlignedTensor p = tensor_from({{0.4}, {0.1}, {0.3}, {0.9}});  // permutation 2,0,3,1
    const auto z = zscore_per_machine(t, 0);
    const auto zp = zscore_per_machine(p, 0);
    // identical up to summation rounding (the mean is accumulated in a
    // different order)
    EXPECT_NEAR(zp[0], z[2], 1e-12);
    EXPECT_NEAR(zp[1], z[0], 1e-12);
    EXPECT_NEAR(zp[2], z[3], 1e-12);
    EXPECT_NEAR(zp[3], z[1], 1e-12);
}

TEST(ZScore, SumZeroUnitVarianceProperty) {
    Rng rng(17);
    for (int rep = 0; rep < 200; ++rep) {
        const std::size_t m = 2 + rng.uniform_index(10);
        std::vector<Vec> rows(m);
        for (auto& row : rows) row = {rng.uniform(0.0, 1.0)};
        AlignedTensor t = tensor_from(rows);
        const auto z = zscore_per_machine(t, 0);
        double sum = 0.0, sq = 0.0;
        for (double v : z) {
            sum += v;
            sq += v * v;
        }
        ASSERT_NEAR(sum, 0.0, 1e-9);
        if (std::any_of(z.begin(), z.end(), [](double v) { return v != 0.0; })) {
            ASSERT_NEAR(sq / static_cast<double>(m), 1.0, 1e-9);
        }
    }
}

TEST(ZScore, IndexOutOfRangeRejected) {
    AlignedTensor t = tensor_from({{0.1}, {0.2}});
    EXPECT_THROW(zscore_per_machine(t, 1), IndexOutOfRange);
}

TEST(MaxZFeature, ZeroDispersionTaskGivesAllZeros) {
    std::vector<AlignedTensor> tensors = {
        tensor_from({{0.5, 0.5}, {0.5, 0.5}}, MetricKind::CpuUsage),
        tensor_from({{0.1, 0.1}, {0.1, 0.1}}, MetricKind::GpuDutyCycle),
    };
    ZScoreFeature f = max_z_feature(tensors, 0, 2, SpanLabel::Normal);
    EXPECT_DOUBLE_EQ(f.per_metric_max_z.at(MetricKind::CpuUsage), 0.0);
    EXPECT_DOUBLE_EQ(f.per_metric_max_z.at(MetricKind::GpuDutyCycle), 0.0);
}

TEST(MaxZFeature, MatchesExhaustiveOracle) {
    Rng rng(23);
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t m = 2 + rng.uniform_index(6);
        const std::size_t steps = 4 + rng.uniform_index(12);
        std::vector<AlignedTensor> tensors;
        for (MetricKind metric : {MetricKind::CpuUsage, MetricKind::MemoryUsage}) {
            std::vector<Vec> rows(m, Vec(steps));
            for (auto& row : rows)
                for (auto& v : row) v = rng.uniform(0.0, 1.0);
            tensors.push_back(tensor_from(rows, metric));
        }
        const std::size_t begin = rng.uniform_index(steps - 1);
        const std::size_t end = begin + 1 + rng.uniform_index(steps - begin - 1) + 0;
        ZScoreFeature f = max_z_feature(tensors, begin, end, SpanLabel::Abnormal);
        for (MetricKind metric : {MetricKind::CpuUsage, MetricKind::MemoryUsage}) {
            ASSERT_NEAR(f.per_metric_max_z.at(metric), max_z_oracle(tensors, metric, begin, end),
                        1e-9);
        }
    }
}

TEST(MaxZFeature, PermutingMachinesLeavesFeatureUnchanged) {
    std::vector<AlignedTensor> a = {tensor_from({{0.1, 0.7}, {0.9, 0.2}, {0.4, 0.4}})};
    std::vector<AlignedTensor> b = {tensor_from({{0.4, 0.4}, {0.1, 0.7}, {0.9, 0.2}})};
    ZScoreFeature fa = max_z_feature(a, 0, 2, SpanLabel::Normal);
    ZScoreFeature fb = max_z_feature(b, 0, 2, SpanLabel::Normal);
    EXPECT_DOUBLE_EQ(fa.per_metric_max_z.at(MetricKind::CpuUsage),
                     fb.per_metric_max_z.at(MetricKind::CpuUsage));
}

TEST(MaxZFeature, UncoveredSpanRejected) {
    std::vector<AlignedTensor> tensors = {tensor_from({{0.1, 0.2}, {0.3, 0.4}})};
    EXPECT_THROW(max_z_feature(tensors, 0, 3, SpanLabel::Normal), SpanUncovered);
    EXPECT_THROW(max_z_feature(tensors, 1, 1, SpanLabel::Normal), SpanUncovered);
}

TEST(MaxZFeature, SingleFaultyMachineDominates) {
    // one machine's CPU dropped mid-span: CpuUsage feature pins at sqrt(M-1)
    std::vector<AlignedTensor> tensors = {
        tensor_from({{0.5, 0.02}, {0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}}, MetricKind::CpuUsage),
        tensor_from({{0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}}, MetricKind::MemoryUsage),
    };
    ZScoreFeature f = max_z_feature(tensors, 0, 2, SpanLabel::Abnormal);
    EXPECT_NEAR(f.per_metric_max_z.at(MetricKind::CpuUsage), std::sqrt(3.0), 1e-12);
    EXPECT_GT(f.per_metric_max_z.at(MetricKind::CpuUsage),
              f.per_metric_max_z.at(MetricKind::MemoryUsage));
}
