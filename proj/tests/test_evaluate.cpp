// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "minder/evaluate.hpp"

using namespace minder;

namespace {

GroundTruth faulty(const std::string& task, const std::string& machine,
                   FaultType type = FaultType::EccError) {
    GroundTruth t;
    t.task_id = task;
    t.faults.push_back({machine, type, 100.0, 300.0});
    return t;
}

GroundTruth clean(const std::string& task) {
    GroundTruth t;
    t.task_id = task;
    return t;
}

Alert alert_for(const std::string& task, const std::string& machine) {
    Alert a;
    a.task_id = task;
    a.machine_id = machine;
    a.metric = MetricKind::CpuUsage;
    a.consecutive_hits = 240;
    a.peak_normal_score = 2.0;
    return a;
}

}  // namespace

TEST(Evaluate, PerfectDetectorOnMixedCorpus) {
    std::map<std::string, GroundTruth> truth;
    std::map<std::string, std::vector<Alert>> alerts;
    for (int i = 0; i < 7; ++i) {
        const std::string id = "f" + std::to_string(i);
        truth[id] = faulty(id, "m1");
        alerts[id] = {alert_for(id, "m1")};
    }
    for (int i = 0; i < 3; ++i) {
        const std::string id = "c" + std::to_string(i);
        truth[id] = clean(id);
    }
    EvalReport r = evaluate(alerts, truth, "minder");
    EXPECT_EQ(r.overall.tp, 7u);
    EXPECT_EQ(r.overall.tn, 3u);
    EXPECT_EQ(r.overall.fn, 0u);
    EXPECT_EQ(r.overall.fp, 0u);
    EXPECT_DOUBLE_EQ(*r.overall.precision(), 1.0);
    EXPECT_DOUBLE_EQ(*r.overall.recall(), 1.0);
    EXPECT_DOUBLE_EQ(*r.overall.f1(), 1.0);
}

TEST(Evaluate, SilentDetectorHasUndefinedPrecision) {
    std::map<std::string, GroundTruth> truth;
    for (int i = 0; i < 7; ++i) truth["f" + std::to_string(i)] = faulty("f" + std::to_string(i), "m1");
    for (int i = 0; i < 3; ++i) truth["c" + std::to_string(i)] = clean("c" + std::to_string(i));
    EvalReport r = evaluate({}, truth);
    EXPECT_EQ(r.overall.tp, 0u);
    EXPECT_EQ(r.overall.fn, 7u);
    EXPECT_EQ(r.overall.tn, 3u);
    EXPECT_EQ(r.overall.fp, 0u);
    EXPECT_FALSE(r.overall.precision().has_value());  // undefined-marked, not zero
    EXPECT_DOUBLE_EQ(*r.overall.recall(), 0.0);
    EXPECT_FALSE(r.overall.f1().has_value());
}

TEST(Evaluate, HandTallyWithWrongMachineCase) {
    std::map<std::string, GroundTruth> truth;
    std::map<std::string, std::vector<Alert>> alerts;
    truth["t0"] = faulty("t0", "m2");           // correct detection
    alerts["t0"] = {alert_for("t0", "m2")};
    truth["t1"] = faulty("t1", "m3");           // wrong machine -> FN
    alerts["t1"] = {alert_for("t1", "m0")};
    truth["t2"] = faulty("t2", "m1");           // silence -> FN
    truth["t3"] = clean("t3");                  // silent clean -> TN
    truth["t4"] = clean("t4");                  // alert on clean -> FP
    alerts["t4"] = {alert_for("t4", "m0")};

    EvalReport r = evaluate(alerts, truth);
    EXPECT_EQ(r.overall.tp, 1u);
    EXPECT_EQ(r.overall.fn, 2u);
    EXPECT_EQ(r.overall.tn, 1u);
    EXPECT_EQ(r.overall.fp, 1u);
    EXPECT_DOUBLE_EQ(*r.overall.precision(), 0.5);
    EXPECT_NEAR(*r.overall.recall(), 1.0 / 3.0, 1e-12);
}

TEST(Evaluate, MetricFieldIsIgnoredForScoring) {
    std::map<std::string, GroundTruth> truth;
    std::map<std::string, std::vector<Alert>> alerts;
    truth["t0"] = faulty("t0", "m1");
    Alert a = alert_for("t0", "m1");
    a.metric = MetricKind::NvlinkBandwidth;  // machine identity is what counts
    alerts["t0"] = {a};
    EvalReport r = evaluate(alerts, truth);
    EXPECT_EQ(r.overall.tp, 1u);
}

TEST(Evaluate, UnknownTaskRejected) {
    std::map<std::string, GroundTruth> truth;
    truth["t0"] = clean("t0");
    std::map<std::string, std::vector<Alert>> alerts;
    alerts["ghost"] = {alert_for("ghost", "m0")};
    EXPECT_THROW(evaluate(alerts, truth), TaskSetMismatch);
}

TEST(Evaluate, PerFaultTypeBreakdown) {
    std::map<std::string, GroundTruth> truth;
    std::map<std::string, std::vector<Alert>> alerts;
    truth["t0"] = faulty("t0", "m1", FaultType::EccError);
    alerts["t0"] = {alert_for("t0", "m1")};
    truth["t1"] = faulty("t1", "m1", FaultType::PcieDowngrading);
    EvalReport r = evaluate(alerts, truth);
    EXPECT_EQ(r.per_fault_type.at(FaultType::EccError).tp, 1u);
    EXPECT_EQ(r.per_fault_type.at(FaultType::PcieDowngrading).fn, 1u);
}

TEST(Evaluate, OrderIndependent) {
    // map-keyed inputs make order irrelevant by construction; verify that a
    // differently-assembled equal set gives identical counts
    std::map<std::string, GroundTruth> truth_a, truth_b;
    std::map<std::string, std::vector<Alert>> alerts_a, alerts_b;
    const std::vector<std::string> ids = {"a", "b", "c", "d"};
    for (const auto& id : ids) {
        truth_a[id] = faulty(id, "m1");
        alerts_a[id] = {alert_for(id, "m1")};
    }
    for (auto it = ids.rbegin(); it != ids.rend(); ++it) {
        truth_b[*it] = faulty(*it, "m1");
        alerts_b[*it] = {alert_for(*it, "m1")};
    }
    EvalReport a = evaluate(alerts_a, truth_a);
    EvalReport b = evaluate(alerts_b, truth_b);
    EXPECT_EQ(a.overall.tp, b.overall.tp);
    EXPECT_EQ(a.overall.fn, b.overall.fn);
}

TEST(EvalReport, JsonRoundTrip) {
    std::map<std::string, GroundTruth> truth;
    std::map<std::string, std::vector<Alert>> alerts;
    truth["t0"] = faulty("t0", "m1");
    alerts["t0"] = {alert_for("t0", "m1")};
    truth["t1"] = clean("t1");
    EvalReport r = evaluate(alerts, truth, "md");
    EvalReport back = report_from_json(report_to_json(r));
    EXPECT_EQ(back.pipeline, "md");
    EXPECT_EQ(back.overall.tp, r.overall.tp);
    EXPECT_EQ(back.per_fault_type.at(FaultType::EccError).tp, 1u);
}

TEST(EvalReport, TableRendersDashForUndefined) {
    EvalReport r;
    r.pipeline = "minder";
    r.n_tasks = 0;
    const std::string table = render_report_table({r}, false);
    EXPECT_NE(table.find('-'), std::string::npos);
}
