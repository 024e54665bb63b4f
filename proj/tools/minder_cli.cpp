// SPDX-License-Identifier: Apache-2.0
//
// Command-line driver for the faulty-machine detection toolkit.
//
// Typical run layout (each command writes under --run):
//   corpus/         simulate
//   tensors/        preprocess
//   models/         train
//   priority.txt    prioritize
//   alerts.jsonl    detect
//   eval_<p>.json   evaluate
//   report.md       report
//
// Exit codes: 0 success (detect: no alert), 2 detect found alert(s), 1 error.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "minder/pipeline.hpp"
#include "minder/tensor_cache.hpp"

namespace fs = std::filesystem;
using namespace minder;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string run_dir = "runs/default";
};

Config load_config(const CommonOpts& common) {
    Config config = Config::defaults();
    if (!common.config_path.empty()) apply_config_file(config, common.config_path);
    return config;
}

void write_timings(const fs::path& path, const std::string& command,
                   const std::map<std::string, double>& seconds, double total) {
    nlohmann::json j;
    j["command"] = command;
    j["total_seconds"] = total;
    nlohmann::json per;
    for (const auto& [k, v] : seconds) per[k] = v;
    j["seconds"] = per;
    std::ofstream out(path);
    out << j.dump(2) << '\n';
}

int run_simulate(const CommonOpts& common, std::size_t tasks, std::uint64_t seed,
                 double noise_sigma, const std::string& fault_mix, const std::string& out_dir) {
    Config config = load_config(common);
    CorpusSpec spec = config.corpus;
    if (tasks != 0) spec.n_tasks = tasks;
    if (seed != 0) spec.seed = seed;
    if (noise_sigma >= 0.0) spec.noise_sigma_norm = noise_sigma;
    if (fault_mix == "none") spec.fault_mix.clear();
    else if (fault_mix == "table") spec.fault_mix = default_fault_mix();
    else if (!fault_mix.empty()) throw ConfigError("fault mix must be `table` or `none`");

    const fs::path dir = out_dir.empty() ? fs::path(common.run_dir) / "corpus" : fs::path(out_dir);
    const auto waveforms =
        filter_waveforms(default_waveforms(default_catalog(), spec.noise_sigma_norm),
                         config.active_metrics);
    if (waveforms.empty()) throw ConfigError("no active metrics have simulator waveforms");
    const auto profiles = filter_profiles(default_profiles(), config.active_metrics);
    for (auto it = spec.fault_mix.begin(); it != spec.fault_mix.end();) {
        it = profiles.count(it->first) == 0 ? spec.fault_mix.erase(it) : std::next(it);
    }
    CorpusPlan plan = write_corpus(spec, waveforms, profiles, dir);
    std::size_t faulty = 0;
    for (const auto& t : plan.tasks) faulty += t.fault.has_value() ? 1 : 0;
    std::cout << "wrote " << plan.tasks.size() << " tasks (" << faulty << " faulty) to " << dir
              << '\n';
    return 0;
}

int run_preprocess(const CommonOpts& common, const std::string& corpus, const std::string& out_dir) {
    Config config = load_config(common);
    const fs::path corpus_dir = corpus.empty() ? fs::path(common.run_dir) / "corpus" : fs::path(corpus);
    const fs::path dir = out_dir.empty() ? fs::path(common.run_dir) / "tensors" : fs::path(out_dir);
    fs::create_directories(dir);
    const auto ids = list_corpus_tasks(corpus_dir);
    parallel_for(ids.size(), 8, [&](std::size_t i) {
        RawTraceSet raw = read_corpus_task(corpus_dir, ids[i]);
        auto tensors = preprocess_task(raw, config);
        if (!tensors.empty()) save_tensors(tensors, dir / (ids[i] + ".tns"));
    });
    std::cout << "preprocessed " << ids.size() << " tasks into " << dir << '\n';
    return 0;
}

int run_train(const CommonOpts& common, const std::string& corpus, const std::string& out_dir,
              std::size_t max_windows, bool with_integrated, std::size_t restarts) {
    Config config = load_config(common);
    const fs::path corpus_dir = corpus.empty() ? fs::path(common.run_dir) / "corpus" : fs::path(corpus);
    const fs::path dir = out_dir.empty() ? fs::path(common.run_dir) / "models" : fs::path(out_dir);
    const auto t0 = std::chrono::steady_clock::now();
    auto summaries = train_corpus_models(corpus_dir, config, dir, max_windows, 8, restarts);
    std::map<std::string, double> seconds;
    for (const auto& s : summaries) {
        std::cout << metric_name(s.metric) << ": " << s.windows << " windows, best loss "
                  << s.best_loss << " (epoch " << s.best_epoch << ", " << s.seconds << " s)\n";
        seconds[std::string(metric_name(s.metric))] = s.seconds;
    }
    if (with_integrated) {
        TrainSummary s = train_integrated_model(corpus_dir, config, dir, max_windows);
        std::cout << "integrated: " << s.windows << " windows, best loss " << s.best_loss << " ("
                  << s.seconds << " s)\n";
        seconds["integrated"] = s.seconds;
    }
    const double total =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_timings(dir / "timings.json", "train", seconds, total);
    std::cout << "models written to " << dir << '\n';
    return 0;
}

int run_prioritize(const CommonOpts& common, const std::string& corpus, const std::string& out_file,
                   std::size_t max_depth, std::size_t min_samples_leaf) {
    Config config = load_config(common);
    const fs::path corpus_dir = corpus.empty() ? fs::path(common.run_dir) / "corpus" : fs::path(corpus);
    const fs::path path =
        out_file.empty() ? fs::path(common.run_dir) / "priority.txt" : fs::path(out_file);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    PrioritizeResult result = prioritize_corpus(corpus_dir, config, max_depth, min_samples_leaf);
    save_priority(result.priority, path);
    save_tree_text(result.tree, path.has_parent_path() ? path.parent_path() / "tree.txt"
                                                       : fs::path("tree.txt"));
    std::cout << "trained on " << result.n_instances << " spans (" << result.n_abnormal
              << " abnormal)\npriority:\n";
    for (const auto& e : result.priority.ordered) {
        std::cout << "  " << metric_name(e.metric);
        if (e.min_depth >= 0) std::cout << "  depth " << e.min_depth;
        std::cout << '\n';
    }
    return 0;
}

int run_detect(const CommonOpts& common, const std::string& corpus, const std::string& tensors_dir,
               const std::string& models_dir, const std::string& priority_file,
               const std::string& pipeline_text, const std::string& out_file,
               std::optional<double> threshold, std::optional<double> continuity,
               const std::string& distance, const std::string& embedding, bool scan_all) {
    Config config = load_config(common);
    if (threshold) config.detector.similarity_threshold = *threshold;
    if (continuity) config.detector.continuity_seconds = *continuity;
    if (!distance.empty()) config.detector.distance_kind = parse_distance_kind(distance);
    if (!embedding.empty()) config.detector.embedding_source = parse_embedding_source(embedding);
    if (scan_all) config.detector.scan_all_metrics = true;

    const PipelineKind kind = parse_pipeline(pipeline_text);
    const fs::path corpus_dir = corpus.empty() ? fs::path(common.run_dir) / "corpus" : fs::path(corpus);
    const fs::path mdir = models_dir.empty() ? fs::path(common.run_dir) / "models" : fs::path(models_dir);
    const fs::path out_path =
        out_file.empty() ? fs::path(common.run_dir) / "alerts.jsonl" : fs::path(out_file);

    PriorityList priority;
    if (!priority_file.empty()) {
        priority = load_priority(priority_file);
    } else if (fs::exists(fs::path(common.run_dir) / "priority.txt")) {
        priority = load_priority(fs::path(common.run_dir) / "priority.txt");
    } else {
        for (MetricKind m : config.active_metrics) priority.ordered.push_back({m, -1});
    }

    std::map<MetricKind, VaeModel> models;
    VaeModel integrated;
    const VaeModel* integrated_ptr = nullptr;
    if (kind == PipelineKind::Minder || kind == PipelineKind::Con) {
        models = load_corpus_models(mdir, config.active_metrics);
    } else if (kind == PipelineKind::Int) {
        integrated = load_model(integrated_model_path(mdir));
        integrated_ptr = &integrated;
    }

    // the tensor cache, when present, takes precedence over re-reading CSVs
    CorpusDetection detection;
    if (!tensors_dir.empty()) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(tensors_dir)) {
            if (entry.path().extension() == ".tns") files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        std::vector<SessionResult> results(files.size());
        std::vector<std::pair<double, double>> grids(files.size());
        parallel_for(files.size(), 8, [&](std::size_t i) {
            auto tensors = load_tensors(files[i]);
            if (tensors.empty()) return;
            grids[i] = {tensors.front().grid_start, tensors.front().grid_interval};
            switch (kind) {
                case PipelineKind::Minder:
                    results[i] = detect_session(tensors, models, priority, config.detector);
                    break;
                case PipelineKind::Md:
                    results[i] = md_session(tensors, config.detector);
                    break;
                case PipelineKind::Raw:
                    results[i] = raw_session(tensors, priority, config.detector);
                    break;
                case PipelineKind::Con:
                    results[i] = con_session(tensors, models, config.detector);
                    break;
                case PipelineKind::Int:
                    results[i] = int_session(tensors, *integrated_ptr, config.detector);
                    break;
            }
        });
        for (std::size_t i = 0; i < files.size(); ++i) {
            detection.alerts_by_task[files[i].stem().string()] = results[i].alerts;
            for (const Alert& a : results[i].alerts)
                detection.alert_rows.push_back(alert_to_json(a, grids[i].first, grids[i].second));
        }
    } else {
        detection = detect_corpus(corpus_dir, config, models, integrated_ptr, priority, kind);
    }

    if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
    write_alerts_jsonl(detection.alert_rows, out_path);
    const fs::path timings_dir = out_path.has_parent_path() ? out_path.parent_path() : fs::path(".");
    write_timings(timings_dir / ("timings_detect_" + pipeline_text + ".json"), "detect",
                  detection.seconds_by_task, detection.total_seconds);

    std::size_t alerted_tasks = 0;
    for (const auto& [task, alerts] : detection.alerts_by_task)
        alerted_tasks += alerts.empty() ? 0 : 1;
    std::cout << detection.alert_rows.size() << " alert(s) across " << alerted_tasks
              << " task(s), written to " << out_path << '\n';
    return detection.alert_rows.empty() ? 0 : 2;
}

int run_evaluate(const CommonOpts& common, const std::string& alerts_file,
                 const std::string& corpus, const std::string& pipeline_text,
                 const std::string& out_file) {
    const fs::path corpus_dir = corpus.empty() ? fs::path(common.run_dir) / "corpus" : fs::path(corpus);
    const fs::path alerts_path =
        alerts_file.empty() ? fs::path(common.run_dir) / "alerts.jsonl" : fs::path(alerts_file);

    auto alerts = read_alerts_jsonl(alerts_path);
    std::map<std::string, GroundTruth> truth;
    for (const std::string& id : list_corpus_tasks(corpus_dir)) {
        truth[id] = read_corpus_truth(corpus_dir, id);
    }
    EvalReport report = evaluate(alerts, truth, pipeline_text);
    const fs::path out_path = out_file.empty()
                                  ? fs::path(common.run_dir) / ("eval_" + pipeline_text + ".json")
                                  : fs::path(out_file);
    if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
    std::ofstream out(out_path);
    out << report_to_json(report).dump(2) << '\n';
    std::cout << render_report_table({report}, false) << '\n'
              << render_fault_type_table(report, false);
    std::cout << "report written to " << out_path << '\n';
    return 0;
}

int run_report(const CommonOpts& common, const std::string& out_file) {
    const fs::path run_dir(common.run_dir);
    std::vector<EvalReport> reports;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(run_dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("eval_", 0) == 0 && entry.path().extension() == ".json")
            files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& path : files) {
        std::ifstream in(path);
        nlohmann::json j;
        in >> j;
        reports.push_back(report_from_json(j));
    }
    if (reports.empty()) {
        std::cerr << "no eval_*.json files under " << run_dir << '\n';
        return 1;
    }
    const fs::path out_path = out_file.empty() ? run_dir / "report.md" : fs::path(out_file);
    std::ofstream out(out_path);
    out << "# Detection evaluation\n\n## Pipeline comparison\n\n"
        << render_report_table(reports, true);
    for (const EvalReport& r : reports) {
        if (r.per_fault_type.empty()) continue;
        out << "\n## Per fault type: " << r.pipeline << "\n\n"
            << render_fault_type_table(r, true);
    }
    std::cout << "report written to " << out_path << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"faulty-machine detection toolkit for distributed training telemetry"};
    app.require_subcommand(1);

    CommonOpts common;
    app.add_option("--config", common.config_path, "configuration file (INI sections)");
    app.add_option("--run", common.run_dir, "run directory for default artifact paths");

    auto* sim = app.add_subcommand("simulate", "generate a labeled synthetic corpus");
    std::size_t sim_tasks = 0;
    std::uint64_t sim_seed = 0;
    double sim_noise = -1.0;
    std::string sim_mix, sim_out;
    sim->add_option("--tasks", sim_tasks, "number of tasks");
    sim->add_option("--seed", sim_seed, "corpus seed");
    sim->add_option("--noise", sim_noise, "noise sigma (normalized units)");
    sim->add_option("--fault-mix", sim_mix, "`table` or `none`");
    sim->add_option("--out", sim_out, "corpus directory");

    auto* pre = app.add_subcommand("preprocess", "align + normalize a corpus into a tensor cache");
    std::string pre_corpus, pre_out;
    pre->add_option("--corpus", pre_corpus, "corpus directory");
    pre->add_option("--out", pre_out, "tensor cache directory");

    auto* train = app.add_subcommand("train", "train per-metric denoising models");
    std::string train_corpus, train_out;
    std::size_t train_windows = 4096, train_restarts = 2;
    bool train_int = false;
    train->add_option("--corpus", train_corpus, "training corpus directory");
    train->add_option("--out", train_out, "models directory");
    train->add_option("--max-windows", train_windows, "window cap per metric");
    train->add_option("--restarts", train_restarts, "seeded restarts per metric");
    train->add_flag("--integrated", train_int, "also train the all-metrics model");

    auto* prio = app.add_subcommand("prioritize", "learn the metric priority order");
    std::string prio_corpus, prio_out;
    std::size_t prio_depth = 7, prio_leaf = 1;
    prio->add_option("--corpus", prio_corpus, "labeled corpus directory");
    prio->add_option("--out", prio_out, "priority file");
    prio->add_option("--max-depth", prio_depth, "tree depth limit");
    prio->add_option("--min-leaf", prio_leaf, "min samples per leaf");

    auto* det = app.add_subcommand("detect", "run a detection pipeline over a corpus");
    std::string det_corpus, det_tensors, det_models, det_priority, det_out;
    std::string det_pipeline = "minder", det_distance, det_embedding;
    double det_threshold = -1.0, det_continuity = -1.0;
    bool det_scan_all = false;
    det->add_option("--corpus", det_corpus, "corpus directory");
    det->add_option("--tensors", det_tensors, "preprocessed tensor cache directory");
    det->add_option("--models", det_models, "models directory");
    det->add_option("--priority", det_priority, "priority file");
    det->add_option("--pipeline", det_pipeline, "minder | md | raw | con | int");
    det->add_option("--out", det_out, "alerts jsonl path");
    det->add_option("--similarity-threshold", det_threshold, "normal-score cutoff");
    det->add_option("--continuity", det_continuity, "continuity threshold in seconds");
    det->add_option("--distance", det_distance, "euclidean | manhattan | chebyshev");
    det->add_option("--embedding", det_embedding, "denoised | latent_mu");
    det->add_flag("--scan-all-metrics", det_scan_all, "do not stop at the first alerting metric");

    auto* eval = app.add_subcommand("evaluate", "score alerts against corpus ground truth");
    std::string eval_alerts, eval_corpus, eval_pipeline = "minder", eval_out;
    eval->add_option("--alerts", eval_alerts, "alerts jsonl path");
    eval->add_option("--corpus", eval_corpus, "corpus directory with truth files");
    eval->add_option("--pipeline", eval_pipeline, "label recorded in the report");
    eval->add_option("--out", eval_out, "eval json path");

    auto* rep = app.add_subcommand("report", "aggregate eval_*.json into report.md");
    std::string rep_out;
    rep->add_option("--out", rep_out, "markdown path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed())
            return run_simulate(common, sim_tasks, sim_seed, sim_noise, sim_mix, sim_out);
        if (pre->parsed()) return run_preprocess(common, pre_corpus, pre_out);
        if (train->parsed())
            return run_train(common, train_corpus, train_out, train_windows, train_int,
                             train_restarts);
        if (prio->parsed())
            return run_prioritize(common, prio_corpus, prio_out, prio_depth, prio_leaf);
        if (det->parsed())
            return run_detect(common, det_corpus, det_tensors, det_models, det_priority,
                              det_pipeline, det_out,
                              det_threshold >= 0.0 ? std::optional<double>(det_threshold)
                                                   : std::nullopt,
                              det_continuity >= 0.0 ? std::optional<double>(det_continuity)
                                                    : std::nullopt,
                              det_distance, det_embedding, det_scan_all);
        if (eval->parsed())
            return run_evaluate(common, eval_alerts, eval_corpus, eval_pipeline, eval_out);
        if (rep->parsed()) return run_report(common, rep_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
