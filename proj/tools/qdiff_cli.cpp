// Copyright 2026 The qdiff Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// qdiff command line. Exit codes: 0 success, 1 invalid input or
// configuration, 2 numerical failure or a failed oracle check.

#include <chrono>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qdiff/pipeline.hpp"

namespace pl = qdiff::pipeline;

namespace {

struct CommonOptions {
    std::string config;
    std::vector<std::string> overrides;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("--config", o.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--set", o.overrides, "override a config leaf, e.g. --set train.steps=2000")->take_all();
    cmd->add_option("--out", o.out, "output directory (overrides config 'out')");
    cmd->add_option("--seed", o.seed, "master seed (overrides config 'seed')");
    cmd->add_option("--threads", o.threads, "worker threads, 0 = all cores");
}

pl::ExperimentConfig build_config(const CommonOptions& o) {
    pl::Json cfg = pl::resolve_config(pl::load_config_file(o.config));
    for (const auto& s : o.overrides) pl::apply_override(cfg, s);
    if (o.seed) cfg["seed"] = *o.seed;
    if (!o.out.empty()) cfg["out"] = o.out;
    if (o.threads) cfg["threads"] = *o.threads;
    return pl::ExperimentConfig::from_json(cfg);
}

void save_resolved(const pl::ExperimentConfig& cfg, const std::string& command) {
    pl::Json j = cfg.source;
    j["config_digest"] = cfg.digest;
    pl::write_text_atomic(cfg.out / ("config." + command + ".json"), pl::dump_json(j));
}

void print_eval(const pl::Json& m) {
    const auto& imp = m.at("improvement");
    const auto& mar = m.at("margin_vs_baseline");
    std::cout << std::fixed << std::setprecision(4) << "states: " << m.at("count").get<std::size_t>() << " ("
              << m.at("metric").get<std::string>() << ")\n"
              << "noisy mean:      " << m.at("noisy").at("mean").get<double>() << "\n"
              << "denoised mean:   " << m.at("denoised").at("mean").get<double>() << "\n"
              << "baseline mean:   " << m.at("baseline").at("mean").get<double>() << "\n"
              << "improvement:     " << imp.at("mean").get<double>() << " (se " << imp.at("se").get<double>()
              << ", sign-test p " << std::setprecision(4) << imp.at("sign_test_p").get<double>() << ")\n"
              << "vs baseline:     " << mar.at("mean").get<double>() << " (se " << mar.at("se").get<double>() << ")\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"qdiff: score-based denoising of noisy quantum states"};
    app.require_subcommand(1);

    CommonOptions oracle_opts, dataset_opts, train_opts, eval_opts, report_opts;
    std::string train_dataset, eval_dataset, eval_checkpoint, report_dir;
    bool force = false;

    auto* oracle = app.add_subcommand("oracle-check", "analytic and ensemble self-checks of the noise model");
    add_common(oracle, oracle_opts);
    auto* dataset = app.add_subcommand("make-dataset", "sample clean states and the train/held-out split");
    add_common(dataset, dataset_opts);
    auto* train = app.add_subcommand("train", "fit the score network on the training split");
    add_common(train, train_opts);
    train->add_option("--dataset", train_dataset, "dataset file (default OUT/dataset.json)");
    auto* eval = app.add_subcommand("denoise-eval", "corrupt held-out states and denoise them");
    add_common(eval, eval_opts);
    eval->add_option("--dataset", eval_dataset, "dataset file (default OUT/dataset.json)");
    eval->add_option("--checkpoint", eval_checkpoint, "score network (default OUT/checkpoint.qdn)");
    auto* report = app.add_subcommand("report", "summarize runs under a directory");
    add_common(report, report_opts);
    report->add_option("dir", report_dir, "directory holding runs (default OUT)");
    report->add_flag("--force", force, "aggregate runs whose files disagree on the config digest");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (*oracle) {
            const auto cfg = build_config(oracle_opts);
            const auto start = std::chrono::steady_clock::now();
            const pl::OracleReport r = pl::oracle_check(cfg);
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            save_resolved(cfg, "oracle-check");
            pl::write_text_atomic(cfg.out / "oracle_report.json", pl::dump_json(r.to_json(cfg)));
            pl::write_text_atomic(cfg.out / "oracle_timings.json",
                                  pl::dump_json({{"config_digest", cfg.digest}, {"seconds", secs}}));
            for (const auto& c : r.checks)
                std::cout << (c.passed ? "PASS " : "FAIL ") << std::left << std::setw(26) << c.name
                          << std::scientific << std::setprecision(3) << c.value << " (tolerance " << c.tolerance
                          << ")  " << c.detail << '\n';
            if (!r.passed()) {
                for (const auto& c : r.checks)
                    if (!c.passed) std::cerr << "oracle check failed: " << c.name << '\n';
                return 2;
            }
            return 0;
        }
        if (*dataset) {
            const auto cfg = build_config(dataset_opts);
            const pl::Dataset d = pl::make_dataset(cfg);
            save_resolved(cfg, "make-dataset");
            pl::write_dataset(cfg.out / "dataset.json", d);
            std::cout << "wrote " << (cfg.out / "dataset.json").string() << ": " << d.records.size() << " "
                      << d.provenance << " samples (" << d.split("train").size() << " train, "
                      << d.split("held_out").size() << " held out), dim " << d.dim() << '\n';
            return 0;
        }
        if (*train) {
            const auto cfg = build_config(train_opts);
            const auto path = train_dataset.empty() ? cfg.out / "dataset.json" : std::filesystem::path(train_dataset);
            const pl::Dataset d = pl::read_dataset(path);
            save_resolved(cfg, "train");
            const pl::TrainOutcome t = pl::run_train(cfg, d);
            std::cout << "trained " << cfg.train.steps << " steps on " << d.split("train").size()
                      << " samples; checkpoint digest " << t.checkpoint_digest << '\n';
            if (t.metrics.contains("final_smoothed_loss") && t.metrics["final_smoothed_loss"].is_number())
                std::cout << "final smoothed loss " << t.metrics["final_smoothed_loss"].get<double>() << '\n';
            return 0;
        }
        if (*eval) {
            const auto cfg = build_config(eval_opts);
            const auto path = eval_dataset.empty() ? cfg.out / "dataset.json" : std::filesystem::path(eval_dataset);
            const pl::Dataset d = pl::read_dataset(path);
            std::optional<qdiff::ScoreNet> net;
            if (cfg.reverse.source == qdiff::ScoreSource::network) {
                const auto ckpt =
                    eval_checkpoint.empty() ? cfg.out / "checkpoint.qdn" : std::filesystem::path(eval_checkpoint);
                if (!std::filesystem::exists(ckpt))
                    throw std::invalid_argument("checkpoint " + ckpt.string() + " not found");
                net = qdiff::load_checkpoint(ckpt);
            }
            save_resolved(cfg, "denoise-eval");
            const pl::EvalOutcome e = pl::run_denoise_eval(cfg, d, net ? &*net : nullptr);
            print_eval(e.metrics);
            return 0;
        }
        if (*report) {
            const auto cfg = build_config(report_opts);
            const std::filesystem::path dir = report_dir.empty() ? cfg.out : std::filesystem::path(report_dir);
            const auto runs = pl::collect_runs(dir);
            if (runs.empty()) {
                std::cerr << "no runs found in " << dir.string() << '\n';
                return 1;
            }
            for (const auto& r : runs) pl::check_run_digests(r, force);
            pl::write_report(runs, dir, std::cout, cfg.eval.histogram_bins);
            return 0;
        }
    } catch (const qdiff::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
