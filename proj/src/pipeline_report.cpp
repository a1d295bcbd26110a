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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "qdiff/pipeline.hpp"

namespace qdiff::pipeline {

namespace {

std::string run_id_of(const RunSummary& r) { return r.metrics.value("run_id", r.directory.filename().string()); }

std::optional<RunSummary> load_run(const std::filesystem::path& dir) {
    const auto metrics = dir / "metrics.json";
    if (!std::filesystem::is_regular_file(metrics)) return std::nullopt;
    RunSummary run{dir, read_json_file(metrics), std::nullopt};
    if (std::filesystem::is_regular_file(dir / "train_metrics.json")) run.train_metrics = read_json_file(dir / "train_metrics.json");
    return run;
}

std::string fmt(double v, int precision = 4) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(precision) << v;
    return s.str();
}

double number_or(const Json& node, const char* key, double fallback) {
    return node.contains(key) && node.at(key).is_number() ? node.at(key).get<double>() : fallback;
}

}  // namespace

std::vector<RunSummary> collect_runs(const std::filesystem::path& root) {
    std::vector<RunSummary> runs;
    if (!std::filesystem::is_directory(root)) return runs;
    if (auto r = load_run(root)) runs.push_back(std::move(*r));
    std::vector<std::filesystem::path> children;
    for (const auto& entry : std::filesystem::directory_iterator(root))
        if (entry.is_directory()) children.push_back(entry.path());
    std::sort(children.begin(), children.end());
    for (const auto& dir : children)
        if (auto r = load_run(dir)) runs.push_back(std::move(*r));
    std::stable_sort(runs.begin(), runs.end(), [](const RunSummary& a, const RunSummary& b) {
        const std::string ia = run_id_of(a), ib = run_id_of(b);
        return ia != ib ? ia < ib : a.directory < b.directory;
    });
    return runs;
}

void check_run_digests(const RunSummary& run, bool force) {
    if (force) return;
    const std::string digest = run.metrics.value("config_digest", "");
    std::vector<std::pair<std::string, std::string>> others;
    if (run.train_metrics) others.emplace_back("train_metrics.json", run.train_metrics->value("config_digest", ""));
    const auto oracle = run.directory / "oracle_report.json";
    if (std::filesystem::is_regular_file(oracle)) others.emplace_back("oracle_report.json", read_json_file(oracle).value("config_digest", ""));
    for (const auto& [file, d] : others)
        if (d != digest)
            throw std::invalid_argument("run " + run.directory.string() + ": " + file + " has config digest " + d +
                                        " but metrics.json has " + digest + " (use --force to aggregate anyway)");
}

void write_report(const std::vector<RunSummary>& runs, const std::filesystem::path& out, std::ostream& table,
                  std::size_t histogram_bins) {
    std::ostringstream summary, histogram, losses;
    summary << std::setprecision(17)
            << "run_id,config_digest,metric,count,noisy_mean,denoised_mean,baseline_mean,improvement_mean,"
               "improvement_se,sign_test_p,margin_mean,margin_se,final_smoothed_loss\n";
    histogram << std::setprecision(17) << "run_id,config_digest,bin_lo,bin_hi,noisy_count,denoised_count\n";
    losses << std::setprecision(17) << "run_id,config_digest,step,loss,smoothed_loss\n";

    table << std::left << std::setw(16) << "run_id" << std::setw(14) << "metric" << std::setw(7) << "count"
          << std::setw(10) << "noisy" << std::setw(10) << "denoised" << std::setw(20) << "improvement (se)"
          << std::setw(10) << "sign p" << std::setw(20) << "vs baseline (se)" << "loss\n";

    for (const auto& run : runs) {
        const Json& m = run.metrics;
        const std::string id = run_id_of(run);
        const std::string digest = m.value("config_digest", "");
        const std::string metric = m.value("metric", "");
        const Json& imp = m.at("improvement");
        const Json& mar = m.at("margin_vs_baseline");
        const double loss = run.train_metrics ? number_or(*run.train_metrics, "final_smoothed_loss", NAN) : NAN;

        summary << id << ',' << digest << ',' << metric << ',' << m.at("count").get<std::size_t>() << ','
                << m.at("noisy").at("mean").get<double>() << ',' << m.at("denoised").at("mean").get<double>() << ','
                << m.at("baseline").at("mean").get<double>() << ',' << imp.at("mean").get<double>() << ','
                << imp.at("se").get<double>() << ',' << imp.at("sign_test_p").get<double>() << ','
                << mar.at("mean").get<double>() << ',' << mar.at("se").get<double>() << ',';
        if (!std::isnan(loss)) summary << loss;
        summary << '\n';

        table << std::left << std::setw(16) << id << std::setw(14) << metric << std::setw(7)
              << m.at("count").get<std::size_t>() << std::setw(10) << fmt(m.at("noisy").at("mean").get<double>())
              << std::setw(10) << fmt(m.at("denoised").at("mean").get<double>()) << std::setw(20)
              << (fmt(imp.at("mean").get<double>()) + " (" + fmt(imp.at("se").get<double>()) + ")") << std::setw(10)
              << fmt(imp.at("sign_test_p").get<double>(), 3) << std::setw(20)
              << (fmt(mar.at("mean").get<double>()) + " (" + fmt(mar.at("se").get<double>()) + ")")
              << (std::isnan(loss) ? std::string("-") : fmt(loss)) << '\n';

        // Histogram over the per-state values; fidelities live in [0, 1].
        const auto states_path = run.directory / "states.jsonl";
        if (std::filesystem::is_regular_file(states_path)) {
            std::vector<double> noisy, denoised;
            std::ifstream in(states_path);
            std::string line;
            while (std::getline(in, line)) {
                if (line.empty()) continue;
                const Json s = Json::parse(line);
                noisy.push_back(s.at("noisy").get<double>());
                denoised.push_back(s.at("denoised").get<double>());
            }
            double lo = 0.0, hi = 1.0;
            if (metric != "fidelity") {
                hi = 0.0;
                for (double v : noisy) hi = std::max(hi, v);
                for (double v : denoised) hi = std::max(hi, v);
                if (hi == 0.0) hi = 1.0;
            }
            const std::size_t bins = std::max<std::size_t>(histogram_bins, 1);
            std::vector<std::size_t> cn(bins, 0), cd(bins, 0);
            const auto bin_of = [&](double v) {
                const auto k = static_cast<long long>((v - lo) / (hi - lo) * static_cast<double>(bins));
                return static_cast<std::size_t>(std::clamp<long long>(k, 0, static_cast<long long>(bins) - 1));
            };
            for (double v : noisy) ++cn[bin_of(v)];
            for (double v : denoised) ++cd[bin_of(v)];
            for (std::size_t k = 0; k < bins; ++k)
                histogram << id << ',' << digest << ',' << lo + (hi - lo) * static_cast<double>(k) / bins << ','
                          << lo + (hi - lo) * static_cast<double>(k + 1) / bins << ',' << cn[k] << ',' << cd[k] << '\n';
        }

        const auto loss_path = run.directory / "loss.csv";
        if (std::filesystem::is_regular_file(loss_path)) {
            std::ifstream in(loss_path);
            std::string line;
            while (std::getline(in, line)) {
                if (line.empty() || line[0] == '#' || line.rfind("step,", 0) == 0) continue;
                losses << id << ',' << digest << ',' << line << '\n';
            }
        }
    }
    write_text_atomic(out / "report_summary.csv", summary.str());
    write_text_atomic(out / "fidelity_histogram.csv", histogram.str());
    write_text_atomic(out / "loss_curves.csv", losses.str());
}

}  // namespace qdiff::pipeline
