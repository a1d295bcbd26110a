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

// Experiment orchestration behind the qdiff command line: configuration,
// dataset generation, training, denoising evaluation, oracle self-checks
// and run reports.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "qdiff/reverse.hpp"

namespace qdiff::pipeline {

using Json = nlohmann::json;

inline constexpr std::string_view kConfigSchema = "qdiff.experiment/1";
inline constexpr std::string_view kDatasetSchema = "qdiff.dataset/1";

/// Every recognised key with its default value.
Json default_config();

/// Overlays `user` on the defaults. Unknown keys and a wrong "schema" value
/// raise std::invalid_argument naming the offending path.
Json resolve_config(const Json& user);

Json load_config_file(const std::filesystem::path& path);

/// Applies "dotted.path=value". The value is parsed as JSON when possible and
/// kept as a string otherwise; the path must already exist in `config`.
void apply_override(Json& config, std::string_view assignment);

/// 16 hex digits of FNV-1a over the canonical dump, with the output
/// directory and thread count removed.
std::string config_digest(const Json& config);

enum class DataSource { haar, toy_gaussian };
enum class Estimator { single, ensemble };

struct DatasetSpec {
    DataSource source = DataSource::haar;
    std::size_t size = 1000;
    double held_out_fraction = 0.2;
    bool gauge_fix = true;  // first amplitude real and non-negative
    double gaussian_mean = 0.0;
    double gaussian_sd = 1.0;
    std::size_t gaussian_dim = 1;
    std::vector<double> corrupt_times;  // forward quantum SDE snapshots
    std::string states_file;            // optional user states instead of sampling
};

struct OracleSpec {
    std::size_t trajectories = 10000;
    double master_dt = 1e-3;
    double ensemble_tolerance = 0.0;  // 0 selects 3 / sqrt(trajectories)
    double decay_tolerance = 1e-6;
    double decay_time = 1.0;
    std::size_t strong_paths = 500;
    double strong_tolerance = 0.05;
    double unitary_dt = 1e-4;
    double unitary_tolerance = 1e-6;
};

struct EvalSpec {
    double t = 0.7;
    Estimator estimator = Estimator::ensemble;
    std::size_t paths = 32;
    std::size_t histogram_bins = 20;
};

/// Typed view of a resolved configuration. Sub-seeds inside `sde`, `train`
/// and `reverse` are filled from the master seed with derive_seed.
struct ExperimentConfig {
    Json source;
    std::string digest;
    std::string run_id;
    std::uint64_t seed = 0;
    unsigned threads = 0;
    std::filesystem::path out;
    int qubits = 1;
    Hamiltonian hamiltonian;
    NoiseModel noise;
    SdeConfig sde;
    OuParams ou;
    TrainConfig train;
    ReverseConfig reverse;
    DatasetSpec dataset;
    OracleSpec oracle;
    EvalSpec eval;

    static ExperimentConfig from_json(const Json& config);
};

/// Purpose labels fed to derive_seed.
std::uint64_t stream_seed(const ExperimentConfig& config, std::string_view purpose);

// ----- file helpers -----

/// Writes through a sibling temporary file and renames it into place.
void write_atomic(const std::filesystem::path& path, const std::function<void(const std::filesystem::path&)>& writer);
void write_text_atomic(const std::filesystem::path& path, const std::string& text);
/// Canonical dump with sorted keys, two-space indent and a trailing newline.
std::string dump_json(const Json& value);
Json read_json_file(const std::filesystem::path& path);

// ----- oracle-check -----

struct CheckResult {
    std::string name;
    double value = 0.0;
    double tolerance = 0.0;
    bool passed = false;
    std::string detail;
};

struct OracleReport {
    std::vector<CheckResult> checks;
    bool passed() const;
    Json to_json(const ExperimentConfig& config) const;
};

OracleReport oracle_check(const ExperimentConfig& config);

// ----- make-dataset -----

struct DatasetRecord {
    std::string split;  // "train" or "held_out"
    RealVector clean;
    std::vector<RealVector> corrupted;  // one per corrupt time
};

struct Dataset {
    std::string config_digest;
    std::string provenance;
    std::uint64_t seed = 0;
    std::vector<double> corrupt_times;
    std::vector<DatasetRecord> records;

    std::vector<RealVector> split(std::string_view name) const;
    std::size_t dim() const { return records.empty() ? 0 : records.front().clean.size(); }
};

/// Haar states are drawn from normalized complex Gaussians; the split is an
/// 80/20 (configurable) seeded shuffle.
Dataset make_dataset(const ExperimentConfig& config);
void write_dataset(const std::filesystem::path& path, const Dataset& dataset);
Dataset read_dataset(const std::filesystem::path& path);

StateVector haar_state(int qubits, CounterRng& rng, bool gauge_fix);

// ----- train -----

struct TrainOutcome {
    TrainResult result;
    std::string checkpoint_digest;
    Json metrics;
};

/// Trains on the "train" split and writes checkpoint.qdn, loss.csv and
/// train_metrics.json into config.out. Toy Gaussian data also records the
/// RMSE against the analytic marginal score at t = 0.1, 0.5, 1.0.
TrainOutcome run_train(const ExperimentConfig& config, const Dataset& dataset);

/// RMSE of `score` against the Gaussian marginal score on a uniform grid.
double gaussian_score_rmse(const ScoreFn& score, const OuParams& params, double mean, double variance, double t,
                           double lo = -2.0, double hi = 2.0, std::size_t points = 201);

// ----- denoise-eval -----

/// Fidelities for quantum data, squared errors for toy data. Improvements
/// are signed so that positive always means closer to the clean sample.
struct StateMetrics {
    std::size_t index = 0;
    double noisy = 0.0;
    double denoised = 0.0;
    double baseline = 0.0;
    double improvement = 0.0;
    double margin = 0.0;  // denoised against baseline
    double noisy_trace_distance = 0.0;
    double denoised_trace_distance = 0.0;
};

struct EvalOutcome {
    std::vector<StateMetrics> states;
    Json metrics;
};

/// Corrupts held-out states to time eval.t (exact OU sampling in mode ou,
/// forward quantum SDE in mode quantum_literal), denoises each and writes
/// metrics.json, states.jsonl and eval_timings.json into config.out.
/// `net` is required when reverse.source is network.
EvalOutcome run_denoise_eval(const ExperimentConfig& config, const Dataset& dataset, const ScoreNet* net);

/// Dominant eigenvector of the mean projector of the given endpoints.
StateVector projector_estimate(const std::vector<StateVector>& samples);

// ----- report -----

struct RunSummary {
    std::filesystem::path directory;
    Json metrics;
    std::optional<Json> train_metrics;
};

/// Collects runs in `root` and its immediate subdirectories, sorted by run id.
std::vector<RunSummary> collect_runs(const std::filesystem::path& root);

/// Throws std::invalid_argument when a run mixes config digests, unless forced.
void check_run_digests(const RunSummary& run, bool force);

/// Prints the summary table and writes report_summary.csv,
/// fidelity_histogram.csv and loss_curves.csv into `out`.
void write_report(const std::vector<RunSummary>& runs, const std::filesystem::path& out, std::ostream& table,
                  std::size_t histogram_bins = 20);

}  // namespace qdiff::pipeline
