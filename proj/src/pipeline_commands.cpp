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
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "qdiff/pipeline.hpp"
#include "qdiff/stats.hpp"

namespace qdiff::pipeline {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string hex16(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string file_digest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return hex16(fnv1a64(bytes));
}

/// Runs fn(i) for i in [0, n) on a strided pool. Each index writes its own
/// slot, so results do not depend on the thread count.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
    unsigned workers = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(n, 1)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::exception_ptr failure;
    std::mutex guard;
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < n; i += workers) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(guard);
                if (!failure) failure = std::current_exception();
            }
        });
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

StateVector plus_state(int qubits) {
    const std::size_t dim = std::size_t{1} << qubits;
    return StateVector(CVector(dim, Complex{1.0 / std::sqrt(static_cast<double>(dim)), 0.0}));
}

DensityMatrix bloch_state(const std::array<double, 3>& r) {
    Matrix rho = (Matrix::identity(2) + pauli_x() * Complex{r[0]} + pauli_y() * Complex{r[1]} +
                  pauli_z() * Complex{r[2]}) *
                 Complex{0.5};
    return DensityMatrix(std::move(rho));
}

CheckResult decay_check(const std::string& name, const DensityMatrix& rho0, const ChannelRates& rates,
                        const OracleSpec& spec, const std::function<double(const DensityMatrix&, double)>& error) {
    const MasterSolution sol = integrate_master(rho0, Hamiltonian(1), NoiseModel::single(rates), spec.decay_time,
                                                spec.master_dt);
    double worst = 0.0;
    for (std::size_t k = 0; k < sol.times.size(); ++k) worst = std::max(worst, error(sol.states[k], sol.times[k]));
    std::ostringstream detail;
    detail << "max relative error over t in [0, " << spec.decay_time << "], dt = " << spec.master_dt;
    return {name, worst, spec.decay_tolerance, worst <= spec.decay_tolerance, detail.str()};
}

Json summary_json(std::span<const double> values) {
    const Summary s = summarize(values);
    return Json{{"count", s.count}, {"mean", s.mean}, {"sd", s.sd}, {"se", s.se},
                {"median", s.median}, {"min", s.min}, {"max", s.max}};
}

// Differences this small are rounding, not wins or losses.
constexpr double kTie = 1e-12;

Json paired_json(std::span<const double> diffs) {
    Json j = summary_json(diffs);
    std::size_t pos = 0, neg = 0;
    for (double d : diffs) {
        if (d > kTie) ++pos;
        else if (d < -kTie) ++neg;
    }
    j["positive"] = pos;
    j["negative"] = neg;
    j["sign_test_p"] = sign_test_p_value(pos, neg);
    const double se = j["se"].get<double>();
    j["z"] = se > 0.0 ? Json(j["mean"].get<double>() / se) : Json(nullptr);
    return j;
}

double clamp_fidelity(double f) { return std::clamp(f, 0.0, 1.0); }

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

}  // namespace

// ----- oracle-check -----

bool OracleReport::passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

Json OracleReport::to_json(const ExperimentConfig& config) const {
    Json list = Json::array();
    for (const auto& c : checks)
        list.push_back({{"name", c.name}, {"value", c.value}, {"tolerance", c.tolerance}, {"passed", c.passed},
                        {"detail", c.detail}});
    return {{"config_digest", config.digest}, {"run_id", config.run_id}, {"passed", passed()}, {"checks", list}};
}

OracleReport oracle_check(const ExperimentConfig& config) {
    OracleReport report;
    const OracleSpec& spec = config.oracle;
    const ChannelRates& q0 = config.noise.rates(0);

    if (q0.dephasing > 0.0) {
        ChannelRates r;
        r.dephasing = q0.dephasing;
        const DensityMatrix rho0 = bloch_state({1.0, 0.0, 0.0});
        report.checks.push_back(decay_check("dephasing_decay", rho0, r, spec, [&](const DensityMatrix& rho, double t) {
            const double expected = std::exp(-2.0 * r.dephasing * t);
            return std::abs(abs(rho(0, 1)) / abs(rho0(0, 1)) - expected) / expected;
        }));
    }
    if (q0.depolarization[0] > 0.0 || q0.depolarization[1] > 0.0 || q0.depolarization[2] > 0.0) {
        ChannelRates r;
        r.depolarization = q0.depolarization;
        const double c = 1.0 / std::sqrt(3.0);
        const DensityMatrix rho0 = bloch_state({c, c, c});
        const auto& g = r.depolarization;
        const std::array<double, 3> rate{2.0 * (g[1] + g[2]), 2.0 * (g[0] + g[2]), 2.0 * (g[0] + g[1])};
        report.checks.push_back(
            decay_check("depolarization_decay", rho0, r, spec, [&](const DensityMatrix& rho, double t) {
                const auto b = bloch_vector(rho);
                double worst = 0.0;
                for (int k = 0; k < 3; ++k) {
                    const double expected = std::exp(-rate[k] * t);
                    worst = std::max(worst, std::abs(b[k] / c - expected) / expected);
                }
                return worst;
            }));
    }
    if (q0.amplitude > 0.0) {
        ChannelRates r;
        r.amplitude = q0.amplitude;
        const DensityMatrix rho0 = bloch_state({0.0, 0.0, -1.0});
        report.checks.push_back(
            decay_check("amplitude_damping_decay", rho0, r, spec, [&](const DensityMatrix& rho, double t) {
                const double expected = std::exp(-r.amplitude * t);
                return std::abs(rho(1, 1).re - expected) / expected;
            }));
    }

    // Unitary evolution against the matrix exponential.
    {
        const StateVector psi0 = plus_state(config.qubits);
        SdeConfig s = config.sde;
        s.dt = spec.unitary_dt;
        s.seed = stream_seed(config, "oracle.unitary");
        s.record_every = s.steps();
        const Trajectory path = simulate_trajectory(psi0, config.hamiltonian, NoiseModel(config.qubits), s, 0);
        const Matrix u = expm(config.hamiltonian.matrix() * Complex{0.0, -s.t_end});
        const StateVector exact(apply(u, psi0.amplitudes()));
        const double infidelity = 1.0 - fidelity_pure(exact, path.states.back().renormalized());
        std::ostringstream detail;
        detail << "1 - fidelity at t = " << s.t_end << ", dt = " << s.dt << ", " << to_string(s.integrator);
        report.checks.push_back(
            {"unitary_fidelity", infidelity, spec.unitary_tolerance, infidelity <= spec.unitary_tolerance, detail.str()});
    }

    if (!config.noise.is_zero()) {
        const StateVector psi0 = plus_state(config.qubits);
        SdeConfig s = config.sde;
        s.seed = stream_seed(config, "oracle.ensemble");
        s.record_every = s.steps();
        const Ensemble ens = run_ensemble(psi0, config.hamiltonian, config.noise, s, spec.trajectories, config.threads);
        const MasterSolution master = integrate_master(pure_density(psi0), config.hamiltonian, config.noise, s.t_end,
                                                       std::min(spec.master_dt, s.t_end / 2.0), 1000000000);
        const DensityMatrix rho = ensemble_density(ens, ens.trajectories.front().states.size() - 1);
        const double gap = trace_distance(rho, master.states.back());
        const double tol = spec.ensemble_tolerance > 0.0
                               ? spec.ensemble_tolerance
                               : 3.0 / std::sqrt(static_cast<double>(spec.trajectories));
        std::ostringstream detail;
        detail << "trace distance at t = " << s.t_end << ", N = " << spec.trajectories << ", dt = " << s.step_size()
               << ", " << to_string(s.integrator);
        report.checks.push_back({"ensemble_vs_master", gap, tol, gap <= tol, detail.str()});
    }

    if (q0.dephasing > 0.0) {
        // Pure dephasing has the closed-form path exp(i sqrt(g) W Z) psi0.
        const double g = q0.dephasing;
        const ForwardSde sde(Matrix(2), std::vector<JumpOperator>{{g, pauli_z()}});
        const StateVector psi0 = plus_state(1);
        const std::size_t steps = config.sde.steps();
        const double dt = config.sde.step_size();
        const std::uint64_t seed = stream_seed(config, "oracle.strong");
        std::vector<double> errors(spec.strong_paths);
        parallel_for(spec.strong_paths, config.threads, [&](std::size_t p) {
            const WienerIncrements inc(seed, p, dt);
            StateVector psi = psi0;
            double w = 0.0;
            for (std::size_t k = 0; k < steps; ++k) {
                const double dw = inc.at(k, 0);
                psi = em_step(sde, psi, static_cast<double>(k) * dt, dt, std::span<const double>(&dw, 1));
                w += dw;
            }
            const double phase = std::sqrt(g) * w;
            const Complex e0 = cexp(Complex{0.0, phase}), e1 = cexp(Complex{0.0, -phase});
            const Complex d0 = psi[0] - psi0[0] * e0, d1 = psi[1] - psi0[1] * e1;
            errors[p] = std::sqrt(abs2(d0) + abs2(d1));
        });
        const double mean = summarize(errors).mean;
        std::ostringstream detail;
        detail << "mean |psi_EM(T) - psi_exact(T)| over " << spec.strong_paths << " dephasing paths, dt = " << dt;
        report.checks.push_back({"em_strong_error", mean, spec.strong_tolerance, mean <= spec.strong_tolerance,
                                 detail.str()});
    }
    return report;
}

// ----- make-dataset -----

StateVector haar_state(int qubits, CounterRng& rng, bool gauge_fix) {
    const std::size_t dim = std::size_t{1} << qubits;
    CVector a(dim);
    for (auto& z : a) z = Complex{rng.normal(), rng.normal()};
    const double n = norm(a);
    for (auto& z : a) z = z * Complex{1.0 / n};
    if (gauge_fix) {
        const double r = abs(a[0]);
        if (r > 0.0) {
            const Complex u = conj(a[0]) * Complex{1.0 / r};
            for (auto& z : a) z = z * u;
            a[0] = Complex{r, 0.0};
        }
    }
    return StateVector(std::move(a), false).renormalized();
}

std::vector<RealVector> Dataset::split(std::string_view name) const {
    std::vector<RealVector> out;
    for (const auto& r : records)
        if (r.split == name) out.push_back(r.clean);
    return out;
}

Dataset make_dataset(const ExperimentConfig& config) {
    const DatasetSpec& spec = config.dataset;
    Dataset d;
    d.config_digest = config.digest;
    d.seed = stream_seed(config, "dataset");
    d.corrupt_times = spec.corrupt_times;
    const bool toy = spec.source == DataSource::toy_gaussian && spec.states_file.empty();

    std::vector<RealVector> clean;
    if (!spec.states_file.empty()) {
        const Json j = read_json_file(spec.states_file);
        const Json& list = j.is_object() ? j.at("states") : j;
        const std::size_t width = 2 * (std::size_t{1} << config.qubits);
        for (const auto& entry : list) {
            RealVector x = entry.get<RealVector>();
            if (x.size() != width)
                throw DimensionError("states_file entry has " + std::to_string(x.size()) + " coordinates, expected " +
                                     std::to_string(width));
            const StateVector psi = real_unembed(x);
            if (std::abs(psi.norm() - 1.0) > 1e-8) throw std::invalid_argument("states_file entry is not normalized");
            clean.push_back(std::move(x));
        }
        d.provenance = "user-states";
    } else if (toy) {
        if (spec.size == 0) throw std::invalid_argument("dataset.size must be >= 1");
        CounterRng rng(stream_seed(config, "dataset.states"));
        for (std::size_t i = 0; i < spec.size; ++i) {
            RealVector x(spec.gaussian_dim);
            for (auto& v : x) v = spec.gaussian_mean + spec.gaussian_sd * rng.normal();
            clean.push_back(std::move(x));
        }
        d.provenance = "toy-gaussian";
    } else {
        if (spec.size == 0) throw std::invalid_argument("dataset.size must be >= 1");
        CounterRng rng(stream_seed(config, "dataset.states"));
        for (std::size_t i = 0; i < spec.size; ++i) clean.push_back(real_embed(haar_state(config.qubits, rng, spec.gauge_fix)));
        d.provenance = "haar-states";
    }
    if (clean.empty()) throw std::invalid_argument("dataset is empty");

    const std::size_t m = clean.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    CounterRng shuffle(stream_seed(config, "dataset.split"));
    for (std::size_t i = m - 1; i > 0; --i) std::swap(order[i], order[shuffle.index(i + 1)]);
    const auto held = static_cast<std::size_t>(std::llround(static_cast<double>(m) * spec.held_out_fraction));
    std::vector<std::string> split(m, "train");
    for (std::size_t k = 0; k < held; ++k) split[order[k]] = "held_out";

    d.records.resize(m);
    for (std::size_t i = 0; i < m; ++i) d.records[i] = {split[i], clean[i], {}};

    if (!spec.corrupt_times.empty()) {
        const double t_max = *std::max_element(spec.corrupt_times.begin(), spec.corrupt_times.end());
        const std::uint64_t seed = stream_seed(config, "dataset.corrupt");
        SdeConfig s = config.sde;
        s.seed = seed;
        s.renormalize_each_step = true;
        s.t_end = t_max;
        if (!toy && t_max > 0.0) s.validate();
        parallel_for(m, config.threads, [&](std::size_t i) {
            auto& rec = d.records[i];
            if (toy) {
                CounterRng rng(seed, i);
                for (double t : spec.corrupt_times)
                    rec.corrupted.push_back(t == 0.0 ? rec.clean : sample_forward(rec.clean, t, config.ou, rng));
                return;
            }
            Trajectory path;
            if (t_max > 0.0) path = simulate_trajectory(real_unembed(rec.clean), config.hamiltonian, config.noise, s, i);
            for (double t : spec.corrupt_times) {
                if (t == 0.0) {
                    rec.corrupted.push_back(rec.clean);
                    continue;
                }
                const auto k = static_cast<std::size_t>(std::llround(t / s.step_size()));
                rec.corrupted.push_back(real_embed(path.states.at(std::min(k, path.states.size() - 1)).renormalized()));
            }
        });
    }
    return d;
}

void write_dataset(const std::filesystem::path& path, const Dataset& dataset) {
    Json records = Json::array();
    for (const auto& r : dataset.records) records.push_back({{"split", r.split}, {"clean", r.clean}, {"corrupted", r.corrupted}});
    const Json j{{"schema", std::string(kDatasetSchema)},
                 {"config_digest", dataset.config_digest},
                 {"provenance", dataset.provenance},
                 {"seed", dataset.seed},
                 {"dim", dataset.dim()},
                 {"corrupt_times", dataset.corrupt_times},
                 {"records", records}};
    write_text_atomic(path, j.dump() + "\n");
}

Dataset read_dataset(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw std::invalid_argument("dataset file " + path.string() + " not found");
    const Json j = read_json_file(path);
    if (j.value("schema", "") != kDatasetSchema)
        throw std::invalid_argument(path.string() + " is not a qdiff dataset (schema mismatch)");
    Dataset d;
    try {
        d.config_digest = j.at("config_digest").get<std::string>();
        d.provenance = j.at("provenance").get<std::string>();
        d.seed = j.at("seed").get<std::uint64_t>();
        d.corrupt_times = j.at("corrupt_times").get<std::vector<double>>();
        for (const auto& r : j.at("records"))
            d.records.push_back({r.at("split").get<std::string>(), r.at("clean").get<RealVector>(),
                                 r.at("corrupted").get<std::vector<RealVector>>()});
    } catch (const Json::exception& e) {
        throw std::invalid_argument(path.string() + ": malformed dataset: " + e.what());
    }
    for (const auto& r : d.records)
        if (r.clean.size() != d.dim()) throw DimensionError(path.string() + ": records have mixed dimensions");
    return d;
}

// ----- train -----

double gaussian_score_rmse(const ScoreFn& score, const OuParams& params, double mean, double variance, double t,
                           double lo, double hi, std::size_t points) {
    double s = 0.0;
    for (std::size_t k = 0; k < points; ++k) {
        const double x = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(points - 1);
        const double xv[1] = {x};
        const double diff = score(xv, t)[0] - gaussian_marginal_score(xv, t, params, mean, variance)[0];
        s += diff * diff;
    }
    return std::sqrt(s / static_cast<double>(points));
}

TrainOutcome run_train(const ExperimentConfig& config, const Dataset& dataset) {
    const auto start = Clock::now();
    ScoreDataset data;
    data.samples = dataset.split("train");
    data.provenance = dataset.provenance;
    if (data.samples.empty()) throw std::invalid_argument("training split is empty");

    TrainOutcome outcome;
    outcome.result = train(data, config.ou, config.train);
    const TrainResult& r = outcome.result;

    const auto checkpoint = config.out / "checkpoint.qdn";
    write_atomic(checkpoint, [&](const std::filesystem::path& tmp) { save_checkpoint(tmp, r.net, config.digest); });
    outcome.checkpoint_digest = file_digest(checkpoint);

    std::ostringstream csv;
    csv << std::setprecision(17) << "# config_digest=" << config.digest << "\nstep,loss,smoothed_loss\n";
    for (std::size_t k = 0; k < r.raw_loss.size(); ++k)
        csv << k + 1 << ',' << r.raw_loss[k] << ',' << r.smoothed_loss[k] << '\n';
    write_text_atomic(config.out / "loss.csv", csv.str());

    Json m{{"config_digest", config.digest},
           {"run_id", config.run_id},
           {"dataset_digest", dataset.config_digest},
           {"provenance", dataset.provenance},
           {"train_samples", data.samples.size()},
           {"steps", config.train.steps},
           {"parameter_count", r.net.parameter_count()},
           {"checkpoint_digest", outcome.checkpoint_digest},
           {"final_loss", r.raw_loss.empty() ? Json(nullptr) : Json(r.raw_loss.back())},
           {"final_smoothed_loss", r.smoothed_loss.empty() ? Json(nullptr) : Json(r.smoothed_loss.back())}};
    if (dataset.provenance == "toy-gaussian" && dataset.dim() == 1) {
        const ScoreFn score = network_score(r.net);
        const double var = config.dataset.gaussian_sd * config.dataset.gaussian_sd;
        Json rmse = Json::array();
        for (double t : {0.1, 0.5, 1.0})
            if (t <= config.ou.t_end)
                rmse.push_back({{"t", t},
                                {"rmse", gaussian_score_rmse(score, config.ou, config.dataset.gaussian_mean, var, t)}});
        m["gaussian_score_rmse"] = rmse;
    }
    outcome.metrics = m;
    write_text_atomic(config.out / "train_metrics.json", dump_json(m));
    write_text_atomic(config.out / "train_timings.json",
                      dump_json({{"config_digest", config.digest}, {"seconds", seconds_since(start)}}));
    return outcome;
}

// ----- denoise-eval -----

StateVector projector_estimate(const std::vector<StateVector>& samples) {
    if (samples.empty()) throw std::invalid_argument("projector_estimate: no samples");
    Matrix q(samples.front().dim());
    for (const auto& s : samples) {
        const StateVector v = s.renormalized();
        q += outer(v.amplitudes(), v.amplitudes());
    }
    const HermitianEigen eig = hermitian_eigen((q + q.adjoint()) * Complex{0.5});
    return StateVector(eig.vectors.back(), false).renormalized();
}

EvalOutcome run_denoise_eval(const ExperimentConfig& config, const Dataset& dataset, const ScoreNet* net) {
    const auto start = Clock::now();
    const std::vector<RealVector> held = dataset.split("held_out");
    if (held.empty()) throw std::invalid_argument("held-out set is empty");
    const bool quantum = dataset.provenance != "toy-gaussian";
    const bool literal = config.reverse.mode == ReverseMode::quantum_literal;
    if (literal && !quantum) throw std::invalid_argument("reverse.mode quantum_literal needs quantum states");

    ScoreFn score;
    switch (config.reverse.source) {
        case ScoreSource::network:
            if (!net) throw std::invalid_argument("reverse.source network needs a checkpoint");
            if (net->dim() != dataset.dim())
                throw DimensionError("checkpoint dimension " + std::to_string(net->dim()) +
                                     " does not match dataset dimension " + std::to_string(dataset.dim()));
            score = network_score(*net);
            break;
        case ScoreSource::kde: {
            std::vector<RealVector> train = dataset.split("train");
            if (train.empty()) throw std::invalid_argument("reverse.source kde needs a training split");
            const double h = silverman_bandwidth(train);
            score = empirical_score(std::move(train), config.ou, h);
            break;
        }
        case ScoreSource::analytic:
            if (quantum) throw std::invalid_argument("reverse.source analytic needs toy-gaussian data");
            score = analytic_gaussian_score(config.ou, config.dataset.gaussian_mean,
                                            config.dataset.gaussian_sd * config.dataset.gaussian_sd);
            break;
        case ScoreSource::zero: score = zero_score(); break;
    }

    OuParams reverse_params = config.ou;
    reverse_params.t_end = config.eval.t;
    const ReverseConfig rc = config.reverse;
    ReverseConfig baseline_rc = rc;
    baseline_rc.noise = NoiseScale::drift_only;
    const ScoreFn none = zero_score();
    const std::size_t paths = config.eval.estimator == Estimator::ensemble ? config.eval.paths : 1;
    const std::uint64_t corrupt_seed = stream_seed(config, "eval.corrupt");
    const ForwardSde sde(config.hamiltonian, config.noise);
    if (literal && sde.dim() * 2 != dataset.dim())
        throw DimensionError("dataset dimension does not match the configured qubit count");

    std::vector<StateMetrics> rows(held.size());
    parallel_for(held.size(), config.threads, [&](std::size_t i) {
        const RealVector& x0 = held[i];
        RealVector xt;
        StateVector psi_t;
        if (literal) {
            SdeConfig s = config.sde;
            s.t_end = config.eval.t;
            s.seed = corrupt_seed;
            s.renormalize_each_step = true;
            s.record_every = s.steps();
            psi_t = simulate_trajectory(real_unembed(x0), sde, s, i).states.back().renormalized();
            xt = real_embed(psi_t);
        } else {
            CounterRng rng(corrupt_seed, i);
            xt = sample_forward(x0, config.eval.t, config.ou, rng);
        }
        const auto endpoint = [&](const ScoreFn& fn, const ReverseConfig& cfg, std::uint64_t path) -> RealVector {
            if (literal) return real_embed(denoise_quantum(psi_t, cfg, config.eval.t, sde, fn, path).estimate);
            return denoise(xt, cfg, reverse_params, fn, path).estimate;
        };
        std::vector<RealVector> ends;
        for (std::size_t r = 0; r < paths; ++r) ends.push_back(endpoint(score, rc, i * paths + r));
        const RealVector base = endpoint(none, baseline_rc, i * paths);

        StateMetrics& m = rows[i];
        m.index = i;
        if (quantum) {
            const StateVector clean = real_unembed(x0);
            std::vector<StateVector> states;
            for (const auto& e : ends) states.push_back(real_unembed(e).renormalized());
            const StateVector estimate = paths == 1 ? states.front() : projector_estimate(states);
            m.noisy = clamp_fidelity(fidelity_pure(clean, real_unembed(xt).renormalized()));
            m.denoised = clamp_fidelity(fidelity_pure(clean, estimate));
            m.baseline = clamp_fidelity(fidelity_pure(clean, real_unembed(base).renormalized()));
            m.improvement = m.denoised - m.noisy;
            m.margin = m.denoised - m.baseline;
            m.noisy_trace_distance = std::sqrt(1.0 - m.noisy);
            m.denoised_trace_distance = std::sqrt(1.0 - m.denoised);
        } else {
            RealVector mean(x0.size(), 0.0);
            for (const auto& e : ends)
                for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += e[k] / static_cast<double>(ends.size());
            m.noisy = squared_distance(xt, x0);
            m.denoised = squared_distance(mean, x0);
            m.baseline = squared_distance(base, x0);
            m.improvement = m.noisy - m.denoised;
            m.margin = m.baseline - m.denoised;
        }
    });

    std::vector<double> noisy, denoised, baseline, improvement, margin, td_noisy, td_denoised;
    std::string lines;
    for (const auto& m : rows) {
        noisy.push_back(m.noisy);
        denoised.push_back(m.denoised);
        baseline.push_back(m.baseline);
        improvement.push_back(m.improvement);
        margin.push_back(m.margin);
        td_noisy.push_back(m.noisy_trace_distance);
        td_denoised.push_back(m.denoised_trace_distance);
        Json line{{"config_digest", config.digest}, {"index", m.index},       {"noisy", m.noisy},
                  {"denoised", m.denoised},         {"baseline", m.baseline}, {"improvement", m.improvement},
                  {"margin", m.margin}};
        if (quantum) {
            line["noisy_trace_distance"] = m.noisy_trace_distance;
            line["denoised_trace_distance"] = m.denoised_trace_distance;
        }
        lines += line.dump() + "\n";
    }

    Json metrics{{"config_digest", config.digest},
                 {"run_id", config.run_id},
                 {"dataset_digest", dataset.config_digest},
                 {"provenance", dataset.provenance},
                 {"metric", quantum ? "fidelity" : "squared_error"},
                 {"mode", to_string(config.reverse.mode)},
                 {"source", to_string(config.reverse.source)},
                 {"noise", to_string(config.reverse.noise)},
                 {"estimator", config.eval.estimator == Estimator::ensemble ? "ensemble" : "single"},
                 {"paths", paths},
                 {"reverse_steps", config.reverse.steps},
                 {"t", config.eval.t},
                 {"count", rows.size()},
                 {"noisy", summary_json(noisy)},
                 {"denoised", summary_json(denoised)},
                 {"baseline", summary_json(baseline)},
                 {"improvement", paired_json(improvement)},
                 {"margin_vs_baseline", paired_json(margin)}};
    if (quantum) {
        metrics["noisy_trace_distance"] = summary_json(td_noisy);
        metrics["denoised_trace_distance"] = summary_json(td_denoised);
    }
    if (config.reverse.source == ScoreSource::network && net) metrics["checkpoint_parameters"] = net->parameter_count();

    write_text_atomic(config.out / "states.jsonl", lines);
    write_text_atomic(config.out / "metrics.json", dump_json(metrics));
    write_text_atomic(config.out / "eval_timings.json",
                      dump_json({{"config_digest", config.digest}, {"seconds", seconds_since(start)}}));
    return {std::move(rows), std::move(metrics)};
}

}  // namespace qdiff::pipeline
