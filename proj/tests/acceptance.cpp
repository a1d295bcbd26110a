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

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails. Usage: acceptance [OUTPUT_DIR]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "qdiff/pipeline.hpp"
#include "qdiff/stats.hpp"

namespace fs = std::filesystem;
namespace pl = qdiff::pipeline;
using namespace qdiff;

namespace {

struct Verdict {
    bool passed = false;
    std::string detail;
};

fs::path g_root;

std::string fmt(double v, int precision = 4) {
    std::ostringstream s;
    s << std::setprecision(precision) << v;
    return s.str();
}

pl::ExperimentConfig load(const std::string& file, const std::vector<std::string>& sets, const fs::path& out,
                          unsigned threads) {
    pl::Json j = pl::resolve_config(pl::load_config_file(fs::path(QDIFF_CONFIG_DIR) / file));
    for (const auto& s : sets) pl::apply_override(j, s);
    j["out"] = out.string();
    j["threads"] = threads;
    return pl::ExperimentConfig::from_json(j);
}

DensityMatrix bloch(double x, double y, double z) {
    return DensityMatrix((Matrix::identity(2) + pauli_x() * Complex{x} + pauli_y() * Complex{y} +
                          pauli_z() * Complex{z}) *
                         Complex{0.5});
}

// ----- 1 -----

Verdict analytic_decays() {
    const double gp = 0.5, gd = 0.1, ga = 0.2, t_end = 2.0, dt = 1e-3;
    const auto start = std::chrono::steady_clock::now();
    double worst_p = 0.0, worst_d = 0.0, worst_a = 0.0;
    {
        ChannelRates r;
        r.dephasing = gp;
        const DensityMatrix rho0 = bloch(1, 0, 0);
        const auto sol = integrate_master(rho0, Hamiltonian(1), NoiseModel::single(r), t_end, dt);
        for (std::size_t k = 0; k < sol.times.size(); ++k) {
            const double e = std::exp(-2.0 * gp * sol.times[k]);
            worst_p = std::max(worst_p, std::abs(abs(sol.states[k](0, 1)) / abs(rho0(0, 1)) - e) / e);
        }
    }
    {
        ChannelRates r;
        r.depolarization = {gd, gd, gd};
        const double c = 1.0 / std::sqrt(3.0);
        const auto sol = integrate_master(bloch(c, c, c), Hamiltonian(1), NoiseModel::single(r), t_end, dt);
        for (std::size_t k = 0; k < sol.times.size(); ++k) {
            const double e = std::exp(-4.0 * gd * sol.times[k]);
            for (double b : bloch_vector(sol.states[k])) worst_d = std::max(worst_d, std::abs(b / c - e) / e);
        }
    }
    {
        ChannelRates r;
        r.amplitude = ga;
        const auto sol = integrate_master(bloch(0, 0, -1), Hamiltonian(1), NoiseModel::single(r), t_end, dt);
        for (std::size_t k = 0; k < sol.times.size(); ++k) {
            const double e = std::exp(-ga * sol.times[k]);
            worst_a = std::max(worst_a, std::abs(sol.states[k](1, 1).re - e) / e);
        }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const double worst = std::max({worst_p, worst_d, worst_a});
    return {worst <= 1e-6 && secs < 5.0, "max relative error dephasing " + fmt(worst_p, 3) + ", depolarization " +
                                             fmt(worst_d, 3) + ", amplitude " + fmt(worst_a, 3) + " (tol 1e-6); " +
                                             fmt(secs, 3) + " s"};
}

// ----- 2 -----

struct NoiseSetting {
    std::string name;
    std::vector<std::string> sets;
};

const std::vector<NoiseSetting>& noise_settings() {
    static const std::vector<NoiseSetting> s{
        {"dephasing", {"noise.dephasing=0.5", "noise.depolarization=[0,0,0]", "noise.amplitude=0"}},
        {"depolarization", {"noise.dephasing=0", "noise.depolarization=[0.1,0.1,0.1]", "noise.amplitude=0"}},
        {"combined", {"noise.dephasing=0.5", "noise.depolarization=[0.1,0.1,0.1]", "noise.amplitude=0.2"}},
    };
    return s;
}

fs::path ensemble_dir(const std::string& tag, const std::string& setting) {
    return g_root / tag / ("ensemble-" + setting);
}

Verdict ensemble_runs(const std::string& tag, unsigned threads) {
    Verdict v{true, {}};
    for (const auto& setting : noise_settings()) {
        auto sets = setting.sets;
        sets.push_back("oracle.trajectories=20000");
        sets.push_back("oracle.ensemble_tolerance=0.025");
        sets.push_back("run_id=\"ensemble-" + setting.name + "\"");
        const auto cfg = load("default.json", sets, ensemble_dir(tag, setting.name), threads);
        const auto start = std::chrono::steady_clock::now();
        const pl::OracleReport r = pl::oracle_check(cfg);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        pl::write_text_atomic(cfg.out / "oracle_report.json", pl::dump_json(r.to_json(cfg)));
        pl::write_text_atomic(cfg.out / "oracle_timings.json",
                              pl::dump_json({{"config_digest", cfg.digest}, {"seconds", secs}}));
        const auto it = std::find_if(r.checks.begin(), r.checks.end(),
                                     [](const pl::CheckResult& c) { return c.name == "ensemble_vs_master"; });
        if (it == r.checks.end()) throw std::runtime_error("no ensemble check for " + setting.name);
        const bool ok = it->value <= 0.025 && secs < 60.0;
        v.passed = v.passed && ok;
        if (!v.detail.empty()) v.detail += "; ";
        v.detail += setting.name + " " + fmt(it->value, 3) + " in " + fmt(secs, 3) + " s";
    }
    v.detail = "trace distance (tol 0.025, N = 20000, t = 1): " + v.detail;
    return v;
}

// ----- 3 -----

Verdict zero_noise() {
    const StateVector psi0(CVector{Complex{std::sqrt(0.5), 0.0}, Complex{std::sqrt(0.5), 0.0}});
    SdeConfig s;
    s.dt = 1e-4;
    s.t_end = 1.0;

    const Hamiltonian h(1, {{0.5, "Z"}, {0.3, "X"}});
    const Trajectory tr = simulate_trajectory(psi0, h, NoiseModel(1), s, 0);
    const StateVector exact(qdiff::apply(expm(h.matrix() * Complex{0.0, -1.0}), psi0.amplitudes()));
    const double infidelity = 1.0 - fidelity_pure(exact, tr.states.back().renormalized());
    double drift_h = 0.0;
    for (double n : tr.norms) drift_h = std::max(drift_h, std::abs(n - 1.0));

    const Trajectory idle = simulate_trajectory(psi0, Hamiltonian(1), NoiseModel(1), s, 1);
    double drift = 0.0;
    for (double n : idle.norms) drift = std::max(drift, std::abs(n - 1.0));

    return {infidelity <= 1e-6 && drift <= 1e-8,
            "1 - fidelity " + fmt(infidelity, 3) + " (tol 1e-6, H = 0.5 Z + 0.3 X); max |norm - 1| " + fmt(drift, 3) +
                " (tol 1e-8, H = 0); with H != 0 the explicit step drifts by " + fmt(drift_h, 3)};
}

// ----- 4 -----

Verdict ou_kernel_moments() {
    const auto start = std::chrono::steady_clock::now();
    const OuParams ou{1.0, 1.0, 1.0};
    const std::vector<double> x0{1.5};
    const std::size_t n = 50000;
    double worst = 0.0;
    std::size_t k = 0;
    for (double t : {0.05, 0.2, 0.5, 1.0, 2.0}) {
        CounterRng rng(derive_seed(20260101, "acceptance.ou"), k++);
        double s1 = 0.0, s2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double x = sample_forward(x0, t, ou, rng)[0];
            s1 += x;
            s2 += x * x;
        }
        const double mean = s1 / n;
        const double var = (s2 - n * mean * mean) / (n - 1);
        const OuKernel kt = ou_kernel(ou, t);
        const double z_mean = std::abs(mean - kt.mean_scale * x0[0]) / std::sqrt(kt.variance / n);
        const double z_var = std::abs(var - kt.variance) / (kt.variance * std::sqrt(2.0 / (n - 1)));
        worst = std::max({worst, z_mean, z_var});
    }
    const double limit = ou_kernel(ou, 20.0).variance;
    const double limit_gap = std::abs(limit - 1.0 / ou.alpha);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {worst <= 3.0 && limit_gap <= 1e-3 && secs < 10.0,
            "worst moment deviation " + fmt(worst, 3) + " se (tol 3) over 5 times; |sigma^2(20) - 1/alpha| " +
                fmt(limit_gap, 3) + " (tol 1e-3); " + fmt(secs, 3) + " s"};
}

// ----- 5 -----

Verdict gradient_check() {
    const auto start = std::chrono::steady_clock::now();
    CounterRng rng(derive_seed(20260101, "acceptance.gradient"));
    double worst = 0.0;
    std::size_t probes = 0;
    for (int trial = 0; trial < 5; ++trial) {
        ScoreNet net = ScoreNet::initialized(3, 16, 1.0, derive_seed(20260101, "acceptance.net") + trial, false);
        for (auto& p : net.parameters()) p += 0.1 * rng.normal();
        std::vector<TrainingExample> batch(8);
        for (auto& ex : batch) {
            ex.x = {rng.normal(), rng.normal(), rng.normal()};
            ex.t = rng.uniform(1e-3, 1.0);
            ex.target = {rng.normal(), rng.normal(), rng.normal()};
            ex.weight = rng.uniform(0.1, 1.0);
        }
        const std::vector<double> g = net_gradients(net, batch);
        for (int probe = 0; probe < 24; ++probe, ++probes) {
            const std::size_t i = rng.index(net.parameter_count());
            const double h = 1e-5;
            ScoreNet plus = net, minus = net;
            plus.parameters()[i] += h;
            minus.parameters()[i] -= h;
            const double fd = (net_loss(plus, batch) - net_loss(minus, batch)) / (2.0 * h);
            worst = std::max(worst, std::abs(fd - g[i]) / std::max({std::abs(fd), std::abs(g[i]), 1e-3}));
        }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {worst <= 1e-5 && secs < 5.0, "worst relative error " + fmt(worst, 3) + " over " + std::to_string(probes) +
                                             " probes in 5 batches (tol 1e-5); " + fmt(secs, 3) + " s"};
}

// ----- 6 -----

fs::path toy_dir(const std::string& tag) { return g_root / tag / "toy-gaussian"; }

Verdict score_learning(const std::string& tag, unsigned threads) {
    const auto cfg = load("toy_gaussian.json", {}, toy_dir(tag), threads);
    const auto start = std::chrono::steady_clock::now();
    const pl::Dataset d = pl::make_dataset(cfg);
    pl::write_dataset(cfg.out / "dataset.json", d);
    const pl::TrainOutcome t = pl::run_train(cfg, d);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    Verdict v{secs < 300.0, {}};
    for (const auto& e : t.metrics.at("gaussian_score_rmse")) {
        const double r = e.at("rmse").get<double>();
        v.passed = v.passed && r <= 0.1;
        v.detail += (v.detail.empty() ? "" : ", ") + ("t=" + fmt(e.at("t").get<double>(), 2) + " " + fmt(r, 3));
    }
    v.passed = v.passed && t.metrics.at("gaussian_score_rmse").size() == 3;
    v.detail = "RMSE on [-2, 2] (tol 0.1): " + v.detail + "; " + fmt(secs, 3) + " s";
    return v;
}

// ----- 7 -----

Verdict reverse_case(double mu, double sd, double t_end, std::size_t steps, std::uint64_t salt) {
    const OuParams ou{1.0, 1.0, t_end};
    ReverseConfig rc;
    rc.steps = steps;
    rc.source = ScoreSource::analytic;
    rc.seed = derive_seed(20260101 + salt, "acceptance.reverse");
    const ScoreFn score = analytic_gaussian_score(ou, mu, sd * sd);
    const std::size_t n = 50000;
    CounterRng prior(derive_seed(20260101 + salt, "acceptance.prior"));
    const double prior_sd = std::sqrt(ou.stationary_variance());
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::vector<double> x{prior_sd * prior.normal()};
        out[i] = denoise(x, rc, ou, score, i).estimate[0];
    }
    const Summary s = summarize(out);
    const double var = s.sd * s.sd;
    const double ks = ks_one_sample(out, [&](double x) { return normal_cdf(x, mu, sd); });
    const bool ok = std::abs(s.mean - mu) <= 0.03 && std::abs(var / (sd * sd) - 1.0) <= 0.05 && ks <= 0.02;
    return {ok, "N(" + fmt(mu) + ", " + fmt(sd * sd) + ") data, T = " + fmt(t_end) + ": mean " + fmt(s.mean) +
                    ", variance " + fmt(var) + ", KS " + fmt(ks, 3)};
}

// Both cases start from N(0, beta^2/alpha); the second is far from stationary.
Verdict reverse_sampling() {
    const Verdict a = reverse_case(0.0, 1.0, 1.0, 1000, 0);
    const Verdict b = reverse_case(0.5, 0.6, 8.0, 4000, 1);
    return {a.passed && b.passed, a.detail + "; " + b.detail + " (tol mean 0.03, variance 5%, KS 0.02)"};
}

// ----- 8 -----

fs::path qem_dir(const std::string& tag) { return g_root / tag / "qem-haar"; }

Verdict qem_pipeline(const std::string& tag, unsigned threads) {
    const auto cfg = load("qem_haar.json", {}, qem_dir(tag), threads);
    const auto start = std::chrono::steady_clock::now();
    const pl::Dataset d = pl::make_dataset(cfg);
    pl::write_dataset(cfg.out / "dataset.json", d);
    const pl::TrainOutcome t = pl::run_train(cfg, d);
    const pl::EvalOutcome e = pl::run_denoise_eval(cfg, d, &t.result.net);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const auto& imp = e.metrics.at("improvement");
    const auto& mar = e.metrics.at("margin_vs_baseline");
    const double gain = imp.at("mean").get<double>();
    const double p = imp.at("sign_test_p").get<double>();
    const double margin = mar.at("mean").get<double>();
    const double margin_se = mar.at("se").get<double>();
    const std::size_t count = e.metrics.at("count").get<std::size_t>();
    const bool ok = count == 200 && gain >= 0.05 && p < 0.05 && margin > 2.0 * margin_se && secs < 600.0;
    return {ok, std::to_string(count) + " held-out states: noisy " +
                    fmt(e.metrics.at("noisy").at("mean").get<double>()) + ", denoised " +
                    fmt(e.metrics.at("denoised").at("mean").get<double>()) + ", gain " + fmt(gain, 3) +
                    " (tol 0.05), sign p " + fmt(p, 3) + " (tol 0.05), vs baseline " + fmt(margin, 3) + " = " +
                    fmt(margin / margin_se, 3) + " se (tol 2); " + fmt(secs, 4) + " s"};
}

// ----- 9 -----

std::string file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Verdict determinism() {
    ensemble_runs("repeat", 2);
    score_learning("repeat", 2);
    qem_pipeline("repeat", 2);

    std::vector<fs::path> files;
    for (const auto& s : noise_settings()) files.push_back(fs::path("ensemble-" + s.name) / "oracle_report.json");
    for (const char* f : {"dataset.json", "checkpoint.qdn", "loss.csv", "train_metrics.json"})
        files.push_back(fs::path("toy-gaussian") / f);
    for (const char* f :
         {"dataset.json", "checkpoint.qdn", "loss.csv", "train_metrics.json", "metrics.json", "states.jsonl"})
        files.push_back(fs::path("qem-haar") / f);

    std::vector<std::string> differing;
    for (const auto& f : files)
        if (file_bytes(g_root / "first" / f) != file_bytes(g_root / "repeat" / f)) differing.push_back(f.string());
    std::string detail = std::to_string(files.size() - differing.size()) + "/" + std::to_string(files.size()) +
                         " metric files byte-identical (first run 1 thread, repeat 2 threads)";
    for (const auto& f : differing) detail += "; differs: " + f;
    return {differing.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
    g_root = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_runs");
    fs::remove_all(g_root);
    fs::create_directories(g_root);

    struct Criterion {
        int id;
        std::string name;
        std::function<Verdict()> run;
    };
    const std::vector<Criterion> criteria{
        {1, "analytic dissipator decays", analytic_decays},
        {2, "unraveling matches the master equation", [] { return ensemble_runs("first", 1); }},
        {3, "zero-noise sanity", zero_noise},
        {4, "OU kernel moments", ou_kernel_moments},
        {5, "score-net gradient check", gradient_check},
        {6, "score learning on 1-D Gaussian data", [] { return score_learning("first", 1); }},
        {7, "reverse OU with the analytic score", reverse_sampling},
        {8, "end-to-end denoising of Haar states", [] { return qem_pipeline("first", 1); }},
        {9, "determinism of criteria 2, 6, 8", determinism},
    };

    pl::Json summary = pl::Json::array();
    int failures = 0;
    for (const auto& c : criteria) {
        Verdict v;
        try {
            v = c.run();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        failures += v.passed ? 0 : 1;
        std::cout << (v.passed ? "PASS" : "FAIL") << "  " << c.id << "  " << c.name << ": " << v.detail << std::endl;
        summary.push_back({{"criterion", c.id}, {"name", c.name}, {"passed", v.passed}, {"detail", v.detail}});
    }
    pl::write_text_atomic(g_root / "acceptance.json", pl::dump_json(summary));
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << '\n';
    return failures == 0 ? 0 : 1;
}
