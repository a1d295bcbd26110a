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

#include "qdiff/score.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "binary_io.hpp"

namespace qdiff {

// Offsets of each block inside the flat parameter vector.
struct NetLayout {
    std::size_t in, h, d;
    std::size_t w1, b1, w2, b2, w3, b3, total;

    explicit NetLayout(const ScoreNet& net) : NetLayout(net.dim_, net.hidden_) {}
    NetLayout(std::size_t dim, std::size_t hidden) : in(dim + kTimeFeatures), h(hidden), d(dim) {
        w1 = 0;
        b1 = w1 + h * in;
        w2 = b1 + h;
        b2 = w2 + h * h;
        w3 = b2 + h;
        b3 = w3 + d * h;
        total = b3 + d;
    }
};

namespace {

constexpr char kNetMagic[8] = {'Q', 'D', 'N', 'E', 'T', '0', '0', '1'};
constexpr std::uint32_t kNetVersion = 1;

struct Activations {
    std::vector<double> z, h1, h2, out;
};

void forward_pass(const ScoreNet& net, const NetLayout& lay, std::span<const double> x, double t, Activations& a) {
    const auto& p = net.parameters();
    a.z.assign(x.begin(), x.end());
    const auto tf = time_features(t, net.t_end());
    a.z.insert(a.z.end(), tf.begin(), tf.end());

    a.h1.resize(lay.h);
    for (std::size_t i = 0; i < lay.h; ++i) {
        const double* w = &p[lay.w1 + i * lay.in];
        double s = p[lay.b1 + i];
        for (std::size_t j = 0; j < lay.in; ++j) s += w[j] * a.z[j];
        a.h1[i] = std::tanh(s);
    }
    a.h2.resize(lay.h);
    for (std::size_t i = 0; i < lay.h; ++i) {
        const double* w = &p[lay.w2 + i * lay.h];
        double s = p[lay.b2 + i];
        for (std::size_t j = 0; j < lay.h; ++j) s += w[j] * a.h1[j];
        a.h2[i] = std::tanh(s);
    }
    a.out.resize(lay.d);
    for (std::size_t i = 0; i < lay.d; ++i) {
        const double* w = &p[lay.w3 + i * lay.h];
        double s = p[lay.b3 + i];
        for (std::size_t j = 0; j < lay.h; ++j) s += w[j] * a.h2[j];
        a.out[i] = s;
    }
}

void check_example(const ScoreNet& net, const TrainingExample& ex) {
    if (ex.x.size() != net.dim() || ex.target.size() != net.dim())
        throw DimensionError("score net: example dimension does not match the network");
}

double ema_correction(double factor, std::size_t count) {
    return 1.0 - std::pow(factor, static_cast<double>(count));
}

}  // namespace

void OuParams::validate() const {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("ou.alpha must be positive");
    if (!(beta > 0.0) || !std::isfinite(beta)) throw std::invalid_argument("ou.beta must be positive");
    if (!(t_end > 0.0) || !std::isfinite(t_end)) throw std::invalid_argument("ou.t_end must be positive");
}

OuKernel ou_kernel(const OuParams& params, double t) {
    params.validate();
    if (!(t >= 0.0)) throw std::invalid_argument("ou_kernel: t must be nonnegative");
    // -expm1 keeps the variance accurate for small alpha t.
    return {std::exp(-params.alpha * t), -params.stationary_variance() * std::expm1(-2.0 * params.alpha * t)};
}

RealVector sample_forward(std::span<const double> x0, double t, const OuParams& params, CounterRng& rng) {
    const OuKernel k = ou_kernel(params, t);
    const double sigma = std::sqrt(k.variance);
    RealVector out(x0.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = k.mean_scale * x0[i] + sigma * rng.normal();
    return out;
}

RealVector conditional_score(std::span<const double> xt, std::span<const double> x0, double t,
                             const OuParams& params) {
    if (!(t > 0.0)) throw std::invalid_argument("conditional_score: t must be positive");
    if (xt.size() != x0.size()) throw DimensionError("conditional_score: size mismatch");
    const OuKernel k = ou_kernel(params, t);
    RealVector out(xt.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = -(xt[i] - k.mean_scale * x0[i]) / k.variance;
    return out;
}

RealVector gaussian_marginal_score(std::span<const double> x, double t, const OuParams& params, double data_mean,
                                   double data_variance) {
    const OuKernel k = ou_kernel(params, t);
    const double var = k.mean_scale * k.mean_scale * data_variance + k.variance;
    RealVector out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = -(x[i] - k.mean_scale * data_mean) / var;
    return out;
}

std::array<double, kTimeFeatures> time_features(double t, double t_end) {
    const double u = t / t_end;
    const double w = 2.0 * std::numbers::pi * u;
    return {u, std::sin(w), std::cos(w), std::sin(2.0 * w)};
}

ScoreNet::ScoreNet(std::size_t dim, std::size_t hidden, double t_end) : dim_(dim), hidden_(hidden), t_end_(t_end) {
    if (dim == 0 || hidden == 0) throw DimensionError("ScoreNet: widths must be positive");
    if (!(t_end > 0.0)) throw std::invalid_argument("ScoreNet: t_end must be positive");
    params_.assign(NetLayout(dim, hidden).total, 0.0);
}

ScoreNet ScoreNet::initialized(std::size_t dim, std::size_t hidden, double t_end, std::uint64_t seed,
                               bool zero_output) {
    ScoreNet net(dim, hidden, t_end);
    const NetLayout lay(net);
    CounterRng rng(seed, 0);
    auto fill = [&](std::size_t offset, std::size_t count, std::size_t fan_in) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (std::size_t i = 0; i < count; ++i) net.params_[offset + i] = scale * rng.normal();
    };
    fill(lay.w1, lay.h * lay.in, lay.in);
    fill(lay.w2, lay.h * lay.h, lay.h);
    if (!zero_output) fill(lay.w3, lay.d * lay.h, lay.h);
    return net;
}

RealVector ScoreNet::forward(std::span<const double> x, double t) const {
    if (x.size() != dim_) throw DimensionError("ScoreNet: input dimension mismatch");
    Activations a;
    forward_pass(*this, NetLayout(*this), x, t, a);
    return a.out;
}

RealVector net_forward(const ScoreNet& net, std::span<const double> x, double t) { return net.forward(x, t); }

double net_loss(const ScoreNet& net, std::span<const TrainingExample> batch) {
    if (batch.empty()) throw std::invalid_argument("net_loss: empty batch");
    const NetLayout lay(net);
    Activations a;
    double total = 0.0;
    for (const auto& ex : batch) {
        check_example(net, ex);
        forward_pass(net, lay, ex.x, ex.t, a);
        double r = 0.0;
        for (std::size_t i = 0; i < lay.d; ++i) r += (a.out[i] - ex.target[i]) * (a.out[i] - ex.target[i]);
        total += ex.weight * r;
    }
    return total / static_cast<double>(batch.size());
}

std::vector<double> net_gradients(const ScoreNet& net, std::span<const TrainingExample> batch, double* loss) {
    if (batch.empty()) throw std::invalid_argument("net_gradients: empty batch");
    const NetLayout lay(net);
    const auto& p = net.parameters();
    std::vector<double> g(lay.total, 0.0);
    std::vector<double> d_out(lay.d), d_a2(lay.h), d_a1(lay.h);
    Activations a;
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    double total = 0.0;

    for (const auto& ex : batch) {
        check_example(net, ex);
        forward_pass(net, lay, ex.x, ex.t, a);
        double r = 0.0;
        for (std::size_t i = 0; i < lay.d; ++i) {
            const double e = a.out[i] - ex.target[i];
            r += e * e;
            d_out[i] = 2.0 * ex.weight * inv_b * e;
        }
        total += ex.weight * r;

        std::fill(d_a2.begin(), d_a2.end(), 0.0);
        for (std::size_t i = 0; i < lay.d; ++i) {
            const double di = d_out[i];
            g[lay.b3 + i] += di;
            double* gw = &g[lay.w3 + i * lay.h];
            const double* w = &p[lay.w3 + i * lay.h];
            for (std::size_t j = 0; j < lay.h; ++j) {
                gw[j] += di * a.h2[j];
                d_a2[j] += w[j] * di;
            }
        }
        for (std::size_t j = 0; j < lay.h; ++j) d_a2[j] *= 1.0 - a.h2[j] * a.h2[j];

        std::fill(d_a1.begin(), d_a1.end(), 0.0);
        for (std::size_t i = 0; i < lay.h; ++i) {
            const double di = d_a2[i];
            g[lay.b2 + i] += di;
            double* gw = &g[lay.w2 + i * lay.h];
            const double* w = &p[lay.w2 + i * lay.h];
            for (std::size_t j = 0; j < lay.h; ++j) {
                gw[j] += di * a.h1[j];
                d_a1[j] += w[j] * di;
            }
        }
        for (std::size_t j = 0; j < lay.h; ++j) d_a1[j] *= 1.0 - a.h1[j] * a.h1[j];

        for (std::size_t i = 0; i < lay.h; ++i) {
            const double di = d_a1[i];
            g[lay.b1 + i] += di;
            double* gw = &g[lay.w1 + i * lay.in];
            for (std::size_t j = 0; j < lay.in; ++j) gw[j] += di * a.z[j];
        }
    }
    if (loss) *loss = total * inv_b;
    return g;
}

std::string to_string(Weighting w) { return w == Weighting::one ? "one" : "sigma2"; }
std::string to_string(Optimizer o) { return o == Optimizer::sgd ? "sgd" : "adam"; }

Weighting weighting_from_string(const std::string& name) {
    if (name == "sigma2") return Weighting::sigma2;
    if (name == "one") return Weighting::one;
    throw std::invalid_argument("unknown weighting '" + name + "'");
}

Optimizer optimizer_from_string(const std::string& name) {
    if (name == "adam") return Optimizer::adam;
    if (name == "sgd") return Optimizer::sgd;
    throw std::invalid_argument("unknown optimizer '" + name + "'");
}

void TrainConfig::validate() const {
    if (batch_size == 0) throw std::invalid_argument("train.batch_size must be positive");
    if (hidden == 0) throw std::invalid_argument("train.hidden must be positive");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        throw std::invalid_argument("train.learning_rate must be positive");
    if (!(t_min > 0.0)) throw std::invalid_argument("train.t_min must be positive");
    if (!(smoothing >= 0.0 && smoothing < 1.0)) throw std::invalid_argument("train.smoothing must lie in [0, 1)");
    if (!(ema_decay >= 0.0 && ema_decay < 1.0)) throw std::invalid_argument("train.ema_decay must lie in [0, 1)");
}

void ScoreDataset::validate() const {
    if (samples.empty()) throw std::invalid_argument("dataset is empty");
    const std::size_t d = samples.front().size();
    if (d == 0) throw DimensionError("dataset samples have zero dimension");
    for (const auto& s : samples) {
        if (s.size() != d) throw DimensionError("dataset samples have mixed dimensions");
        for (double v : s)
            if (!std::isfinite(v)) throw std::invalid_argument("dataset contains non-finite values");
    }
}

TrainResult train(const ScoreNet& initial, const ScoreDataset& dataset, const OuParams& params,
                  const TrainConfig& config, const TrainObserver& observer) {
    config.validate();
    params.validate();
    dataset.validate();
    if (dataset.dim() != initial.dim()) throw DimensionError("train: dataset and network dimensions differ");
    if (!(config.t_min < params.t_end)) throw std::invalid_argument("train: t_min must be below ou.t_end");

    TrainResult result{initial, {}, {}};
    auto& theta = result.net.parameters();
    ScoreNet averaged = initial;
    auto& avg = averaged.parameters();
    std::vector<double> m(theta.size(), 0.0), v(theta.size(), 0.0);
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    CounterRng rng(derive_seed(config.seed, "train.batches"));
    std::vector<TrainingExample> batch(config.batch_size);
    double ema = 0.0;

    for (std::size_t step = 1; step <= config.steps; ++step) {
        for (auto& ex : batch) {
            const RealVector& x0 = dataset.samples[rng.index(dataset.samples.size())];
            ex.t = rng.uniform(config.t_min, params.t_end);
            const OuKernel k = ou_kernel(params, ex.t);
            const double sigma = std::sqrt(k.variance);
            ex.x.resize(x0.size());
            ex.target.resize(x0.size());
            for (std::size_t i = 0; i < x0.size(); ++i) {
                const double xi = rng.normal();
                ex.x[i] = k.mean_scale * x0[i] + sigma * xi;
                ex.target[i] = -xi / sigma;
            }
            ex.weight = config.weighting == Weighting::sigma2 ? k.variance : 1.0;
        }

        double loss = 0.0;
        const std::vector<double> g = net_gradients(result.net, batch, &loss);
        if (!std::isfinite(loss)) {
            std::ostringstream msg;
            msg << "training diverged at step " << step << ": loss is " << loss;
            if (!result.raw_loss.empty()) msg << " (previous " << result.raw_loss.back() << ")";
            throw NumericalError(msg.str());
        }
        result.raw_loss.push_back(loss);
        ema = config.smoothing * ema + (1.0 - config.smoothing) * loss;
        result.smoothed_loss.push_back(config.smoothing == 0.0 ? loss
                                                                : ema / ema_correction(config.smoothing, step));

        if (config.optimizer == Optimizer::adam) {
            const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
            for (std::size_t i = 0; i < theta.size(); ++i) {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                theta[i] -= config.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
            }
        } else {
            for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= config.learning_rate * g[i];
        }
        for (std::size_t i = 0; i < theta.size(); ++i)
            if (!std::isfinite(theta[i])) {
                std::ostringstream msg;
                msg << "training diverged at step " << step << ": parameter " << i << " is not finite";
                throw NumericalError(msg.str());
            }
        if (config.ema_decay > 0.0) {
            // Short warm-up so the zero-initialized start is forgotten quickly.
            const double s = static_cast<double>(step);
            const double decay = std::min(config.ema_decay, (1.0 + s) / (10.0 + s));
            for (std::size_t i = 0; i < theta.size(); ++i) avg[i] = decay * avg[i] + (1.0 - decay) * theta[i];
        }
        if (observer) observer(step, config.ema_decay > 0.0 ? averaged : result.net);
    }
    if (config.ema_decay > 0.0) result.net = std::move(averaged);
    return result;
}

TrainResult train(const ScoreDataset& dataset, const OuParams& params, const TrainConfig& config,
                  const TrainObserver& observer) {
    dataset.validate();
    config.validate();
    const ScoreNet net = ScoreNet::initialized(dataset.dim(), config.hidden, params.t_end,
                                               derive_seed(config.seed, "train.init"));
    return train(net, dataset, params, config, observer);
}

double silverman_bandwidth(const std::vector<RealVector>& samples) {
    if (samples.size() < 2) throw std::invalid_argument("silverman_bandwidth: need at least two samples");
    const std::size_t d = samples.front().size();
    const double n = static_cast<double>(samples.size());
    double sd_sum = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        double mean = 0.0;
        for (const auto& s : samples) mean += s[j];
        mean /= n;
        double var = 0.0;
        for (const auto& s : samples) var += (s[j] - mean) * (s[j] - mean);
        sd_sum += std::sqrt(var / (n - 1.0));
    }
    const double dd = static_cast<double>(d);
    return std::pow(4.0 / (dd + 2.0), 1.0 / (dd + 4.0)) * std::pow(n, -1.0 / (dd + 4.0)) * (sd_sum / dd);
}

RealVector kde_score_oracle(const std::vector<RealVector>& ensemble, double bandwidth, std::span<const double> x) {
    if (ensemble.empty()) throw std::invalid_argument("kde_score_oracle: empty ensemble");
    if (!(bandwidth > 0.0)) throw std::invalid_argument("kde_score_oracle: bandwidth must be positive");
    const double h2 = bandwidth * bandwidth;
    std::vector<double> logw(ensemble.size());
    for (std::size_t i = 0; i < ensemble.size(); ++i) {
        if (ensemble[i].size() != x.size()) throw DimensionError("kde_score_oracle: dimension mismatch");
        double r = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) r += (x[j] - ensemble[i][j]) * (x[j] - ensemble[i][j]);
        logw[i] = -0.5 * r / h2;
    }
    const double top = *std::max_element(logw.begin(), logw.end());
    RealVector num(x.size(), 0.0);
    double den = 0.0;
    for (std::size_t i = 0; i < ensemble.size(); ++i) {
        const double w = std::exp(logw[i] - top);
        den += w;
        for (std::size_t j = 0; j < x.size(); ++j) num[j] += w * (ensemble[i][j] - x[j]);
    }
    for (auto& v : num) v /= den * h2;
    return num;
}

void save_checkpoint(const std::filesystem::path& path, const ScoreNet& net, const std::string& config_digest) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out.write(kNetMagic, sizeof kNetMagic);
    detail::put_le<std::uint32_t>(out, kNetVersion);
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(net.dim()));
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(net.hidden()));
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(kTimeFeatures));
    detail::put_le<double>(out, net.t_end());
    std::string digest = config_digest;
    digest.resize(16, '0');
    out.write(digest.data(), 16);
    detail::put_le<std::uint64_t>(out, net.parameter_count());
    for (double v : net.parameters()) detail::put_le<double>(out, v);
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

ScoreNet load_checkpoint(const std::filesystem::path& path, std::string* config_digest) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    char magic[8];
    if (!in.read(magic, 8) || !std::equal(magic, magic + 8, kNetMagic))
        throw std::runtime_error(path.string() + " is not a score-net checkpoint");
    if (detail::get_le<std::uint32_t>(in) != kNetVersion) throw std::runtime_error("unsupported checkpoint version");
    const auto dim = detail::get_le<std::uint32_t>(in);
    const auto hidden = detail::get_le<std::uint32_t>(in);
    if (detail::get_le<std::uint32_t>(in) != kTimeFeatures)
        throw std::runtime_error("checkpoint uses a different time-feature count");
    const double t_end = detail::get_le<double>(in);
    std::string digest(16, '\0');
    if (!in.read(digest.data(), 16)) throw std::runtime_error("checkpoint truncated");
    if (config_digest) *config_digest = digest;
    ScoreNet net(dim, hidden, t_end);
    if (detail::get_le<std::uint64_t>(in) != net.parameter_count())
        throw std::runtime_error("checkpoint parameter count does not match its layer sizes");
    for (double& v : net.parameters()) v = detail::get_le<double>(in);
    return net;
}

void write_loss_csv(const std::filesystem::path& path, const TrainResult& result) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out << std::setprecision(17) << "step,loss,smoothed_loss\n";
    for (std::size_t k = 0; k < result.raw_loss.size(); ++k)
        out << k + 1 << ',' << result.raw_loss[k] << ',' << result.smoothed_loss[k] << '\n';
}

}  // namespace qdiff
