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

// Ornstein-Uhlenbeck noising, the score network and denoising score matching.
//
// The forward process is dX = -alpha X dt + sqrt(2) beta dW, whose transition
// kernel is Gaussian with mean exp(-alpha t) x0 and variance
// (beta^2 / alpha)(1 - exp(-2 alpha t)).

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "qdiff/qstate.hpp"
#include "qdiff/rng.hpp"

namespace qdiff {

struct OuParams {
    double alpha = 1.0;
    double beta = 1.0;
    double t_end = 1.0;

    void validate() const;
    double stationary_variance() const { return beta * beta / alpha; }
};

struct OuKernel {
    double mean_scale = 1.0;
    double variance = 0.0;
};

OuKernel ou_kernel(const OuParams& params, double t);

/// Exact draw x_t = m_t x0 + sigma_t xi.
RealVector sample_forward(std::span<const double> x0, double t, const OuParams& params, CounterRng& rng);

/// -(x_t - m_t x0) / sigma_t^2; throws for t <= 0.
RealVector conditional_score(std::span<const double> xt, std::span<const double> x0, double t,
                             const OuParams& params);

/// Marginal score at time t when the data are N(mean, variance * I).
RealVector gaussian_marginal_score(std::span<const double> x, double t, const OuParams& params, double data_mean,
                                   double data_variance);

inline constexpr std::size_t kTimeFeatures = 4;

/// [t/T, sin(2 pi t/T), cos(2 pi t/T), sin(4 pi t/T)].
std::array<double, kTimeFeatures> time_features(double t, double t_end);

/// Two tanh hidden layers of equal width and a linear output layer.
/// Parameters are stored flat as W1, b1, W2, b2, W3, b3 with row-major weights.
class ScoreNet {
public:
    ScoreNet() = default;
    ScoreNet(std::size_t dim, std::size_t hidden, double t_end);

    /// Gaussian weights with standard deviation 1/sqrt(fan_in), zero biases,
    /// and a zero output layer unless `zero_output` is false.
    static ScoreNet initialized(std::size_t dim, std::size_t hidden, double t_end, std::uint64_t seed,
                                bool zero_output = true);

    std::size_t dim() const { return dim_; }
    std::size_t hidden() const { return hidden_; }
    std::size_t input_width() const { return dim_ + kTimeFeatures; }
    double t_end() const { return t_end_; }

    std::size_t parameter_count() const { return params_.size(); }
    std::vector<double>& parameters() { return params_; }
    const std::vector<double>& parameters() const { return params_; }

    RealVector forward(std::span<const double> x, double t) const;

private:
    friend struct NetLayout;
    std::size_t dim_ = 0;
    std::size_t hidden_ = 0;
    double t_end_ = 1.0;
    std::vector<double> params_;
};

RealVector net_forward(const ScoreNet& net, std::span<const double> x, double t);

struct TrainingExample {
    RealVector x;
    double t = 0.0;
    RealVector target;
    double weight = 1.0;  // lambda(t)
};

/// Mean over the batch of weight * ||net(x, t) - target||^2.
double net_loss(const ScoreNet& net, std::span<const TrainingExample> batch);

/// Exact gradient of net_loss with respect to the flat parameters.
std::vector<double> net_gradients(const ScoreNet& net, std::span<const TrainingExample> batch,
                                  double* loss = nullptr);

enum class Weighting { sigma2, one };
enum class Optimizer { sgd, adam };

std::string to_string(Weighting w);
std::string to_string(Optimizer o);
Weighting weighting_from_string(const std::string& name);
Optimizer optimizer_from_string(const std::string& name);

struct TrainConfig {
    std::size_t steps = 5000;
    std::size_t batch_size = 128;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
    Weighting weighting = Weighting::sigma2;
    Optimizer optimizer = Optimizer::adam;
    double t_min = 1e-3;
    std::size_t hidden = 128;
    double smoothing = 0.99;  // exponential moving average factor of the smoothed loss
    double ema_decay = 0.999; // weight averaging of the returned network; 0 returns the last iterate

    void validate() const;
};

struct ScoreDataset {
    std::vector<RealVector> samples;
    std::string provenance = "toy-gaussian";  // haar-states | trajectory-endpoints | toy-gaussian

    std::size_t dim() const { return samples.empty() ? 0 : samples.front().size(); }
    void validate() const;
};

struct TrainResult {
    ScoreNet net;                       // averaged weights when ema_decay > 0
    std::vector<double> raw_loss;       // one entry per step
    std::vector<double> smoothed_loss;  // bias-corrected moving average
};

/// Called after every optimizer step with the 1-based step index and the
/// network that would be returned at that point.
using TrainObserver = std::function<void(std::size_t step, const ScoreNet& net)>;

/// Denoising score matching with t ~ U(t_min, T). Throws NumericalError if the
/// loss or any parameter stops being finite.
TrainResult train(const ScoreNet& initial, const ScoreDataset& dataset, const OuParams& params,
                  const TrainConfig& config, const TrainObserver& observer = {});

/// Convenience overload that initializes the network from config.seed.
TrainResult train(const ScoreDataset& dataset, const OuParams& params, const TrainConfig& config,
                  const TrainObserver& observer = {});

/// Silverman's rule of thumb with the mean per-coordinate standard deviation.
double silverman_bandwidth(const std::vector<RealVector>& samples);

/// Gradient of the log of an isotropic Gaussian kernel density estimate.
RealVector kde_score_oracle(const std::vector<RealVector>& ensemble, double bandwidth, std::span<const double> x);

/// Header "QDNET001", u32 version, u32 dim, u32 hidden, u32 time features,
/// f64 t_end, 16-char config digest, u64 parameter count, then f64 parameters.
void save_checkpoint(const std::filesystem::path& path, const ScoreNet& net, const std::string& config_digest = {});
ScoreNet load_checkpoint(const std::filesystem::path& path, std::string* config_digest = nullptr);

/// CSV: step, raw loss, smoothed loss.
void write_loss_csv(const std::filesystem::path& path, const TrainResult& result);

}  // namespace qdiff
