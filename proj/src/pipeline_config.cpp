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

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "qdiff/pipeline.hpp"

namespace qdiff::pipeline {

namespace {

void merge_into(Json& base, const Json& user, const std::string& where) {
    for (auto it = user.begin(); it != user.end(); ++it) {
        const std::string path = where.empty() ? it.key() : where + "." + it.key();
        if (!base.contains(it.key())) throw std::invalid_argument("unknown config key '" + path + "'");
        Json& slot = base[it.key()];
        if (slot.is_object()) {
            if (!it.value().is_object()) throw std::invalid_argument("config key '" + path + "' must be an object");
            merge_into(slot, it.value(), path);
        } else {
            slot = it.value();
        }
    }
}

template <typename T>
T get(const Json& node, const char* key, const std::string& section) {
    try {
        return node.at(key).get<T>();
    } catch (const Json::exception& e) {
        throw std::invalid_argument("config key '" + section + "." + key + "': " + e.what());
    }
}

std::size_t get_count(const Json& node, const char* key, const std::string& section) {
    const Json& v = node.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0)
        throw std::invalid_argument("config key '" + section + "." + key + "' must be a non-negative integer");
    return v.get<std::size_t>();
}

std::string hex16(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

DataSource data_source_from_string(const std::string& name) {
    if (name == "haar") return DataSource::haar;
    if (name == "toy-gaussian" || name == "toy_gaussian") return DataSource::toy_gaussian;
    throw std::invalid_argument("unknown dataset.source '" + name + "'");
}

Estimator estimator_from_string(const std::string& name) {
    if (name == "single") return Estimator::single;
    if (name == "ensemble") return Estimator::ensemble;
    throw std::invalid_argument("unknown eval.estimator '" + name + "'");
}

}  // namespace

Json default_config() {
    return Json{
        {"schema", std::string(kConfigSchema)},
        {"run_id", "default"},
        {"seed", 20260101},
        {"threads", 0},
        {"out", "runs/default"},
        {"qubits", 1},
        {"hamiltonian", {{"precession", 1.0}, {"terms", Json::array()}}},
        {"noise", {{"depolarization", {0.1, 0.1, 0.1}}, {"amplitude", 0.2}, {"dephasing", 0.5}}},
        {"sde",
         {{"t_end", 1.0}, {"dt", 1e-3}, {"integrator", "euler_maruyama"}, {"renormalize_each_step", false}}},
        {"ou", {{"alpha", 1.0}, {"beta", 1.0}, {"t_end", 1.0}}},
        {"train",
         {{"steps", 5000},
          {"batch_size", 128},
          {"learning_rate", 1e-3},
          {"weighting", "sigma2"},
          {"optimizer", "adam"},
          {"t_min", 1e-3},
          {"hidden", 128},
          {"smoothing", 0.99},
          {"ema_decay", 0.999}}},
        {"reverse",
         {{"steps", 1000}, {"source", "network"}, {"mode", "ou"}, {"noise", "stochastic"}, {"t_min", 1e-3}}},
        {"dataset",
         {{"source", "haar"},
          {"size", 1000},
          {"held_out_fraction", 0.2},
          {"gauge_fix", true},
          {"gaussian_mean", 0.0},
          {"gaussian_sd", 1.0},
          {"gaussian_dim", 1},
          {"corrupt_times", Json::array()},
          {"states_file", ""}}},
        {"oracle",
         {{"trajectories", 10000},
          {"master_dt", 1e-3},
          {"ensemble_tolerance", 0.0},
          {"decay_tolerance", 1e-6},
          {"decay_time", 1.0},
          {"strong_paths", 500},
          {"strong_tolerance", 0.05},
          {"unitary_dt", 1e-4},
          {"unitary_tolerance", 1e-6}}},
        {"eval", {{"t", 0.7}, {"estimator", "ensemble"}, {"paths", 32}, {"histogram_bins", 20}}},
    };
}

Json resolve_config(const Json& user) {
    if (!user.is_object()) throw std::invalid_argument("config must be a JSON object");
    if (user.contains("schema") && user.at("schema") != std::string(kConfigSchema))
        throw std::invalid_argument("unsupported config schema " + user.at("schema").dump() + ", expected \"" +
                                    std::string(kConfigSchema) + "\"");
    Json resolved = default_config();
    merge_into(resolved, user, "");
    return resolved;
}

Json load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file " + path.string());
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw std::invalid_argument("config file " + path.string() + " is not valid JSON: " + e.what());
    }
}

void apply_override(Json& config, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos || eq == 0)
        throw std::invalid_argument("override '" + std::string(assignment) + "' is not of the form key=value");
    const std::string key(assignment.substr(0, eq));
    const std::string text(assignment.substr(eq + 1));

    Json* node = &config;
    std::stringstream parts(key);
    std::string part;
    while (std::getline(parts, part, '.')) {
        if (!node->is_object() || !node->contains(part))
            throw std::invalid_argument("override targets unknown config key '" + key + "'");
        node = &(*node)[part];
    }
    if (node->is_object()) throw std::invalid_argument("override '" + key + "' names a section, not a value");
    Json value = Json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    *node = std::move(value);
}

std::string config_digest(const Json& config) {
    Json canonical = config;
    canonical.erase("out");
    canonical.erase("threads");
    return hex16(fnv1a64(canonical.dump()));
}

std::uint64_t stream_seed(const ExperimentConfig& config, std::string_view purpose) {
    return derive_seed(config.seed, purpose);
}

ExperimentConfig ExperimentConfig::from_json(const Json& raw) {
    const Json cfg = resolve_config(raw);
    ExperimentConfig c;
    c.source = cfg;
    c.digest = config_digest(cfg);
    c.run_id = get<std::string>(cfg, "run_id", "");
    if (!cfg.at("seed").is_number_integer()) throw std::invalid_argument("config key 'seed' must be an integer");
    c.seed = cfg.at("seed").is_number_unsigned() ? cfg.at("seed").get<std::uint64_t>()
                                                 : static_cast<std::uint64_t>(cfg.at("seed").get<std::int64_t>());
    c.threads = static_cast<unsigned>(get_count(cfg, "threads", ""));
    c.out = get<std::string>(cfg, "out", "");
    c.qubits = get<int>(cfg, "qubits", "");
    if (c.qubits < 1 || c.qubits > 3) throw std::invalid_argument("config key 'qubits' must be 1, 2 or 3");

    const Json& h = cfg.at("hamiltonian");
    std::vector<PauliTerm> terms;
    const double omega = get<double>(h, "precession", "hamiltonian");
    if (omega != 0.0) terms = Hamiltonian::precession(c.qubits, omega).terms();
    for (const auto& t : h.at("terms")) {
        if (!t.is_object()) throw std::invalid_argument("hamiltonian.terms entries must be objects");
        terms.push_back({get<double>(t, "coefficient", "hamiltonian.terms"), get<std::string>(t, "paulis", "hamiltonian.terms")});
    }
    c.hamiltonian = Hamiltonian(c.qubits, std::move(terms));

    const Json& n = cfg.at("noise");
    ChannelRates rates;
    rates.depolarization = get<std::array<double, 3>>(n, "depolarization", "noise");
    rates.amplitude = get<double>(n, "amplitude", "noise");
    rates.dephasing = get<double>(n, "dephasing", "noise");
    rates.validate();
    c.noise = NoiseModel(c.qubits, std::vector<ChannelRates>(static_cast<std::size_t>(c.qubits), rates));

    const Json& sde = cfg.at("sde");
    c.sde.t_end = get<double>(sde, "t_end", "sde");
    c.sde.dt = get<double>(sde, "dt", "sde");
    c.sde.integrator = integrator_from_string(get<std::string>(sde, "integrator", "sde"));
    c.sde.renormalize_each_step = get<bool>(sde, "renormalize_each_step", "sde");
    c.sde.seed = derive_seed(c.seed, "sde");
    c.sde.validate();

    const Json& ou = cfg.at("ou");
    c.ou.alpha = get<double>(ou, "alpha", "ou");
    c.ou.beta = get<double>(ou, "beta", "ou");
    c.ou.t_end = get<double>(ou, "t_end", "ou");
    c.ou.validate();

    const Json& tr = cfg.at("train");
    c.train.steps = get_count(tr, "steps", "train");
    c.train.batch_size = get_count(tr, "batch_size", "train");
    c.train.learning_rate = get<double>(tr, "learning_rate", "train");
    c.train.weighting = weighting_from_string(get<std::string>(tr, "weighting", "train"));
    c.train.optimizer = optimizer_from_string(get<std::string>(tr, "optimizer", "train"));
    c.train.t_min = get<double>(tr, "t_min", "train");
    c.train.hidden = get_count(tr, "hidden", "train");
    c.train.smoothing = get<double>(tr, "smoothing", "train");
    c.train.ema_decay = get<double>(tr, "ema_decay", "train");
    c.train.seed = derive_seed(c.seed, "train");
    c.train.validate();

    const Json& rv = cfg.at("reverse");
    c.reverse.steps = get_count(rv, "steps", "reverse");
    c.reverse.source = score_source_from_string(get<std::string>(rv, "source", "reverse"));
    c.reverse.mode = reverse_mode_from_string(get<std::string>(rv, "mode", "reverse"));
    c.reverse.noise = noise_scale_from_string(get<std::string>(rv, "noise", "reverse"));
    c.reverse.t_min = get<double>(rv, "t_min", "reverse");
    c.reverse.seed = derive_seed(c.seed, "reverse");
    c.reverse.validate();

    const Json& ds = cfg.at("dataset");
    c.dataset.source = data_source_from_string(get<std::string>(ds, "source", "dataset"));
    c.dataset.size = get_count(ds, "size", "dataset");
    c.dataset.held_out_fraction = get<double>(ds, "held_out_fraction", "dataset");
    c.dataset.gauge_fix = get<bool>(ds, "gauge_fix", "dataset");
    c.dataset.gaussian_mean = get<double>(ds, "gaussian_mean", "dataset");
    c.dataset.gaussian_sd = get<double>(ds, "gaussian_sd", "dataset");
    c.dataset.gaussian_dim = get_count(ds, "gaussian_dim", "dataset");
    c.dataset.corrupt_times = get<std::vector<double>>(ds, "corrupt_times", "dataset");
    c.dataset.states_file = get<std::string>(ds, "states_file", "dataset");
    if (!(c.dataset.held_out_fraction >= 0.0 && c.dataset.held_out_fraction < 1.0))
        throw std::invalid_argument("dataset.held_out_fraction must lie in [0, 1)");
    if (!(c.dataset.gaussian_sd > 0.0)) throw std::invalid_argument("dataset.gaussian_sd must be positive");
    if (c.dataset.gaussian_dim == 0) throw std::invalid_argument("dataset.gaussian_dim must be >= 1");
    for (double t : c.dataset.corrupt_times)
        if (!(t >= 0.0) || !std::isfinite(t)) throw std::invalid_argument("dataset.corrupt_times must be >= 0");

    const Json& oc = cfg.at("oracle");
    c.oracle.trajectories = get_count(oc, "trajectories", "oracle");
    c.oracle.master_dt = get<double>(oc, "master_dt", "oracle");
    c.oracle.ensemble_tolerance = get<double>(oc, "ensemble_tolerance", "oracle");
    c.oracle.decay_tolerance = get<double>(oc, "decay_tolerance", "oracle");
    c.oracle.decay_time = get<double>(oc, "decay_time", "oracle");
    c.oracle.strong_paths = get_count(oc, "strong_paths", "oracle");
    c.oracle.strong_tolerance = get<double>(oc, "strong_tolerance", "oracle");
    c.oracle.unitary_dt = get<double>(oc, "unitary_dt", "oracle");
    c.oracle.unitary_tolerance = get<double>(oc, "unitary_tolerance", "oracle");
    if (c.oracle.trajectories == 0) throw std::invalid_argument("oracle.trajectories must be >= 1");
    if (c.oracle.strong_paths == 0) throw std::invalid_argument("oracle.strong_paths must be >= 1");
    if (!(c.oracle.master_dt > 0.0) || !(c.oracle.unitary_dt > 0.0) || !(c.oracle.decay_time > 0.0))
        throw std::invalid_argument("oracle step sizes and decay_time must be positive");

    const Json& ev = cfg.at("eval");
    c.eval.t = get<double>(ev, "t", "eval");
    c.eval.estimator = estimator_from_string(get<std::string>(ev, "estimator", "eval"));
    c.eval.paths = get_count(ev, "paths", "eval");
    c.eval.histogram_bins = get_count(ev, "histogram_bins", "eval");
    if (!(c.eval.t > 0.0) || c.eval.t > c.ou.t_end)
        throw std::invalid_argument("eval.t must lie in (0, ou.t_end]");
    if (c.eval.paths == 0) throw std::invalid_argument("eval.paths must be >= 1");
    if (c.eval.histogram_bins == 0) throw std::invalid_argument("eval.histogram_bins must be >= 1");
    return c;
}

void write_atomic(const std::filesystem::path& path, const std::function<void(const std::filesystem::path&)>& writer) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    try {
        writer(tmp);
        std::filesystem::rename(tmp, path);
    } catch (...) {
        std::error_code ignored;
        std::filesystem::remove(tmp, ignored);
        throw;
    }
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
    write_atomic(path, [&](const std::filesystem::path& tmp) {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open " + tmp.string());
        out << text;
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    });
}

std::string dump_json(const Json& value) { return value.dump(2) + "\n"; }

Json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open " + path.string());
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw std::invalid_argument(path.string() + " is not valid JSON: " + e.what());
    }
}

}  // namespace qdiff::pipeline
