#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "aoiopt/errors.hpp"
#include "aoiopt/rng.hpp"
#include "json.hpp"

// Small fully connected networks with rectifier hidden layers and manual
// backpropagation. Weights are plain row-major matrices; a checkpoint is the
// layer sizes plus the flat weight/bias arrays.

namespace aoiopt::rl {

enum class OutputActivation { identity, squash };

struct Mlp {
  std::vector<int> sizes;
  std::vector<std::vector<double>> weights;  // [layer][out * in_size + in]
  std::vector<std::vector<double>> biases;   // [layer][out]
  OutputActivation output = OutputActivation::identity;

  static Mlp make(std::vector<int> layer_sizes, OutputActivation out, Rng& rng) {
    if (layer_sizes.size() < 2) throw ConfigError("Mlp: need at least two layers");
    Mlp net;
    net.sizes = std::move(layer_sizes);
    net.output = out;
    for (std::size_t l = 0; l + 1 < net.sizes.size(); ++l) {
      const int in = net.sizes[l];
      const int out_n = net.sizes[l + 1];
      const double lim = 1.0 / std::sqrt(static_cast<double>(in));
      std::vector<double> w(static_cast<std::size_t>(out_n) * in);
      std::vector<double> b(out_n);
      for (auto& v : w) v = rng.uniform(-lim, lim);
      for (auto& v : b) v = rng.uniform(-lim, lim);
      net.weights.push_back(std::move(w));
      net.biases.push_back(std::move(b));
    }
    return net;
  }

  int input_size() const { return sizes.front(); }
  int output_size() const { return sizes.back(); }

  // Post-activation values per layer; acts[0] is the input itself.
  std::vector<std::vector<double>> forward(const std::vector<double>& x) const {
    if (static_cast<int>(x.size()) != input_size())
      throw DomainError("Mlp::forward: input size mismatch");
    std::vector<std::vector<double>> acts;
    acts.reserve(sizes.size());
    acts.push_back(x);
    for (std::size_t l = 0; l < weights.size(); ++l) {
      const int in = sizes[l];
      const int out_n = sizes[l + 1];
      std::vector<double> z(out_n);
      const auto& prev = acts.back();
      for (int o = 0; o < out_n; ++o) {
        double acc = biases[l][o];
        const double* row = &weights[l][static_cast<std::size_t>(o) * in];
        for (int i = 0; i < in; ++i) acc += row[i] * prev[i];
        z[o] = acc;
      }
      const bool last = (l + 1 == weights.size());
      if (!last) {
        for (auto& v : z) v = v > 0.0 ? v : 0.0;
      } else if (output == OutputActivation::squash) {
        for (auto& v : z) v = std::tanh(v);
      }
      acts.push_back(std::move(z));
    }
    return acts;
  }

  std::vector<double> predict(const std::vector<double>& x) const {
    return forward(x).back();
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["version"] = 1;
    j["sizes"] = sizes;
    j["output"] = output == OutputActivation::squash ? "squash" : "identity";
    j["weights"] = weights;
    j["biases"] = biases;
    return j;
  }

  static Mlp from_json(const nlohmann::json& j) {
    if (!j.contains("version") || j["version"].get<int>() != 1)
      throw ConfigError("Mlp::from_json: unsupported checkpoint version");
    Mlp net;
    net.sizes = j.at("sizes").get<std::vector<int>>();
    net.output = j.at("output").get<std::string>() == "squash"
                     ? OutputActivation::squash
                     : OutputActivation::identity;
    net.weights = j.at("weights").get<std::vector<std::vector<double>>>();
    net.biases = j.at("biases").get<std::vector<std::vector<double>>>();
    if (net.weights.size() + 1 != net.sizes.size() ||
        net.biases.size() != net.weights.size())
      throw ConfigError("Mlp::from_json: inconsistent layer counts");
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
      const std::size_t expect_w =
          static_cast<std::size_t>(net.sizes[l]) * net.sizes[l + 1];
      if (net.weights[l].size() != expect_w ||
          net.biases[l].size() != static_cast<std::size_t>(net.sizes[l + 1]))
        throw ConfigError("Mlp::from_json: weight shape mismatch");
      for (const double w : net.weights[l])
        if (!std::isfinite(w)) throw ConfigError("Mlp::from_json: non-finite weight");
      for (const double b : net.biases[l])
        if (!std::isfinite(b)) throw ConfigError("Mlp::from_json: non-finite bias");
    }
    return net;
  }
};

struct MlpGrads {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;

  static MlpGrads zeros_like(const Mlp& net) {
    MlpGrads g;
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
      g.weights.emplace_back(net.weights[l].size(), 0.0);
      g.biases.emplace_back(net.biases[l].size(), 0.0);
    }
    return g;
  }
};

// Accumulates dL/dparams into grads given the activations of one forward pass
// and dL/d(output after activation); returns dL/d(input).
inline std::vector<double> backprop(const Mlp& net,
                                    const std::vector<std::vector<double>>& acts,
                                    std::vector<double> grad_out, MlpGrads& grads) {
  const std::size_t layers = net.weights.size();
  if (acts.size() != layers + 1 ||
      grad_out.size() != static_cast<std::size_t>(net.output_size()))
    throw DomainError("backprop: activation or gradient shape mismatch");
  if (net.output == OutputActivation::squash) {
    const auto& y = acts.back();
    for (std::size_t i = 0; i < grad_out.size(); ++i)
      grad_out[i] *= 1.0 - y[i] * y[i];
  }
  std::vector<double> g = std::move(grad_out);
  for (std::size_t l = layers; l-- > 0;) {
    const int in = net.sizes[l];
    const int out_n = net.sizes[l + 1];
    if (l + 1 != layers) {
      for (int o = 0; o < out_n; ++o)
        if (acts[l + 1][o] <= 0.0) g[o] = 0.0;
    }
    std::vector<double> g_prev(in, 0.0);
    for (int o = 0; o < out_n; ++o) {
      const double go = g[o];
      grads.biases[l][o] += go;
      double* gw = &grads.weights[l][static_cast<std::size_t>(o) * in];
      const double* w = &net.weights[l][static_cast<std::size_t>(o) * in];
      const auto& prev = acts[l];
      for (int i = 0; i < in; ++i) {
        gw[i] += go * prev[i];
        g_prev[i] += w[i] * go;
      }
    }
    g = std::move(g_prev);
  }
  return g;
}

// Plain gradient descent step.
inline void sgd_step(Mlp& net, const MlpGrads& grads, double lr) {
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    for (std::size_t i = 0; i < net.weights[l].size(); ++i)
      net.weights[l][i] -= lr * grads.weights[l][i];
    for (std::size_t i = 0; i < net.biases[l].size(); ++i)
      net.biases[l][i] -= lr * grads.biases[l][i];
  }
}

// theta' <- tau theta + (1 - tau) theta'.
inline void soft_update(const Mlp& online, Mlp& target, double tau) {
  if (online.sizes != target.sizes)
    throw DomainError("soft_update: network shapes differ");
  for (std::size_t l = 0; l < online.weights.size(); ++l) {
    for (std::size_t i = 0; i < online.weights[l].size(); ++i)
      target.weights[l][i] = tau * online.weights[l][i] + (1.0 - tau) * target.weights[l][i];
    for (std::size_t i = 0; i < online.biases[l].size(); ++i)
      target.biases[l][i] = tau * online.biases[l][i] + (1.0 - tau) * target.biases[l][i];
  }
}

}  // namespace aoiopt::rl
