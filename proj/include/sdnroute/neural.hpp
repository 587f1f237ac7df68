#pragma once

// Dense feed-forward value network: forward pass, exact reverse-mode
// gradients, SGD (optionally with momentum), and a lossless text checkpoint.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sdnroute/detail/rng.hpp"
#include "sdnroute/detail/text.hpp"
#include "sdnroute/errors.hpp"

namespace sdnroute {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class Activation { linear, relu, tanh };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::linear: return "linear";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
  }
  return "?";
}

inline Activation activation_from_string(std::string_view s) {
  if (s == "linear") return Activation::linear;
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  throw ParseError("unknown activation '" + std::string(s) + "'");
}

/// Layer sizes (input first) and one activation per weight layer.
struct Architecture {
  std::vector<std::size_t> sizes;
  std::vector<Activation> activations;

  /// Hidden layers use `hidden_act`; the output layer is linear.
  static Architecture mlp(std::vector<std::size_t> sizes, Activation hidden_act = Activation::relu) {
    Architecture a;
    a.sizes = std::move(sizes);
    if (a.sizes.size() >= 2) {
      a.activations.assign(a.sizes.size() - 1, hidden_act);
      a.activations.back() = Activation::linear;
    }
    return a;
  }

  std::size_t layer_count() const { return activations.size(); }
  std::size_t input_size() const { return sizes.empty() ? 0 : sizes.front(); }
  std::size_t output_size() const { return sizes.empty() ? 0 : sizes.back(); }

  void validate() const {
    if (sizes.size() < 2) throw ValidationError("architecture needs at least an input and an output layer");
    if (activations.size() != sizes.size() - 1) throw ValidationError("one activation per weight layer required");
    for (auto s : sizes)
      if (s == 0) throw ValidationError("architecture has a zero-size layer");
  }

  bool operator==(const Architecture&) const = default;
};

struct DenseLayer {
  Matrix weight;  // fan_out x fan_in
  Vector bias;    // fan_out
};

/// Full parameter set of one network.
struct ModelWeights {
  Architecture arch;
  std::vector<DenseLayer> layers;

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
  }

  bool compatible_with(const ModelWeights& o) const { return arch == o.arch; }

  bool all_finite() const {
    for (const auto& l : layers)
      if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    return true;
  }

  /// Bitwise equality of every parameter.
  bool operator==(const ModelWeights& o) const {
    if (arch != o.arch || layers.size() != o.layers.size()) return false;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (layers[i].weight.rows() != o.layers[i].weight.rows() || layers[i].weight.cols() != o.layers[i].weight.cols())
        return false;
      if (layers[i].weight != o.layers[i].weight || layers[i].bias != o.layers[i].bias) return false;
    }
    return true;
  }
};

/// One gradient entry per parameter, same layout as ModelWeights.
struct GradientSet {
  std::vector<DenseLayer> layers;

  static GradientSet zeros_like(const ModelWeights& w) {
    GradientSet g;
    for (const auto& l : w.layers) g.layers.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()), Vector::Zero(l.bias.size())});
    return g;
  }

  bool all_finite() const {
    for (const auto& l : layers)
      if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    return true;
  }

  GradientSet& operator*=(double s) {
    for (auto& l : layers) {
      l.weight *= s;
      l.bias *= s;
    }
    return *this;
  }
};

inline void check_congruent(const ModelWeights& w, const GradientSet& g) {
  if (w.layers.size() != g.layers.size()) throw DimensionError("gradient layer count mismatch");
  for (std::size_t i = 0; i < w.layers.size(); ++i) {
    if (w.layers[i].weight.rows() != g.layers[i].weight.rows() || w.layers[i].weight.cols() != g.layers[i].weight.cols() ||
        w.layers[i].bias.size() != g.layers[i].bias.size())
      throw DimensionError("gradient shape mismatch in layer " + std::to_string(i));
  }
}

/// Uniform in +-sqrt(6 / (fan_in + fan_out)) per weight matrix, zero biases.
inline ModelWeights init_weights(const Architecture& arch, std::uint64_t seed) {
  arch.validate();
  Rng rng(seed);
  ModelWeights w;
  w.arch = arch;
  for (std::size_t k = 0; k + 1 < arch.sizes.size(); ++k) {
    const auto fan_in = arch.sizes[k];
    const auto fan_out = arch.sizes[k + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    DenseLayer layer{Matrix(fan_out, fan_in), Vector::Zero(fan_out)};
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = rng.uniform(-bound, bound);
    w.layers.push_back(std::move(layer));
  }
  return w;
}

namespace detail {

inline void activate(Matrix& z, Activation a) {
  switch (a) {
    case Activation::linear: break;
    case Activation::relu: z = z.cwiseMax(0.0); break;
    case Activation::tanh: z = z.array().tanh().matrix(); break;
  }
}

/// d(activation)/dz expressed through the activation output `y`.
inline Matrix activation_grad(const Matrix& y, Activation a) {
  switch (a) {
    case Activation::linear: return Matrix::Ones(y.rows(), y.cols());
    case Activation::relu: return (y.array() > 0.0).cast<double>().matrix();
    case Activation::tanh: return (1.0 - y.array().square()).matrix();
  }
  return Matrix::Ones(y.rows(), y.cols());
}

}  // namespace detail

/// Column-batched forward pass; `inputs` is input_size x batch.
inline Matrix forward_batch(const ModelWeights& w, const Matrix& inputs) {
  if (static_cast<std::size_t>(inputs.rows()) != w.arch.input_size())
    throw DimensionError("forward: input size " + std::to_string(inputs.rows()) + " != " +
                         std::to_string(w.arch.input_size()));
  Matrix a = inputs;
  for (std::size_t k = 0; k < w.layers.size(); ++k) {
    Matrix z = w.layers[k].weight * a;
    z.colwise() += w.layers[k].bias;
    detail::activate(z, w.arch.activations[k]);
    a = std::move(z);
  }
  return a;
}

inline Vector forward(const ModelWeights& w, const Vector& input) { return forward_batch(w, input); }

inline Vector forward(const ModelWeights& w, std::span<const double> input) {
  return forward(w, Vector(Eigen::Map<const Vector>(input.data(), static_cast<Eigen::Index>(input.size()))));
}

/// Gradient of sum_b <output_grads[:,b], f(inputs[:,b])> w.r.t. every parameter.
inline GradientSet backward_batch(const ModelWeights& w, const Matrix& inputs, const Matrix& output_grads) {
  if (static_cast<std::size_t>(inputs.rows()) != w.arch.input_size())
    throw DimensionError("backward: input size mismatch");
  if (static_cast<std::size_t>(output_grads.rows()) != w.arch.output_size() || output_grads.cols() != inputs.cols())
    throw DimensionError("backward: output gradient shape mismatch");
  const std::size_t L = w.layers.size();
  std::vector<Matrix> acts;
  acts.reserve(L + 1);
  acts.push_back(inputs);
  for (std::size_t k = 0; k < L; ++k) {
    Matrix z = w.layers[k].weight * acts.back();
    z.colwise() += w.layers[k].bias;
    detail::activate(z, w.arch.activations[k]);
    acts.push_back(std::move(z));
  }
  GradientSet g;
  g.layers.resize(L);
  Matrix delta = output_grads;
  for (std::size_t k = L; k-- > 0;) {
    delta = delta.cwiseProduct(detail::activation_grad(acts[k + 1], w.arch.activations[k]));
    g.layers[k].weight = delta * acts[k].transpose();
    g.layers[k].bias = delta.rowwise().sum();
    if (k > 0) delta = w.layers[k].weight.transpose() * delta;
  }
  return g;
}

inline GradientSet backward(const ModelWeights& w, const Vector& input, const Vector& output_grad) {
  return backward_batch(w, input, output_grad);
}

/// w - lr * g.
inline ModelWeights sgd_step(const ModelWeights& w, const GradientSet& g, double lr) {
  check_congruent(w, g);
  if (!(lr > 0.0)) throw ValidationError("learning rate must be > 0");
  if (!g.all_finite()) throw DivergenceError("non-finite gradient");
  ModelWeights out = w;
  for (std::size_t k = 0; k < out.layers.size(); ++k) {
    out.layers[k].weight -= lr * g.layers[k].weight;
    out.layers[k].bias -= lr * g.layers[k].bias;
  }
  return out;
}

/// Heavy-ball SGD. momentum = 0 reduces to sgd_step.
class SgdOptimizer {
 public:
  explicit SgdOptimizer(double lr = 1e-3, double momentum = 0.0) : lr_(lr), momentum_(momentum) {
    if (!(lr > 0.0)) throw ValidationError("learning rate must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ValidationError("momentum must lie in [0,1)");
  }

  void step(ModelWeights& w, const GradientSet& g) {
    check_congruent(w, g);
    if (!g.all_finite()) throw DivergenceError("non-finite gradient");
    if (momentum_ == 0.0) {
      w = sgd_step(w, g, lr_);
      return;
    }
    if (velocity_.layers.size() != w.layers.size()) velocity_ = GradientSet::zeros_like(w);
    for (std::size_t k = 0; k < w.layers.size(); ++k) {
      velocity_.layers[k].weight = momentum_ * velocity_.layers[k].weight + g.layers[k].weight;
      velocity_.layers[k].bias = momentum_ * velocity_.layers[k].bias + g.layers[k].bias;
      w.layers[k].weight -= lr_ * velocity_.layers[k].weight;
      w.layers[k].bias -= lr_ * velocity_.layers[k].bias;
    }
  }

  void reset() { velocity_.layers.clear(); }
  double learning_rate() const { return lr_; }

 private:
  double lr_;
  double momentum_;
  GradientSet velocity_;
};

/// FNV-1a over the architecture and every parameter's bit pattern.
inline std::uint64_t weights_digest(const ModelWeights& w) {
  std::uint64_t h = detail::fnv1a(nullptr, 0);
  for (auto s : w.arch.sizes) {
    const std::uint64_t v = s;
    h = detail::fnv1a(&v, sizeof v, h);
  }
  for (auto a : w.arch.activations) {
    const auto v = static_cast<std::uint8_t>(a);
    h = detail::fnv1a(&v, sizeof v, h);
  }
  for (const auto& l : w.layers) {
    h = detail::fnv1a(l.weight.data(), sizeof(double) * static_cast<std::size_t>(l.weight.size()), h);
    h = detail::fnv1a(l.bias.data(), sizeof(double) * static_cast<std::size_t>(l.bias.size()), h);
  }
  return h;
}

inline std::string digest_hex(std::uint64_t d) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(d));
  return buf;
}

// ---------------------------------------------------------------------------
// Checkpoint format (version 1), whitespace-separated text:
//
//   sdnroute-weights 1
//   layers <L>
//   layer <fan_in> <fan_out> <linear|relu|tanh>      (repeated L times, then:)
//   w <fan_in hex-floats>                            (fan_out rows)
//   b <fan_out hex-floats>
//
// Values are C99 hexadecimal floats without the 0x prefix, so every double
// round-trips exactly.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string hex_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::hex);
  return std::string(buf, end);
}

inline double parse_hex_double(const std::string& s) {
  double v = 0.0;
  std::string_view sv = s;
  bool neg = false;
  if (!sv.empty() && sv.front() == '-') {
    neg = true;
    sv.remove_prefix(1);
  }
  auto [ptr, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), v, std::chars_format::hex);
  if (ec != std::errc{} || ptr != sv.data() + sv.size()) throw ParseError("bad hex float '" + s + "'");
  return neg ? -v : v;
}

}  // namespace detail

inline std::string format_weights(const ModelWeights& w) {
  std::ostringstream o;
  o << "sdnroute-weights 1\nlayers " << w.layers.size() << "\n";
  for (std::size_t k = 0; k < w.layers.size(); ++k) {
    const auto& l = w.layers[k];
    o << "layer " << l.weight.cols() << " " << l.weight.rows() << " " << to_string(w.arch.activations[k]) << "\n";
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      o << "w";
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) o << " " << detail::hex_double(l.weight(r, c));
      o << "\n";
    }
    o << "b";
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) o << " " << detail::hex_double(l.bias(r));
    o << "\n";
  }
  return o.str();
}

inline ModelWeights parse_weights(const std::string& text) {
  std::istringstream in(text);
  std::string tok;
  auto expect = [&](const std::string& want) {
    if (!(in >> tok) || tok != want) throw ParseError("checkpoint: expected '" + want + "', got '" + tok + "'");
  };
  auto read_size = [&]() -> std::size_t {
    if (!(in >> tok)) throw ParseError("checkpoint: truncated");
    auto v = detail::parse_int<std::size_t>(tok);
    if (!v) throw ParseError("checkpoint: bad integer '" + tok + "'");
    return *v;
  };
  auto read_value = [&]() {
    if (!(in >> tok)) throw ParseError("checkpoint: truncated");
    return detail::parse_hex_double(tok);
  };
  expect("sdnroute-weights");
  expect("1");
  expect("layers");
  const std::size_t L = read_size();
  ModelWeights w;
  for (std::size_t k = 0; k < L; ++k) {
    expect("layer");
    const std::size_t fan_in = read_size();
    const std::size_t fan_out = read_size();
    if (!(in >> tok)) throw ParseError("checkpoint: truncated");
    const Activation act = activation_from_string(tok);
    if (k == 0) w.arch.sizes.push_back(fan_in);
    else if (w.arch.sizes.back() != fan_in) throw ParseError("checkpoint: layer sizes do not chain");
    w.arch.sizes.push_back(fan_out);
    w.arch.activations.push_back(act);
    DenseLayer layer{Matrix(fan_out, fan_in), Vector(fan_out)};
    for (std::size_t r = 0; r < fan_out; ++r) {
      expect("w");
      for (std::size_t c = 0; c < fan_in; ++c) layer.weight(r, c) = read_value();
    }
    expect("b");
    for (std::size_t r = 0; r < fan_out; ++r) layer.bias(r) = read_value();
    w.layers.push_back(std::move(layer));
  }
  if (in >> tok) throw ParseError("checkpoint: trailing data '" + tok + "'");
  w.arch.validate();
  return w;
}

inline void save_weights(const ModelWeights& w, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write checkpoint " + path);
  f << format_weights(w);
  if (!f) throw Error("write failed for " + path);
}

inline ModelWeights load_weights(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot open checkpoint " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_weights(ss.str());
}

}  // namespace sdnroute
