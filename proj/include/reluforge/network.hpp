#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "reluforge/errors.hpp"
#include "reluforge/linalg.hpp"

namespace reluforge {

enum class Activation { relu, identity };

inline std::string_view to_string(Activation a) {
  return a == Activation::relu ? "relu" : "identity";
}

struct Layer {
  Matrix weights;  // n_l x n_{l-1}
  Vector bias;     // n_l
  Activation activation = Activation::relu;

  std::size_t width() const { return weights.rows(); }
  std::size_t fan_in() const { return weights.cols(); }

  friend bool operator==(const Layer&, const Layer&) = default;
};

using Metadata = std::map<std::string, std::string>;

// Feed-forward network: every layer but the last is a hidden ReLU layer, the
// last layer is the output layer (ReLU or identity). Immutable once built.
class Network {
 public:
  Network() = default;
  Network(std::size_t input_dim, std::vector<Layer> layers, Metadata metadata = {})
      : input_dim_(input_dim), layers_(std::move(layers)), metadata_(std::move(metadata)) {
    validate();
  }

  std::size_t input_dim() const { return input_dim_; }
  std::size_t output_dim() const { return layers_.empty() ? 0 : layers_.back().width(); }
  const std::vector<Layer>& layers() const { return layers_; }
  const Layer& layer(std::size_t l) const { return layers_.at(l); }
  const Layer& output_layer() const { return layers_.back(); }
  const Metadata& metadata() const { return metadata_; }

  // L in the usual notation.
  std::size_t num_hidden_layers() const { return layers_.empty() ? 0 : layers_.size() - 1; }

  std::vector<std::size_t> hidden_widths() const {
    std::vector<std::size_t> w;
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l) w.push_back(layers_[l].width());
    return w;
  }

  std::size_t total_hidden_units() const {
    std::size_t n = 0;
    for (auto w : hidden_widths()) n += w;
    return n;
  }

  // n_0, n_1, ..., n_{L+1}
  std::vector<std::size_t> architecture() const {
    std::vector<std::size_t> a{input_dim_};
    for (const auto& layer : layers_) a.push_back(layer.width());
    return a;
  }

  Network with_metadata(Metadata metadata) const {
    Network copy = *this;
    copy.metadata_ = std::move(metadata);
    return copy;
  }

  friend bool operator==(const Network&, const Network&) = default;

 private:
  void validate() const {
    if (input_dim_ == 0) throw DimensionError("network input_dim must be positive");
    if (layers_.empty()) throw DimensionError("network needs at least an output layer");
    std::size_t prev = input_dim_;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const Layer& layer = layers_[l];
      if (layer.width() == 0)
        throw DimensionError("layer " + std::to_string(l + 1) + " has no units");
      if (layer.fan_in() != prev)
        throw DimensionError("layer " + std::to_string(l + 1) + " expects " +
                             std::to_string(layer.fan_in()) + " inputs but previous width is " +
                             std::to_string(prev));
      if (layer.bias.size() != layer.width())
        throw DimensionError("layer " + std::to_string(l + 1) + " bias length mismatch");
      if (l + 1 < layers_.size() && layer.activation != Activation::relu)
        throw DimensionError("only the output layer may use identity activation");
      for (double w : layer.weights.data())
        if (!std::isfinite(w)) throw NonFiniteError("non-finite weight in layer " + std::to_string(l + 1));
      for (double b : layer.bias)
        if (!std::isfinite(b)) throw NonFiniteError("non-finite bias in layer " + std::to_string(l + 1));
      prev = layer.width();
    }
  }

  std::size_t input_dim_ = 0;
  std::vector<Layer> layers_;
  Metadata metadata_;
};

class BoxDomain {
 public:
  BoxDomain() = default;
  BoxDomain(Vector lower, Vector upper) : lower_(std::move(lower)), upper_(std::move(upper)) {
    if (lower_.size() != upper_.size()) throw DimensionError("box bounds differ in length");
    if (lower_.empty()) throw DimensionError("box domain needs at least one dimension");
    for (std::size_t i = 0; i < lower_.size(); ++i) {
      if (!std::isfinite(lower_[i]) || !std::isfinite(upper_[i]))
        throw NonFiniteError("box bounds must be finite");
      if (lower_[i] > upper_[i]) throw DimensionError("box lower bound exceeds upper bound");
    }
  }

  static BoxDomain uniform(std::size_t dim, double lo, double hi) {
    return BoxDomain(Vector(dim, lo), Vector(dim, hi));
  }

  // {x : |x_i - center_i| <= delta}, optionally intersected with [clip_lo, clip_hi].
  static BoxDomain around(std::span<const double> center, double delta,
                          std::optional<std::pair<double, double>> clip = std::nullopt) {
    if (!(delta >= 0.0)) throw DimensionError("delta must be non-negative");
    Vector lo(center.begin(), center.end()), hi(center.begin(), center.end());
    for (std::size_t i = 0; i < lo.size(); ++i) {
      lo[i] -= delta;
      hi[i] += delta;
      if (clip) {
        lo[i] = std::max(lo[i], clip->first);
        hi[i] = std::min(hi[i], clip->second);
        if (lo[i] > hi[i]) lo[i] = hi[i] = std::clamp(center[i], clip->first, clip->second);
      }
    }
    return BoxDomain(std::move(lo), std::move(hi));
  }

  std::size_t dim() const { return lower_.size(); }
  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }

  Vector center() const {
    Vector c(dim());
    for (std::size_t i = 0; i < dim(); ++i) c[i] = 0.5 * (lower_[i] + upper_[i]);
    return c;
  }

  bool contains(std::span<const double> x, double tol = 0.0) const {
    if (x.size() != dim()) return false;
    for (std::size_t i = 0; i < dim(); ++i)
      if (x[i] < lower_[i] - tol || x[i] > upper_[i] + tol) return false;
    return true;
  }

  bool contains(const BoxDomain& other) const {
    return contains(other.lower_) && contains(other.upper_);
  }

  double diameter_inf() const {
    double d = 0.0;
    for (std::size_t i = 0; i < dim(); ++i) d = std::max(d, upper_[i] - lower_[i]);
    return d;
  }

  friend bool operator==(const BoxDomain&, const BoxDomain&) = default;

 private:
  Vector lower_;
  Vector upper_;
};

// Per-layer activation sets. Stored as a bit per unit, which is the canonical
// form: two patterns are equal iff every bit matches.
class ActivationPattern {
 public:
  ActivationPattern() = default;
  explicit ActivationPattern(std::vector<std::vector<bool>> bits) : bits_(std::move(bits)) {}

  static ActivationPattern inactive(std::span<const std::size_t> widths) {
    std::vector<std::vector<bool>> bits;
    for (auto w : widths) bits.emplace_back(w, false);
    return ActivationPattern(std::move(bits));
  }

  static ActivationPattern active(std::span<const std::size_t> widths) {
    std::vector<std::vector<bool>> bits;
    for (auto w : widths) bits.emplace_back(w, true);
    return ActivationPattern(std::move(bits));
  }

  // Parses "101|01|1"; the empty string is the empty (zero-layer) pattern.
  static ActivationPattern from_string(std::string_view text) {
    std::vector<std::vector<bool>> bits;
    if (text.empty()) return ActivationPattern{};
    bits.emplace_back();
    for (char c : text) {
      if (c == '|') {
        bits.emplace_back();
      } else if (c == '0' || c == '1') {
        bits.back().push_back(c == '1');
      } else {
        throw ParseError("bad character in activation pattern: '" + std::string(1, c) + "'");
      }
    }
    return ActivationPattern(std::move(bits));
  }

  std::size_t num_layers() const { return bits_.size(); }
  std::size_t width(std::size_t layer) const { return bits_.at(layer).size(); }
  bool active(std::size_t layer, std::size_t unit) const { return bits_.at(layer).at(unit); }
  void set(std::size_t layer, std::size_t unit, bool on) { bits_.at(layer).at(unit) = on; }
  const std::vector<std::vector<bool>>& bits() const { return bits_; }

  std::vector<std::size_t> active_units(std::size_t layer) const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < bits_.at(layer).size(); ++i)
      if (bits_[layer][i]) idx.push_back(i);
    return idx;
  }

  std::size_t count_active() const {
    std::size_t n = 0;
    for (const auto& layer : bits_)
      for (bool b : layer) n += b ? 1 : 0;
    return n;
  }

  ActivationPattern prefix(std::size_t layers) const {
    return ActivationPattern(
        std::vector<std::vector<bool>>(bits_.begin(), bits_.begin() + static_cast<std::ptrdiff_t>(layers)));
  }

  std::string to_string() const {
    std::string s;
    for (std::size_t l = 0; l < bits_.size(); ++l) {
      if (l) s.push_back('|');
      for (bool b : bits_[l]) s.push_back(b ? '1' : '0');
    }
    return s;
  }

  friend bool operator==(const ActivationPattern& a, const ActivationPattern& b) {
    return a.bits_ == b.bits_;
  }
  friend bool operator<(const ActivationPattern& a, const ActivationPattern& b) {
    return a.bits_ < b.bits_;
  }

 private:
  std::vector<std::vector<bool>> bits_;
};

inline std::ostream& operator<<(std::ostream& os, const ActivationPattern& p) { return os << p.to_string(); }

// x -> matrix * x + offset
struct AffineMap {
  Matrix matrix;
  Vector offset;

  Vector apply(std::span<const double> x) const {
    Vector y = multiply(matrix, x);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += offset[i];
    return y;
  }

  double apply_row(std::size_t r, std::span<const double> x) const {
    return dot(matrix.row(r), x) + offset[r];
  }
};

struct ForwardResult {
  Vector output;
  ActivationPattern pattern;
  // Pre-activation of every layer, output layer included.
  std::vector<Vector> preactivations;
};

// A unit is active iff its pre-activation is strictly positive; zero counts
// as inactive for every module.
inline ForwardResult forward(const Network& net, std::span<const double> x) {
  if (x.size() != net.input_dim())
    throw DimensionError("input has length " + std::to_string(x.size()) + ", network expects " +
                         std::to_string(net.input_dim()));
  ForwardResult result;
  std::vector<std::vector<bool>> bits;
  Vector current(x.begin(), x.end());
  const auto& layers = net.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Vector pre = multiply(layers[l].weights, current);
    for (std::size_t i = 0; i < pre.size(); ++i) pre[i] += layers[l].bias[i];
    Vector post = pre;
    if (layers[l].activation == Activation::relu)
      for (double& v : post) v = v > 0.0 ? v : 0.0;
    if (l + 1 < layers.size()) {
      std::vector<bool> on(pre.size());
      for (std::size_t i = 0; i < pre.size(); ++i) on[i] = pre[i] > 0.0;
      bits.push_back(std::move(on));
    }
    result.preactivations.push_back(std::move(pre));
    current = std::move(post);
  }
  result.output = std::move(current);
  result.pattern = ActivationPattern(std::move(bits));
  return result;
}

inline Vector evaluate(const Network& net, std::span<const double> x) { return forward(net, x).output; }

// Affine maps of the pre-activations of layers 0..k, where k is the number of
// layers fixed by `prefix`: map l assumes the activation sets of layers < l
// given by the prefix.
inline std::vector<AffineMap> preactivation_maps(const Network& net, const ActivationPattern& prefix) {
  const std::size_t k = prefix.num_layers();
  if (k > net.num_hidden_layers()) throw DimensionError("pattern has more layers than the network");
  std::vector<AffineMap> maps;
  Matrix cur = Matrix::identity(net.input_dim());
  Vector off(net.input_dim(), 0.0);
  for (std::size_t l = 0; l <= k; ++l) {
    const Layer& layer = net.layer(l);
    if (l < k && prefix.width(l) != layer.width())
      throw DimensionError("pattern layer " + std::to_string(l + 1) + " has width " +
                           std::to_string(prefix.width(l)) + ", network layer has " +
                           std::to_string(layer.width()));
    AffineMap map{multiply(layer.weights, cur), multiply(layer.weights, off)};
    for (std::size_t i = 0; i < map.offset.size(); ++i) map.offset[i] += layer.bias[i];
    if (l < k) {
      cur = map.matrix;
      off = map.offset;
      for (std::size_t i = 0; i < layer.width(); ++i) {
        if (prefix.active(l, i)) continue;
        for (double& v : cur.row(i)) v = 0.0;
        off[i] = 0.0;
      }
    }
    maps.push_back(std::move(map));
  }
  return maps;
}

// The output-layer pre-activation as an affine function of x on the region
// of `pattern`. For identity-output networks this is the network output; for
// ReLU-output networks the output is max(0, map(x)).
inline AffineMap region_affine_map(const Network& net, const ActivationPattern& pattern) {
  if (pattern.num_layers() != net.num_hidden_layers())
    throw DimensionError("pattern has " + std::to_string(pattern.num_layers()) +
                         " layers, network has " + std::to_string(net.num_hidden_layers()) +
                         " hidden layers");
  return std::move(preactivation_maps(net, pattern).back());
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// Interval arithmetic bounds of every layer's pre-activation over the box.
inline std::vector<std::vector<Interval>> interval_bounds(const Network& net, const BoxDomain& domain) {
  if (domain.dim() != net.input_dim()) throw DimensionError("domain dimension mismatch");
  std::vector<Interval> cur(domain.dim());
  for (std::size_t i = 0; i < domain.dim(); ++i) cur[i] = {domain.lower()[i], domain.upper()[i]};
  std::vector<std::vector<Interval>> out;
  for (const Layer& layer : net.layers()) {
    std::vector<Interval> pre(layer.width());
    for (std::size_t r = 0; r < layer.width(); ++r) {
      double lo = layer.bias[r], hi = layer.bias[r];
      for (std::size_t c = 0; c < layer.fan_in(); ++c) {
        const double w = layer.weights(r, c);
        if (w >= 0) {
          lo += w * cur[c].lo;
          hi += w * cur[c].hi;
        } else {
          lo += w * cur[c].hi;
          hi += w * cur[c].lo;
        }
      }
      pre[r] = {lo, hi};
    }
    out.push_back(pre);
    if (layer.activation == Activation::relu)
      for (auto& iv : pre) iv = {std::max(0.0, iv.lo), std::max(0.0, iv.hi)};
    cur = std::move(pre);
  }
  return out;
}

namespace detail {

struct Fnv1a {
  std::uint64_t state = 14695981039346656037ull;
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      state ^= c[i];
      state *= 1099511628211ull;
    }
  }
  void u64(std::uint64_t v) { bytes(&v, sizeof v); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  std::string hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(state));
    return buf;
  }
};

}  // namespace detail

// Content hash of weights, biases and shape; metadata is not included.
inline std::string fingerprint(const Network& net) {
  detail::Fnv1a h;
  h.u64(net.input_dim());
  for (const Layer& layer : net.layers()) {
    h.u64(layer.width());
    h.u64(layer.fan_in());
    h.u64(layer.activation == Activation::relu ? 1 : 2);
    for (double w : layer.weights.data()) h.f64(w);
    for (double b : layer.bias) h.f64(b);
  }
  return h.hex();
}

inline std::string fingerprint(const BoxDomain& domain) {
  detail::Fnv1a h;
  h.u64(domain.dim());
  for (double v : domain.lower()) h.f64(v);
  for (double v : domain.upper()) h.f64(v);
  return h.hex();
}

}  // namespace reluforge
