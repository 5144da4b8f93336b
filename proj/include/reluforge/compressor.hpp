#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "reluforge/stability.hpp"

namespace reluforge {

// Least-squares coefficients of `candidate` in the row space of `basis`, or
// nothing when the residual exceeds tol * max(1, |candidate|_inf).
// Rows of `basis` are assumed independent.
inline std::optional<Vector> linear_dependence(const Matrix& basis, std::span<const double> candidate,
                                               double tol = 1e-8) {
  const std::size_t k = basis.rows();
  const std::size_t n = candidate.size();
  if (k > 0 && basis.cols() != n) throw DimensionError("candidate length differs from basis rows");

  // Modified Gram-Schmidt with one re-orthogonalization pass. Row r of the
  // basis equals sum_{j <= r} R(r, j) q_j.
  std::vector<Vector> q;
  Matrix R(k, k);
  for (std::size_t r = 0; r < k; ++r) {
    auto row = basis.row(r);
    Vector v(row.begin(), row.end());
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t j = 0; j < q.size(); ++j) {
        const double c = dot(q[j], v);
        R(r, j) += c;
        for (std::size_t t = 0; t < n; ++t) v[t] -= c * q[j][t];
      }
    const double norm = norm_2(v);
    if (norm <= 1e-10 * std::max(1.0, norm_2(row))) throw NumericError("basis rows are not linearly independent");
    R(r, r) = norm;
    for (double& t : v) t /= norm;
    q.push_back(std::move(v));
  }

  Vector v(candidate.begin(), candidate.end());
  Vector c(k, 0.0);
  for (int pass = 0; pass < 2; ++pass)
    for (std::size_t j = 0; j < k; ++j) {
      const double cj = dot(q[j], v);
      c[j] += cj;
      for (std::size_t t = 0; t < n; ++t) v[t] -= cj * q[j][t];
    }
  // c_j = sum_{r >= j} alpha_r R(r, j)
  Vector alpha(k, 0.0);
  for (std::size_t jj = k; jj-- > 0;) {
    double s = c[jj];
    for (std::size_t r = jj + 1; r < k; ++r) s -= alpha[r] * R(r, jj);
    alpha[jj] = s / R(jj, jj);
  }

  Vector residual(candidate.begin(), candidate.end());
  for (std::size_t r = 0; r < k; ++r)
    for (std::size_t t = 0; t < n; ++t) residual[t] -= alpha[r] * basis(r, t);
  if (norm_inf(residual) > tol * std::max(1.0, norm_inf(candidate))) return std::nullopt;
  return alpha;
}

struct TraceAction {
  enum class Kind { removed_inactive, folded_active, collapsed_layer, constant_collapse };
  Kind kind = Kind::removed_inactive;
  std::size_t layer = 0;  // original hidden layer, 0-based
  std::size_t unit = 0;   // original unit, 0-based
  std::vector<std::pair<std::size_t, double>> alphas;  // original unit -> coefficient
  Vector upsilon;
};

inline std::string_view to_string(TraceAction::Kind k) {
  switch (k) {
    case TraceAction::Kind::removed_inactive: return "removed-inactive";
    case TraceAction::Kind::folded_active: return "folded-active";
    case TraceAction::Kind::collapsed_layer: return "collapsed-layer";
    case TraceAction::Kind::constant_collapse: return "constant-collapse";
  }
  return "?";
}

struct CompressionTrace {
  std::string network_fingerprint;
  std::vector<TraceAction> actions;
  std::vector<std::size_t> units_before;  // per original hidden layer
  std::vector<std::size_t> units_after;   // 0 for layers that were removed

  std::size_t count(TraceAction::Kind k) const {
    return static_cast<std::size_t>(
        std::count_if(actions.begin(), actions.end(), [k](const TraceAction& a) { return a.kind == k; }));
  }
};

namespace detail {

// The network being edited, with the original index of every surviving
// hidden layer and unit.
class CompressionState {
 public:
  explicit CompressionState(const Network& net) : input_dim_(net.input_dim()), layers_(net.layers()), metadata_(net.metadata()) {
    for (std::size_t l = 0; l < net.num_hidden_layers(); ++l) {
      orig_layer_.push_back(l);
      orig_units_.emplace_back(net.layer(l).width());
      for (std::size_t i = 0; i < net.layer(l).width(); ++i) orig_units_.back()[i] = i;
    }
  }

  std::size_t current_layer(std::size_t orig) const {
    auto it = std::find(orig_layer_.begin(), orig_layer_.end(), orig);
    if (it == orig_layer_.end()) throw InconsistentInputError("layer " + std::to_string(orig + 1) + " no longer exists");
    return static_cast<std::size_t>(it - orig_layer_.begin());
  }

  std::size_t current_unit(std::size_t cl, std::size_t orig) const {
    const auto& u = orig_units_.at(cl);
    auto it = std::find(u.begin(), u.end(), orig);
    if (it == u.end()) throw InconsistentInputError("unit " + std::to_string(orig + 1) + " no longer exists");
    return static_cast<std::size_t>(it - u.begin());
  }

  const Layer& layer(std::size_t cl) const { return layers_.at(cl); }
  std::size_t width(std::size_t cl) const { return layers_.at(cl).width(); }

  void remove_unit(std::size_t cl, std::size_t i) {
    layers_[cl].weights.remove_row(i);
    layers_[cl].bias.erase(layers_[cl].bias.begin() + static_cast<std::ptrdiff_t>(i));
    layers_[cl + 1].weights.remove_col(i);
    orig_units_[cl].erase(orig_units_[cl].begin() + static_cast<std::ptrdiff_t>(i));
  }

  // h_i = sum_k alpha_k (h_k - b_k) + b_i on the domain, so unit i's
  // contribution moves into the units k and the next layer's bias.
  void fold(std::size_t cl, std::size_t i, const std::vector<std::pair<std::size_t, double>>& alphas) {
    Layer& next = layers_[cl + 1];
    const Vector& b = layers_[cl].bias;
    for (std::size_t j = 0; j < next.width(); ++j) {
      const double wji = next.weights(j, i);
      double shift = b[i];
      for (auto [k, a] : alphas) {
        next.weights(j, k) += a * wji;
        shift -= a * b[k];
      }
      next.bias[j] += wji * shift;
    }
    remove_unit(cl, i);
  }

  // Replaces layers cl and cl + 1 by their composition; every unit of layer
  // cl must be stably active.
  void collapse(std::size_t cl) {
    Layer& next = layers_[cl + 1];
    const Layer& cur = layers_[cl];
    Vector bias = next.bias;
    for (std::size_t i = 0; i < next.width(); ++i)
      for (std::size_t k = 0; k < cur.width(); ++k) bias[i] += next.weights(i, k) * cur.bias[k];
    next.weights = multiply(next.weights, cur.weights);
    next.bias = std::move(bias);
    layers_.erase(layers_.begin() + static_cast<std::ptrdiff_t>(cl));
    orig_layer_.erase(orig_layer_.begin() + static_cast<std::ptrdiff_t>(cl));
    orig_units_.erase(orig_units_.begin() + static_cast<std::ptrdiff_t>(cl));
  }

  void make_constant(const Vector& upsilon) {
    Layer out = layers_.back();
    out.weights = Matrix(out.width(), input_dim_);
    out.bias = upsilon;
    layers_ = {std::move(out)};
    orig_layer_.clear();
    orig_units_.clear();
  }

  Network network() const { return Network(input_dim_, layers_, metadata_); }

  std::vector<std::size_t> widths_by_original(std::size_t n_orig) const {
    std::vector<std::size_t> w(n_orig, 0);
    for (std::size_t cl = 0; cl < orig_layer_.size(); ++cl) w[orig_layer_[cl]] = layers_[cl].width();
    return w;
  }

 private:
  std::size_t input_dim_;
  std::vector<Layer> layers_;
  Metadata metadata_;
  std::vector<std::size_t> orig_layer_;
  std::vector<std::vector<std::size_t>> orig_units_;
};

inline void apply_action(CompressionState& st, const TraceAction& a) {
  using K = TraceAction::Kind;
  if (a.kind == K::constant_collapse) {
    st.make_constant(a.upsilon);
    return;
  }
  const std::size_t cl = st.current_layer(a.layer);
  switch (a.kind) {
    case K::removed_inactive: st.remove_unit(cl, st.current_unit(cl, a.unit)); break;
    case K::folded_active: {
      std::vector<std::pair<std::size_t, double>> cur;
      for (auto [k, alpha] : a.alphas) cur.push_back({st.current_unit(cl, k), alpha});
      st.fold(cl, st.current_unit(cl, a.unit), cur);
      break;
    }
    case K::collapsed_layer: st.collapse(cl); break;
    default: break;
  }
}

}  // namespace detail

struct CompressionResult {
  Network network;
  CompressionTrace trace;
};

// Stability decisions use the sign of the bounds, ignoring any positive
// tolerance the report was classified with.
inline CompressionResult stability_compression(const Network& net, const BoxDomain& domain,
                                               const StabilityReport& report, double dependence_tol = 1e-8) {
  if (!report.matches(net, domain))
    throw InconsistentInputError("stability report was computed for another network or domain");
  using K = TraceAction::Kind;
  detail::CompressionState st(net);
  CompressionTrace trace;
  trace.network_fingerprint = fingerprint(net);
  const auto widths = net.hidden_widths();
  trace.units_before = widths;

  auto record = [&](TraceAction a) {
    detail::apply_action(st, a);
    trace.actions.push_back(std::move(a));
  };

  for (std::size_t l = 0; l < widths.size(); ++l) {
    const std::size_t n = widths[l];
    std::vector<std::size_t> active;  // original ids of the kept stably active units
    bool unstable = false;
    for (std::size_t i = 0; i < n; ++i) {
      const auto cls = classify(report.unit(l, i).bounds, 0.0);
      const bool last = i + 1 == n;
      if (cls == StabilityClass::stably_inactive) {
        if (!last || !active.empty() || unstable) record({K::removed_inactive, l, i, {}, {}});
      } else if (cls == StabilityClass::stably_active) {
        const std::size_t cl = st.current_layer(l);
        Matrix basis(active.size(), st.layer(cl).fan_in());
        for (std::size_t r = 0; r < active.size(); ++r) {
          auto src = st.layer(cl).weights.row(st.current_unit(cl, active[r]));
          std::copy(src.begin(), src.end(), basis.row(r).begin());
        }
        auto alpha = linear_dependence(basis, st.layer(cl).weights.row(st.current_unit(cl, i)), dependence_tol);
        if (!alpha || (last && active.empty() && !unstable)) {
          active.push_back(i);
        } else {
          TraceAction a{K::folded_active, l, i, {}, {}};
          for (std::size_t r = 0; r < active.size(); ++r) a.alphas.push_back({active[r], (*alpha)[r]});
          record(std::move(a));
        }
      } else {
        unstable = true;
      }
    }
    if (unstable) continue;
    if (!active.empty()) {
      record({K::collapsed_layer, l, 0, {}, {}});
    } else {
      // Only a single stably inactive unit is left: the function is constant.
      TraceAction a{K::constant_collapse, l, 0, {}, evaluate(net, domain.center())};
      record(std::move(a));
      break;
    }
  }
  trace.units_after = st.widths_by_original(widths.size());
  return {st.network(), std::move(trace)};
}

inline Network replay_trace(const Network& net, const CompressionTrace& trace) {
  if (!trace.network_fingerprint.empty() && trace.network_fingerprint != fingerprint(net))
    throw InconsistentInputError("trace was recorded for another network");
  detail::CompressionState st(net);
  for (const auto& a : trace.actions) detail::apply_action(st, a);
  return st.network();
}

inline nlohmann::json trace_to_json(const CompressionTrace& t) {
  nlohmann::json actions = nlohmann::json::array();
  for (const auto& a : t.actions) {
    nlohmann::json j{{"action", to_string(a.kind)}, {"layer", a.layer + 1}};
    if (a.kind == TraceAction::Kind::removed_inactive || a.kind == TraceAction::Kind::folded_active)
      j["unit"] = a.unit + 1;
    if (a.kind == TraceAction::Kind::folded_active) {
      j["alphas"] = nlohmann::json::array();
      for (auto [k, v] : a.alphas) j["alphas"].push_back({{"unit", k + 1}, {"alpha", v}});
    }
    if (a.kind == TraceAction::Kind::constant_collapse) j["upsilon"] = a.upsilon;
    actions.push_back(std::move(j));
  }
  return {{"network_fingerprint", t.network_fingerprint},
          {"units_before", t.units_before},
          {"units_after", t.units_after},
          {"actions", actions}};
}

inline CompressionTrace trace_from_json(const nlohmann::json& j) {
  CompressionTrace t;
  try {
    t.network_fingerprint = j.at("network_fingerprint").get<std::string>();
    t.units_before = j.at("units_before").get<std::vector<std::size_t>>();
    t.units_after = j.at("units_after").get<std::vector<std::size_t>>();
    for (const auto& ja : j.at("actions")) {
      TraceAction a;
      const auto kind = ja.at("action").get<std::string>();
      if (kind == "removed-inactive") {
        a.kind = TraceAction::Kind::removed_inactive;
      } else if (kind == "folded-active") {
        a.kind = TraceAction::Kind::folded_active;
      } else if (kind == "collapsed-layer") {
        a.kind = TraceAction::Kind::collapsed_layer;
      } else if (kind == "constant-collapse") {
        a.kind = TraceAction::Kind::constant_collapse;
      } else {
        throw ParseError("unknown trace action '" + kind + "'");
      }
      a.layer = ja.at("layer").get<std::size_t>() - 1;
      if (ja.contains("unit")) a.unit = ja["unit"].get<std::size_t>() - 1;
      if (ja.contains("alphas"))
        for (const auto& p : ja["alphas"]) a.alphas.push_back({p.at("unit").get<std::size_t>() - 1, p.at("alpha").get<double>()});
      if (ja.contains("upsilon")) a.upsilon = ja["upsilon"].get<Vector>();
      t.actions.push_back(std::move(a));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed compression trace: ") + e.what());
  }
  return t;
}

}  // namespace reluforge
