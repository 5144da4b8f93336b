#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "reluforge/regions.hpp"

namespace reluforge {

// Unsigned arbitrary-precision integer, just enough for unit counts.
class BigUint {
 public:
  BigUint(std::uint64_t v = 0) {  // NOLINT(google-explicit-constructor)
    while (v) {
      limbs_.push_back(static_cast<std::uint32_t>(v));
      v >>= 32;
    }
  }

  BigUint& operator+=(const BigUint& o) {
    std::uint64_t carry = 0;
    limbs_.resize(std::max(limbs_.size(), o.limbs_.size()), 0);
    for (std::size_t i = 0; i < limbs_.size(); ++i) {
      const std::uint64_t s = carry + limbs_[i] + (i < o.limbs_.size() ? o.limbs_[i] : 0);
      limbs_[i] = static_cast<std::uint32_t>(s);
      carry = s >> 32;
    }
    if (carry) limbs_.push_back(static_cast<std::uint32_t>(carry));
    return *this;
  }

  friend BigUint operator+(BigUint a, const BigUint& b) { return a += b; }

  friend BigUint operator*(const BigUint& a, const BigUint& b) {
    BigUint r;
    if (a.limbs_.empty() || b.limbs_.empty()) return r;
    r.limbs_.assign(a.limbs_.size() + b.limbs_.size(), 0);
    for (std::size_t i = 0; i < a.limbs_.size(); ++i) {
      std::uint64_t carry = 0;
      for (std::size_t j = 0; j < b.limbs_.size(); ++j) {
        const std::uint64_t cur = r.limbs_[i + j] + static_cast<std::uint64_t>(a.limbs_[i]) * b.limbs_[j] + carry;
        r.limbs_[i + j] = static_cast<std::uint32_t>(cur);
        carry = cur >> 32;
      }
      std::size_t k = i + b.limbs_.size();
      while (carry) {
        const std::uint64_t cur = r.limbs_[k] + carry;
        r.limbs_[k++] = static_cast<std::uint32_t>(cur);
        carry = cur >> 32;
      }
    }
    r.trim();
    return r;
  }

  static BigUint pow2(std::size_t e) {
    BigUint r;
    r.limbs_.assign(e / 32 + 1, 0);
    r.limbs_.back() = std::uint32_t{1} << (e % 32);
    return r;
  }

  bool fits_u64() const { return limbs_.size() <= 2; }
  std::uint64_t to_u64() const {
    if (!fits_u64()) throw LimitError("integer " + to_string() + " does not fit in 64 bits");
    std::uint64_t v = 0;
    for (std::size_t i = limbs_.size(); i-- > 0;) v = (v << 32) | limbs_[i];
    return v;
  }

  std::string to_string() const {
    if (limbs_.empty()) return "0";
    std::vector<std::uint32_t> n = limbs_;
    std::string digits;
    while (!n.empty()) {
      std::uint64_t rem = 0;
      for (std::size_t i = n.size(); i-- > 0;) {
        const std::uint64_t cur = (rem << 32) | n[i];
        n[i] = static_cast<std::uint32_t>(cur / 1000000000u);
        rem = cur % 1000000000u;
      }
      while (!n.empty() && n.back() == 0) n.pop_back();
      std::string chunk = std::to_string(rem);
      if (!n.empty()) chunk.insert(0, 9 - chunk.size(), '0');
      digits.insert(0, chunk);
    }
    return digits;
  }

  friend bool operator==(const BigUint& a, const BigUint& b) { return a.limbs_ == b.limbs_; }
  friend std::strong_ordering operator<=>(const BigUint& a, const BigUint& b) {
    if (a.limbs_.size() != b.limbs_.size()) return a.limbs_.size() <=> b.limbs_.size();
    for (std::size_t i = a.limbs_.size(); i-- > 0;)
      if (a.limbs_[i] != b.limbs_[i]) return a.limbs_[i] <=> b.limbs_[i];
    return std::strong_ordering::equal;
  }

 private:
  void trim() {
    while (!limbs_.empty() && limbs_.back() == 0) limbs_.pop_back();
  }
  std::vector<std::uint32_t> limbs_;  // little endian
};

inline std::ostream& operator<<(std::ostream& os, const BigUint& v) { return os << v.to_string(); }

struct ShallowWidths {
  BigUint first;
  BigUint second;
  BigUint total() const { return first + second; }
};

// arch = n_0, n_1, ..., n_L, n_{L+1}
inline ShallowWidths widths_full(const std::vector<std::size_t>& arch) {
  if (arch.size() < 3) throw DimensionError("the architecture needs at least one hidden layer");
  const std::size_t L = arch.size() - 2;
  ShallowWidths w;
  std::size_t exponent = 0;
  for (std::size_t l = 1; l < L; ++l) {
    w.first += BigUint::pow2(exponent) * BigUint(2 * arch[l]);
    exponent += arch[l];
  }
  w.first += BigUint::pow2(exponent) * BigUint(arch[L]);
  w.second = BigUint::pow2(exponent) * BigUint(arch[L + 1]);
  return w;
}

// prefix_counts[l] is the number of feasible prefixes over the first l hidden
// layers, for l = 0..L-1.
inline ShallowWidths widths_patterns(const std::vector<std::size_t>& arch,
                                     const std::vector<std::uint64_t>& prefix_counts) {
  if (arch.size() < 3) throw DimensionError("the architecture needs at least one hidden layer");
  const std::size_t L = arch.size() - 2;
  if (prefix_counts.size() != L)
    throw DimensionError("expected " + std::to_string(L) + " prefix counts, got " +
                         std::to_string(prefix_counts.size()));
  if (prefix_counts[0] != 1) throw InconsistentInputError("there is exactly one empty prefix");
  ShallowWidths w;
  for (std::size_t l = 1; l < L; ++l) w.first += BigUint(prefix_counts[l - 1]) * BigUint(2 * arch[l]);
  w.first += BigUint(prefix_counts[L - 1]) * BigUint(arch[L]);
  w.second = BigUint(prefix_counts[L - 1]) * BigUint(arch[L + 1]);
  return w;
}

enum class Norm { linf, l2 };

inline std::string to_string(Norm n) { return n == Norm::linf ? "linf" : "l2"; }

inline Norm parse_norm(const std::string& s) {
  if (s == "linf" || s == "inf") return Norm::linf;
  if (s == "l2" || s == "2") return Norm::l2;
  throw ParseError("unknown norm '" + s + "' (expected linf or l2)");
}

// Norm dual to the one measuring input distances.
inline double dual_norm(std::span<const double> a, Norm n) { return n == Norm::linf ? norm_1(a) : norm_2(a); }

enum class HStrategy { automatic, conservative_interval, lp_min_violation, user_supplied };

inline std::string to_string(HStrategy s) {
  switch (s) {
    case HStrategy::automatic: return "auto";
    case HStrategy::conservative_interval: return "conservative-interval";
    case HStrategy::lp_min_violation: return "lp-min-violation";
    case HStrategy::user_supplied: return "user-supplied";
  }
  return "?";
}

inline HStrategy parse_h_strategy(const std::string& s) {
  if (s == "auto") return HStrategy::automatic;
  if (s == "conservative-interval") return HStrategy::conservative_interval;
  if (s == "lp-min-violation") return HStrategy::lp_min_violation;
  if (s == "user-supplied") return HStrategy::user_supplied;
  throw ParseError("unknown H strategy '" + s + "'");
}

struct ShallowConfig {
  double epsilon = 1e-3;
  Norm norm = Norm::linf;
  HStrategy h_strategy = HStrategy::automatic;
  double user_H = 0.0;
  std::size_t max_units = 1'000'000;
  std::size_t max_weights = 100'000'000;

  void validate() const {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw InconsistentInputError("epsilon must be positive");
    if (h_strategy == HStrategy::user_supplied && !(user_H > 0.0 && std::isfinite(user_H)))
      throw InconsistentInputError("a user-supplied H must be positive");
  }
};

inline constexpr std::size_t kMaxShallowFullUnits = 20;
inline constexpr std::size_t kLpStrategyMaxUnits = 12;

// True when every point within epsilon of x (in `norm`) has x's activation
// pattern: each pre-activation clears epsilon times the dual norm of its
// gradient row on x's region. Never true when some pre-activation is 0.
inline bool is_interior(const Network& net, std::span<const double> x, double epsilon, Norm norm) {
  const ForwardResult fr = forward(net, x);
  const std::size_t L = net.num_hidden_layers();
  if (L == 0) return true;
  const auto maps = preactivation_maps(net, fr.pattern.prefix(L - 1));
  for (std::size_t l = 0; l < L; ++l)
    for (std::size_t i = 0; i < net.layer(l).width(); ++i) {
      const double g = fr.preactivations[l][i];
      if (!(std::abs(g) > epsilon * dual_norm(maps[l].matrix.row(i), norm))) return false;
    }
  return true;
}

namespace detail {

// by_length[k] lists the prefixes over the first k hidden layers in
// lexicographic order, for k = 0..L-1.
struct PrefixTable {
  std::vector<std::vector<ActivationPattern>> by_length;

  std::size_t index(const ActivationPattern& p) const {
    const auto& v = by_length.at(p.num_layers());
    auto it = std::lower_bound(v.begin(), v.end(), p);
    if (it == v.end() || !(*it == p)) throw InconsistentInputError("prefix " + p.to_string() + " missing from table");
    return static_cast<std::size_t>(it - v.begin());
  }
};

inline PrefixTable all_prefixes(const Network& net) {
  const std::size_t L = net.num_hidden_layers();
  PrefixTable t;
  t.by_length.push_back({ActivationPattern{}});
  for (std::size_t k = 1; k < L; ++k) {
    const std::size_t n = net.layer(k - 1).width();
    std::vector<ActivationPattern> next;
    for (const auto& p : t.by_length.back())
      for (std::uint64_t m = 0; m < (std::uint64_t{1} << n); ++m) {
        auto bits = p.bits();
        bits.emplace_back(n);
        for (std::size_t i = 0; i < n; ++i) bits.back()[i] = (m >> (n - 1 - i)) & 1u;
        next.emplace_back(std::move(bits));
      }
    std::sort(next.begin(), next.end());
    t.by_length.push_back(std::move(next));
  }
  return t;
}

inline PrefixTable feasible_prefixes(const Network& net, const PatternSet& patterns) {
  const std::size_t L = net.num_hidden_layers();
  for (const auto& p : patterns.patterns) {
    if (p.num_layers() != L) throw DimensionError("pattern " + p.to_string() + " does not match the network");
    for (std::size_t l = 0; l < L; ++l)
      if (p.width(l) != net.layer(l).width())
        throw DimensionError("pattern " + p.to_string() + " does not match the network");
  }
  const PrefixSets sets = prefix_sets(patterns);
  PrefixTable t;
  for (std::size_t k = 0; k < L; ++k) t.by_length.emplace_back(sets.prefixes[k].begin(), sets.prefixes[k].end());
  return t;
}

// Pre-activation map of layer p.num_layers() given the prefix p.
inline AffineMap layer_map(const Network& net, const ActivationPattern& p) {
  return std::move(preactivation_maps(net, p).back());
}

// Offsets making the output pre-activation nonnegative on the domain; zero
// for ReLU outputs.
inline Vector output_offsets(const Network& net, const BoxDomain& domain) {
  Vector c(net.output_dim(), 0.0);
  if (net.output_layer().activation == Activation::relu) return c;
  const auto ib = interval_bounds(net, domain);
  for (std::size_t j = 0; j < c.size(); ++j) c[j] = std::max(0.0, -ib.back()[j].lo);
  return c;
}

}  // namespace detail

struct BigH {
  double H = 0.0;
  double U = 0.0;      // bound on the second-layer pre-activation before penalties
  double delta = 0.0;  // lower bound on the total penalty of a wrong group
  HStrategy strategy = HStrategy::automatic;
};

namespace detail {

inline double upper_bound_U(const Network& net, const BoxDomain& domain, const PrefixTable& table, const Vector& C) {
  const std::size_t L = net.num_hidden_layers();
  const Layer& out = net.output_layer();
  double U = 0.0;
  for (const auto& q : table.by_length[L - 1]) {
    const AffineMap m = layer_map(net, q);
    std::vector<Interval> h(m.offset.size());
    for (std::size_t i = 0; i < h.size(); ++i) {
      double lo = m.offset[i], hi = m.offset[i];
      for (std::size_t c = 0; c < domain.dim(); ++c) {
        const double a = m.matrix(i, c);
        lo += a * (a >= 0 ? domain.lower()[c] : domain.upper()[c]);
        hi += a * (a >= 0 ? domain.upper()[c] : domain.lower()[c]);
      }
      h[i] = {std::max(0.0, lo), std::max(0.0, hi)};
    }
    for (std::size_t j = 0; j < out.width(); ++j) {
      double lo = out.bias[j] + C[j], hi = lo;
      for (std::size_t i = 0; i < h.size(); ++i) {
        const double w = out.weights(j, i);
        lo += w * (w >= 0 ? h[i].lo : h[i].hi);
        hi += w * (w >= 0 ? h[i].hi : h[i].lo);
      }
      U = std::max({U, std::abs(lo), std::abs(hi)});
    }
  }
  return U;
}

// Smallest margin epsilon * ||a||_* over every row a.x + c of the table's
// prefixes; constant rows count with |c|.
inline double interior_margin(const Network& net, const PrefixTable& table, double epsilon, Norm norm) {
  const std::size_t L = net.num_hidden_layers();
  double delta = opt::kInf;
  auto scan = [&](const AffineMap& m) {
    for (std::size_t i = 0; i < m.offset.size(); ++i) {
      const double d = dual_norm(m.matrix.row(i), norm);
      if (d > 0.0) {
        delta = std::min(delta, epsilon * d);
      } else if (m.offset[i] != 0.0) {
        delta = std::min(delta, std::abs(m.offset[i]));
      }
    }
  };
  for (std::size_t k = 0; k < L; ++k)
    for (const auto& p : table.by_length[k]) scan(layer_map(net, p));
  return delta;
}

// Minimum over the epsilon-shrunk regions of `patterns` of the total penalty
// any wrong group receives, each by an LP.
inline double lp_min_violation(const Network& net, const BoxDomain& domain, const PrefixTable& table,
                               const PatternSet& patterns, double epsilon, Norm norm) {
  const std::size_t L = net.num_hidden_layers();
  if (L < 2) return opt::kInf;
  std::vector<std::vector<AffineMap>> maps(L);
  for (std::size_t k = 0; k + 1 < L; ++k)
    for (const auto& p : table.by_length[k]) maps[k].push_back(layer_map(net, p));

  double best = opt::kInf;
  for (const auto& P : patterns.patterns) {
    opt::LpProblem region;
    for (std::size_t i = 0; i < domain.dim(); ++i) region.add_variable(domain.lower()[i], domain.upper()[i]);
    bool empty = false;
    const auto pm = preactivation_maps(net, P.prefix(L - 1));
    for (std::size_t l = 0; l < L && !empty; ++l)
      for (std::size_t i = 0; i < pm[l].offset.size(); ++i) {
        auto row = pm[l].matrix.row(i);
        const double c = pm[l].offset[i], margin = epsilon * dual_norm(row, norm);
        const bool on = P.active(l, i);
        if (margin == 0.0) {
          if (on ? c <= 0.0 : c >= 0.0) empty = true;
          continue;
        }
        Vector a(row.begin(), row.end());
        if (on) {
          for (double& v : a) v = -v;
          region.add_constraint(std::move(a), opt::Relation::less_equal, c - margin);
        } else {
          region.add_constraint(std::move(a), opt::Relation::less_equal, -c - margin);
        }
      }
    if (empty || opt::solve_lp(region).status != opt::SolveStatus::optimal) continue;

    const ActivationPattern own = P.prefix(L - 1);
    for (const auto& Q : table.by_length[L - 1]) {
      if (Q == own) continue;
      opt::LpProblem lp = region;
      lp.sense = opt::Sense::minimize;
      for (std::size_t l = 0; l + 1 < L; ++l) {
        const AffineMap& m = maps[l][table.index(Q.prefix(l))];
        for (std::size_t s = 0; s < m.offset.size(); ++s) {
          // The penalty is max(0, sign * g) with sign -1 on units Q claims active.
          const double sign = Q.active(l, s) ? -1.0 : 1.0;
          const std::size_t t = lp.add_variable(0.0, opt::kInf, 1.0);
          Vector a(lp.num_variables(), 0.0);
          for (std::size_t c = 0; c < domain.dim(); ++c) a[c] = sign * m.matrix(s, c);
          a[t] = -1.0;
          lp.add_constraint(std::move(a), opt::Relation::less_equal, -sign * m.offset[s]);
        }
      }
      const opt::Solution s = opt::solve_lp(lp);
      if (s.status == opt::SolveStatus::optimal) best = std::min(best, s.objective);
    }
  }
  // Leave room for the LP's feasibility tolerance.
  return best * (1.0 - 1e-6);
}

inline BigH compute_big_H(const Network& net, const BoxDomain& domain, const PrefixTable& table,
                          const PatternSet* patterns, const ShallowConfig& config) {
  config.validate();
  BigH r;
  r.strategy = config.h_strategy;
  if (r.strategy == HStrategy::automatic)
    r.strategy = net.total_hidden_units() <= kLpStrategyMaxUnits ? HStrategy::lp_min_violation
                                                                 : HStrategy::conservative_interval;
  if (r.strategy == HStrategy::user_supplied) {
    r.H = config.user_H;
    return r;
  }
  r.U = upper_bound_U(net, domain, table, output_offsets(net, domain));
  r.delta = interior_margin(net, table, config.epsilon, config.norm);
  if (r.strategy == HStrategy::lp_min_violation) {
    std::optional<PatternSet> found;
    if (!patterns) {
      found = exhaustive_lp_patterns(net, domain);
      patterns = &*found;
    }
    r.delta = std::max(r.delta, lp_min_violation(net, domain, table, *patterns, config.epsilon, config.norm));
  }
  if (std::isfinite(r.delta) && r.delta <= 1e-12)
    throw NumericError("penalty margin underflow (delta = " + std::to_string(r.delta) +
                       "); epsilon is too small for double precision");
  r.H = std::isfinite(r.delta) ? r.U / r.delta : 0.0;
  if (r.H == 0.0) r.H = 1.0;
  return r;
}

inline void check_size(const ShallowWidths& w, const ShallowConfig& config) {
  const BigUint units = w.total();
  const BigUint weights = w.first * w.second;
  if (units > BigUint(config.max_units) || weights > BigUint(config.max_weights))
    throw LimitError("transformed network would have " + w.first.to_string() + " + " + w.second.to_string() +
                     " hidden units, above the configured size limit");
}

inline std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline Network build_shallow(const Network& net, const BoxDomain& domain, const PrefixTable& table, double H,
                             const std::string& construction, const ShallowConfig& config, const BigH& h) {
  const std::size_t L = net.num_hidden_layers();
  const std::size_t n0 = net.input_dim();
  const Layer& out = net.output_layer();
  const Vector C = output_offsets(net, domain);

  // First layer: penalty groups for layers 1..L-1, then the last group.
  std::vector<std::vector<std::size_t>> base(L);
  std::vector<std::pair<Vector, double>> rows;
  auto push = [&](std::span<const double> a, double c, double sign) {
    Vector r(a.begin(), a.end());
    for (double& v : r) v *= sign;
    rows.push_back({std::move(r), sign * c});
  };
  for (std::size_t l = 0; l < L; ++l)
    for (const auto& p : table.by_length[l]) {
      const AffineMap m = layer_map(net, p);
      base[l].push_back(rows.size());
      const std::size_t n = m.offset.size();
      for (std::size_t i = 0; i < n; ++i) push(m.matrix.row(i), m.offset[i], 1.0);
      if (l + 1 < L)
        for (std::size_t i = 0; i < n; ++i) push(m.matrix.row(i), m.offset[i], -1.0);
    }
  Layer first{Matrix(rows.size(), n0), Vector(rows.size()), Activation::relu};
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::copy(rows[r].first.begin(), rows[r].first.end(), first.weights.row(r).begin());
    first.bias[r] = rows[r].second;
  }

  const auto& groups = table.by_length[L - 1];
  const std::size_t K = groups.size(), m_out = out.width(), nL = net.layer(L - 1).width();
  Layer second{Matrix(m_out * K, rows.size()), Vector(m_out * K), Activation::relu};
  Layer output{Matrix(m_out, m_out * K), Vector(m_out), Activation::identity};
  for (std::size_t j = 0; j < m_out; ++j) {
    output.bias[j] = -C[j];
    for (std::size_t k = 0; k < K; ++k) {
      const std::size_t u = j * K + k;
      const ActivationPattern& q = groups[k];
      auto w = second.weights.row(u);
      for (std::size_t i = 0; i < nL; ++i) w[base[L - 1][k] + i] = out.weights(j, i);
      for (std::size_t l = 0; l + 1 < L; ++l) {
        const std::size_t b = base[l][table.index(q.prefix(l))];
        const std::size_t n = net.layer(l).width();
        for (std::size_t s = 0; s < n; ++s) w[q.active(l, s) ? b + n + s : b + s] = -H;
      }
      second.bias[u] = out.bias[j] + C[j];
      output.weights(j, u) = 1.0;
    }
  }

  Metadata meta;
  meta["construction"] = construction;
  meta["epsilon"] = format_double(config.epsilon);
  meta["norm"] = to_string(config.norm);
  meta["H"] = format_double(H);
  meta["H_strategy"] = to_string(h.strategy);
  meta["source_fingerprint"] = fingerprint(net);
  return Network(n0, {std::move(first), std::move(second), std::move(output)}, std::move(meta));
}

}  // namespace detail

// H for the construction over every prefix (patterns == nullptr) or over the
// feasible prefixes of a complete pattern set.
inline BigH compute_big_H(const Network& net, const BoxDomain& domain, const PatternSet* patterns,
                          const ShallowConfig& config) {
  if (net.num_hidden_layers() == 0) throw DimensionError("the network has no hidden layer");
  if (!patterns && net.total_hidden_units() > kMaxShallowFullUnits)
    throw LimitError("enumerating every prefix needs at most " + std::to_string(kMaxShallowFullUnits) +
                     " hidden units");
  const auto table = patterns ? detail::feasible_prefixes(net, *patterns) : detail::all_prefixes(net);
  return detail::compute_big_H(net, domain, table, patterns, config);
}

// Two-hidden-layer network agreeing with `net` at every epsilon-interior point
// of the domain, built over all 2^k prefixes.
inline Network shallow_full(const Network& net, const BoxDomain& domain, const ShallowConfig& config = {}) {
  config.validate();
  if (net.num_hidden_layers() == 0) throw DimensionError("the network has no hidden layer");
  if (domain.dim() != net.input_dim()) throw DimensionError("domain dimension mismatch");
  if (net.total_hidden_units() > kMaxShallowFullUnits)
    throw LimitError("the full construction supports at most " + std::to_string(kMaxShallowFullUnits) +
                     " hidden units");
  detail::check_size(widths_full(net.architecture()), config);
  const auto table = detail::all_prefixes(net);
  const BigH h = detail::compute_big_H(net, domain, table, nullptr, config);
  return detail::build_shallow(net, domain, table, h.H, "full", config, h);
}

// The same construction restricted to the feasible prefixes of a complete
// pattern set for (net, domain).
inline Network shallow_patterns(const Network& net, const BoxDomain& domain, const PatternSet& patterns,
                                const ShallowConfig& config = {}) {
  config.validate();
  if (net.num_hidden_layers() == 0) throw DimensionError("the network has no hidden layer");
  if (domain.dim() != net.input_dim()) throw DimensionError("domain dimension mismatch");
  if (!patterns.complete) throw InconsistentInputError("the pattern set is incomplete; missing regions would be lost");
  const auto table = detail::feasible_prefixes(net, patterns);
  std::vector<std::uint64_t> counts;
  for (const auto& v : table.by_length) counts.push_back(v.size());
  detail::check_size(widths_patterns(net.architecture(), counts), config);
  const BigH h = detail::compute_big_H(net, domain, table, &patterns, config);
  return detail::build_shallow(net, domain, table, h.H, "patterns", config, h);
}

}  // namespace reluforge
