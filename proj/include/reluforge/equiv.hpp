#pragma once

#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "reluforge/parallel.hpp"
#include "reluforge/shallow.hpp"

namespace reluforge {

enum class EquivalenceMode { sampled, region_exact, interior_filtered };
enum class Verdict { pass, fail, inconclusive };

inline std::string to_string(EquivalenceMode m) {
  switch (m) {
    case EquivalenceMode::sampled: return "sampled";
    case EquivalenceMode::region_exact: return "region-exact";
    case EquivalenceMode::interior_filtered: return "interior-filtered";
  }
  return "?";
}

inline std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "?";
}

struct Counterexample {
  Vector x;
  Vector f1;
  Vector f2;
};

struct EquivalenceReport {
  EquivalenceMode mode = EquivalenceMode::sampled;
  double tolerance = 0.0;
  std::size_t drawn = 0;   // points generated (samples or regions)
  std::size_t tested = 0;  // points actually compared
  double max_abs_deviation = 0.0;
  double max_rel_deviation = 0.0;
  std::size_t num_failures = 0;
  std::vector<Counterexample> failures;  // the first few only
  Verdict verdict = Verdict::pass;

  double acceptance_ratio() const { return drawn ? static_cast<double>(tested) / static_cast<double>(drawn) : 0.0; }
  bool passed() const { return verdict == Verdict::pass; }
};

inline constexpr std::size_t kMaxRecordedFailures = 10;
inline constexpr double kRegionCoefficientTol = 1e-8;

namespace detail {

inline void check_dims(const Network& a, const Network& b, const BoxDomain& d) {
  if (a.input_dim() != b.input_dim() || a.output_dim() != b.output_dim())
    throw DimensionError("networks differ in input or output dimension");
  if (d.dim() != a.input_dim()) throw DimensionError("domain dimension mismatch");
}

inline std::vector<Vector> uniform_points(const BoxDomain& d, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Vector> pts(n, Vector(d.dim()));
  for (auto& x : pts)
    for (std::size_t i = 0; i < d.dim(); ++i)
      x[i] = std::uniform_real_distribution<double>(d.lower()[i], d.upper()[i])(rng);
  return pts;
}

// Compares outputs at each point with a tolerance symmetric in the two nets.
inline void compare_points(const Network& a, const Network& b, const std::vector<Vector>& pts, double tol,
                           EquivalenceReport& r) {
  std::vector<Vector> fa(pts.size()), fb(pts.size());
  parallel_for(pts.size(), [&](std::size_t k) {
    fa[k] = evaluate(a, pts[k]);
    fb[k] = evaluate(b, pts[k]);
  });
  for (std::size_t k = 0; k < pts.size(); ++k) {
    double dev = 0.0;
    for (std::size_t j = 0; j < fa[k].size(); ++j) dev = std::max(dev, std::abs(fa[k][j] - fb[k][j]));
    const double scale = 1.0 + std::max(norm_inf(fa[k]), norm_inf(fb[k]));
    ++r.tested;
    r.max_abs_deviation = std::max(r.max_abs_deviation, dev);
    r.max_rel_deviation = std::max(r.max_rel_deviation, dev / scale);
    if (!(dev <= tol * scale)) {
      ++r.num_failures;
      if (r.failures.size() < kMaxRecordedFailures) r.failures.push_back({pts[k], fa[k], fb[k]});
    }
  }
  r.verdict = r.num_failures ? Verdict::fail : Verdict::pass;
}

}  // namespace detail

inline EquivalenceReport check_sampled(const Network& a, const Network& b, const BoxDomain& d, std::size_t n_samples,
                                       double tol, std::uint64_t seed) {
  detail::check_dims(a, b, d);
  EquivalenceReport r;
  r.mode = EquivalenceMode::sampled;
  r.tolerance = tol;
  r.drawn = n_samples;
  detail::compare_points(a, b, detail::uniform_points(d, n_samples, seed), tol, r);
  if (r.tested == 0) r.verdict = Verdict::inconclusive;
  return r;
}

// One interior witness per region of `a`; the region map of `b` at the
// witness must match a's coefficients. Regions without interior are skipped.
inline EquivalenceReport check_region_exact(const Network& a, const Network& b, const BoxDomain& d,
                                            const PatternSet& patterns_a) {
  detail::check_dims(a, b, d);
  if (!patterns_a.complete) throw InconsistentInputError("region-exact comparison needs a complete pattern set");
  EquivalenceReport r;
  r.mode = EquivalenceMode::region_exact;
  r.tolerance = kRegionCoefficientTol;
  const std::vector<ActivationPattern> pats(patterns_a.patterns.begin(), patterns_a.patterns.end());
  r.drawn = pats.size();
  std::vector<std::optional<InteriorPoint>> witness(pats.size());
  std::vector<double> dev(pats.size(), 0.0);
  parallel_for(pats.size(), [&](std::size_t k) {
    witness[k] = chebyshev_center(a, d, pats[k]);
    if (!witness[k]) return;
    const AffineMap ma = region_affine_map(a, pats[k]);
    const AffineMap mb = region_affine_map(b, forward(b, witness[k]->x).pattern);
    double worst = 0.0;
    for (std::size_t i = 0; i < ma.matrix.data().size(); ++i) {
      const double u = ma.matrix.data()[i], v = mb.matrix.data()[i];
      worst = std::max(worst, std::abs(u - v) / (1.0 + std::abs(u)));
    }
    for (std::size_t i = 0; i < ma.offset.size(); ++i)
      worst = std::max(worst, std::abs(ma.offset[i] - mb.offset[i]) / (1.0 + std::abs(ma.offset[i])));
    dev[k] = worst;
  });
  for (std::size_t k = 0; k < pats.size(); ++k) {
    if (!witness[k]) continue;
    ++r.tested;
    r.max_rel_deviation = std::max(r.max_rel_deviation, dev[k]);
    const Vector fa = evaluate(a, witness[k]->x), fb = evaluate(b, witness[k]->x);
    for (std::size_t j = 0; j < fa.size(); ++j)
      r.max_abs_deviation = std::max(r.max_abs_deviation, std::abs(fa[j] - fb[j]));
    if (!(dev[k] <= kRegionCoefficientTol)) {
      ++r.num_failures;
      if (r.failures.size() < kMaxRecordedFailures) r.failures.push_back({witness[k]->x, fa, fb});
    }
  }
  r.verdict = r.num_failures ? Verdict::fail : (r.tested ? Verdict::pass : Verdict::inconclusive);
  return r;
}

// Compares only at points certified epsilon-interior for `a`; inconclusive
// when no sample survives the filter.
inline EquivalenceReport check_interior_filtered(const Network& a, const Network& b, const BoxDomain& d,
                                                 double epsilon, Norm norm, std::size_t n_samples, double tol,
                                                 std::uint64_t seed) {
  detail::check_dims(a, b, d);
  EquivalenceReport r;
  r.mode = EquivalenceMode::interior_filtered;
  r.tolerance = tol;
  r.drawn = n_samples;
  const auto all = detail::uniform_points(d, n_samples, seed);
  std::vector<char> keep(all.size(), 0);
  parallel_for(all.size(), [&](std::size_t k) { keep[k] = is_interior(a, all[k], epsilon, norm); });
  std::vector<Vector> pts;
  for (std::size_t k = 0; k < all.size(); ++k)
    if (keep[k]) pts.push_back(all[k]);
  detail::compare_points(a, b, pts, tol, r);
  if (r.tested == 0) r.verdict = Verdict::inconclusive;
  return r;
}

inline nlohmann::json report_to_json(const EquivalenceReport& r) {
  nlohmann::json j;
  j["mode"] = to_string(r.mode);
  j["tolerance"] = r.tolerance;
  j["drawn"] = r.drawn;
  j["tested"] = r.tested;
  j["acceptance_ratio"] = r.acceptance_ratio();
  j["max_abs_deviation"] = r.max_abs_deviation;
  j["max_rel_deviation"] = r.max_rel_deviation;
  j["num_failures"] = r.num_failures;
  j["failures"] = nlohmann::json::array();
  for (const auto& f : r.failures) j["failures"].push_back({{"x", f.x}, {"f1", f.f1}, {"f2", f.f2}});
  j["verdict"] = to_string(r.verdict);
  return j;
}

inline std::string summary(const EquivalenceReport& r) {
  std::ostringstream os;
  os << to_string(r.mode) << ": " << to_string(r.verdict) << " (" << r.tested << "/" << r.drawn
     << " compared, max abs dev " << r.max_abs_deviation << ", max rel dev " << r.max_rel_deviation << ", "
     << r.num_failures << " failures)";
  return os.str();
}

}  // namespace reluforge
