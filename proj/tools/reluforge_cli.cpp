#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "reluforge/compressor.hpp"
#include "reluforge/equiv.hpp"
#include "reluforge/network_io.hpp"
#include "reluforge/regions.hpp"
#include "reluforge/shallow.hpp"
#include "reluforge/stability.hpp"

using namespace reluforge;

namespace {

enum Exit { kOk = 0, kVerifyFailed = 1, kUsage = 2, kSolverLimit = 3 };

struct UsageError : Error {
  using Error::Error;
};

struct DomainArgs {
  std::vector<double> box;  // lo,hi
  std::string center_file;
  double delta = -1.0;
  std::vector<double> clip;
};

void add_domain_options(CLI::App* cmd, DomainArgs& d) {
  cmd->add_option("--domain", d.box, "uniform box lo,hi applied to every input (default 0,1)")->delimiter(',')->expected(2);
  cmd->add_option("--domain-center", d.center_file, "JSON file with the center point (array or {\"center\": [...]})");
  cmd->add_option("--delta", d.delta, "half-width of the box around --domain-center");
  cmd->add_option("--clip", d.clip, "clip the centered box to lo,hi")->delimiter(',')->expected(2);
}

Vector load_center(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  const nlohmann::json& arr = j.is_object() && j.contains("center") ? j["center"] : j;
  if (!arr.is_array()) throw ParseError(path + ": expected an array of numbers");
  Vector v;
  for (const auto& x : arr) {
    if (!x.is_number()) throw ParseError(path + ": expected an array of numbers");
    v.push_back(x.get<double>());
  }
  return v;
}

std::optional<std::pair<double, double>> clip_of(const DomainArgs& a) {
  if (a.clip.empty()) return std::nullopt;
  return std::pair{a.clip[0], a.clip[1]};
}

BoxDomain make_domain(const DomainArgs& a, std::size_t n0) {
  if (!a.center_file.empty()) {
    if (!a.box.empty()) throw UsageError("--domain and --domain-center are mutually exclusive");
    if (a.delta < 0.0) throw UsageError("--domain-center needs a non-negative --delta");
    Vector c = load_center(a.center_file);
    if (c.size() != n0)
      throw UsageError("center has " + std::to_string(c.size()) + " entries, network input has " + std::to_string(n0));
    return BoxDomain::around(c, a.delta, clip_of(a));
  }
  if (a.delta >= 0.0) throw UsageError("--delta needs --domain-center");
  const double lo = a.box.empty() ? 0.0 : a.box[0], hi = a.box.empty() ? 1.0 : a.box[1];
  if (!(lo <= hi)) throw UsageError("--domain needs lo <= hi");
  return BoxDomain::uniform(n0, lo, hi);
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write " + path);
  out << text;
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

std::string join(const std::vector<std::size_t>& v, char sep) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? std::string(1, sep) : "") + std::to_string(v[i]);
  return s;
}

struct SolverArgs {
  std::string mode = "exact";
  double time_limit = opt::kInf;
  double stability_tol = 0.0;
};

void add_solver_options(CLI::App* cmd, SolverArgs& s) {
  cmd->add_option("--mode", s.mode, "bound mode: exact, feasibility-first, relaxed-only");
  cmd->add_option("--time-limit", s.time_limit, "seconds per MILP solve");
  cmd->add_option("--stability-tol", s.stability_tol, "classify a unit stable when its bound is within this of 0");
}

ClassifyOptions classify_options(const SolverArgs& s) {
  ClassifyOptions o;
  o.bounds.mode = parse_bound_mode(s.mode);
  o.bounds.time_limit_s = s.time_limit;
  o.stability_tol = s.stability_tol;
  return o;
}

StabilityReport report_for(const Network& net, const BoxDomain& d, const std::string& report_file,
                           const SolverArgs& s) {
  if (report_file.empty()) return classify_units(net, d, classify_options(s));
  StabilityReport r = report_from_json(read_json(report_file));
  if (!r.matches(net, d)) throw InconsistentInputError(report_file + " was computed for another network or domain");
  return r;
}

bool any_relaxed(const StabilityReport& r) {
  for (const auto& l : r.layers)
    for (const auto& u : l)
      if (u.bounds.provenance != Provenance::exact) return true;
  return false;
}

std::string layer_counts_csv(const StabilityReport& r) {
  std::ostringstream os;
  os << "layer,width,stably_inactive,stably_active,unstable\n";
  for (std::size_t l = 0; l < r.layers.size(); ++l)
    os << l + 1 << ',' << r.layers[l].size() << ',' << r.count(l, StabilityClass::stably_inactive) << ','
       << r.count(l, StabilityClass::stably_active) << ',' << r.count(l, StabilityClass::unstable) << '\n';
  return os.str();
}

// ---- bounds

struct BoundsArgs {
  std::string net, out, csv;
  DomainArgs domain;
  SolverArgs solver;
  bool no_timing = false;
};

int cmd_bounds(const BoundsArgs& a) {
  const Network net = load_network_file(a.net);
  const BoxDomain d = make_domain(a.domain, net.input_dim());
  const StabilityReport r = classify_units(net, d, classify_options(a.solver));
  write_text(a.out, report_to_json(r, !a.no_timing).dump(1) + "\n");
  if (!a.csv.empty()) write_text(a.csv, layer_counts_csv(r));
  std::cerr << "stably inactive " << r.count(StabilityClass::stably_inactive) << ", stably active "
            << r.count(StabilityClass::stably_active) << ", unstable " << r.count(StabilityClass::unstable) << "\n";
  return kOk;
}

// ---- compress

struct CompressArgs {
  std::string net, out, report, trace;
  DomainArgs domain;
  SolverArgs solver;
  bool no_verify = false;
  std::size_t samples = 10000;
  double tol = 1e-6;
  std::uint64_t seed = 0;
};

int cmd_compress(const CompressArgs& a) {
  const Network net = load_network_file(a.net);
  const BoxDomain d = make_domain(a.domain, net.input_dim());
  const StabilityReport r = report_for(net, d, a.report, a.solver);
  const CompressionResult c = stability_compression(net, d, r);
  if (!a.no_verify) {
    const EquivalenceReport e = check_sampled(net, c.network, d, a.samples, a.tol, a.seed);
    std::cerr << summary(e) << "\n";
    if (!e.passed()) {
      std::cerr << "refusing to write a network that failed the equivalence check\n";
      return kVerifyFailed;
    }
  } else {
    std::cerr << "warning: equivalence check skipped (--no-verify)\n";
  }
  write_text(a.out, save_network(c.network));
  if (!a.trace.empty()) write_text(a.trace, trace_to_json(c.trace).dump(1) + "\n");
  std::cerr << "hidden units " << join(c.trace.units_before, ',') << " -> "
            << (c.network.num_hidden_layers() ? join(c.network.hidden_widths(), ',') : std::string("none"))
            << " (" << c.trace.actions.size() << " actions)\n";
  return kOk;
}

// ---- regions

struct RegionsArgs {
  std::string net, out, report, summary;
  DomainArgs domain;
  SolverArgs solver;
  std::vector<double> alphas;
  std::size_t limit = 0;
  double enum_time_limit = opt::kInf;
  bool no_timing = false;
};

int cmd_regions(const RegionsArgs& a) {
  const Network net = load_network_file(a.net);
  std::vector<std::pair<std::string, BoxDomain>> domains;
  if (a.alphas.empty()) {
    domains.push_back({"box", make_domain(a.domain, net.input_dim())});
  } else {
    if (!a.report.empty()) throw UsageError("--report cannot be combined with an --alpha sweep");
    for (double alpha : a.alphas) domains.push_back({fmt(alpha), BoxDomain::uniform(net.input_dim(), 0.0, alpha)});
  }
  EnumerationLimits lim;
  if (a.limit) lim.max_patterns = a.limit;
  lim.time_limit_s = a.enum_time_limit;

  std::ostringstream rows, patterns;
  rows << (a.alphas.empty() ? "domain" : "alpha") << ",stably_inactive,stably_active,patterns,complete,time_s\n";
  bool all_complete = true;
  for (const auto& [label, d] : domains) {
    const auto start = std::chrono::steady_clock::now();
    const StabilityReport r = report_for(net, d, a.alphas.empty() ? a.report : "", a.solver);
    const PatternSet ps = enumerate_patterns(net, d, r, lim);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    all_complete = all_complete && ps.complete && !any_relaxed(r);
    rows << label << ',' << r.count(StabilityClass::stably_inactive) << ',' << r.count(StabilityClass::stably_active)
         << ',' << ps.size() << ',' << (ps.complete ? "true" : "false") << ',' << (a.no_timing ? "0" : fmt(secs))
         << '\n';
    write_patterns(patterns, ps);
  }
  if (!a.out.empty()) write_text(a.out, patterns.str());
  write_text(a.summary, rows.str());
  return all_complete ? kOk : kSolverLimit;
}

// ---- shallow

struct ShallowArgs {
  std::string net, out_full, out_patterns, H_strategy = "auto";
  DomainArgs domain;
  SolverArgs solver;
  double epsilon = 1e-3;
  std::string norm = "linf";
  double H = 0.0;
  std::size_t max_units = 100000;
  std::size_t check_samples = 0;
  double tol = 1e-6;
  std::uint64_t seed = 0;
};

int cmd_shallow(const ShallowArgs& a) {
  const Network net = load_network_file(a.net);
  const BoxDomain d = make_domain(a.domain, net.input_dim());
  ShallowConfig cfg;
  cfg.epsilon = a.epsilon;
  cfg.norm = parse_norm(a.norm);
  cfg.h_strategy = parse_h_strategy(a.H_strategy);
  if (a.H > 0.0) {
    cfg.h_strategy = HStrategy::user_supplied;
    cfg.user_H = a.H;
  }
  cfg.max_units = a.max_units;
  cfg.validate();

  const auto arch = net.architecture();
  const ShallowWidths full = widths_full(arch);
  const StabilityReport r = classify_units(net, d, classify_options(a.solver));
  const PatternSet ps = enumerate_patterns(net, d, r);
  std::string t3a = "", t3b = "";
  std::optional<ShallowWidths> pat;
  if (ps.complete && !ps.patterns.empty()) {
    auto counts = prefix_sets(ps).counts();
    counts.pop_back();
    pat = widths_patterns(arch, std::vector<std::uint64_t>(counts.begin(), counts.end()));
    t3a = pat->first.to_string();
    t3b = pat->second.to_string();
  }
  std::cout << "arch,patterns,full_n1,full_n2,patterns_n1,patterns_n2\n"
            << join(arch, '-') << ',' << ps.size() << ',' << full.first << ',' << full.second << ',' << t3a << ','
            << t3b << '\n';

  int status = ps.complete ? kOk : kSolverLimit;
  auto emit = [&](const std::string& path, auto build) {
    if (path.empty()) return;
    std::optional<Network> s;
    try {
      s = build();
    } catch (const LimitError& e) {
      std::cerr << "warning: " << e.what() << "; network not written\n";
      return;
    }
    if (a.check_samples) {
      const auto e = check_interior_filtered(net, *s, d, cfg.epsilon, cfg.norm, a.check_samples, a.tol, a.seed);
      std::cerr << path << ": " << summary(e) << "\n";
      if (!e.passed()) status = kVerifyFailed;
    }
    write_text(path, save_network(*s));
  };
  emit(a.out_full, [&] { return shallow_full(net, d, cfg); });
  if (!a.out_patterns.empty() && !ps.complete) {
    std::cerr << "warning: pattern enumeration incomplete; the pattern-restricted network is not written\n";
  } else {
    emit(a.out_patterns, [&] { return shallow_patterns(net, d, ps, cfg); });
  }
  return status;
}

// ---- verify

struct VerifyArgs {
  std::string net, other, mode = "sampled", json;
  DomainArgs domain;
  SolverArgs solver;
  std::size_t samples = 10000;
  double tol = 1e-6, epsilon = 1e-3;
  std::string norm = "linf";
  std::uint64_t seed = 0;
};

int cmd_verify(const VerifyArgs& a) {
  const Network n1 = load_network_file(a.net), n2 = load_network_file(a.other);
  const BoxDomain d = make_domain(a.domain, n1.input_dim());
  EquivalenceReport e;
  if (a.mode == "sampled") {
    e = check_sampled(n1, n2, d, a.samples, a.tol, a.seed);
  } else if (a.mode == "region-exact") {
    const StabilityReport r = classify_units(n1, d, classify_options(a.solver));
    const PatternSet ps = enumerate_patterns(n1, d, r);
    if (!ps.complete) {
      std::cerr << "pattern enumeration hit a limit\n";
      return kSolverLimit;
    }
    e = check_region_exact(n1, n2, d, ps);
  } else if (a.mode == "interior-filtered") {
    e = check_interior_filtered(n1, n2, d, a.epsilon, parse_norm(a.norm), a.samples, a.tol, a.seed);
  } else {
    throw UsageError("unknown --method " + a.mode);
  }
  std::cout << summary(e) << "\n";
  if (!a.json.empty()) write_text(a.json, report_to_json(e).dump(1) + "\n");
  return e.passed() ? kOk : kVerifyFailed;
}

// ---- local-stability

struct LocalArgs {
  std::string net, center, csv;
  std::vector<double> deltas{0.0001, 0.001, 0.01, 0.1, 1.0};
  std::vector<double> clip;
  SolverArgs solver;
  std::size_t limit = 0;
  double enum_time_limit = opt::kInf;
};

int cmd_local_stability(const LocalArgs& a) {
  const Network net = load_network_file(a.net);
  const Vector c = load_center(a.center);
  if (c.size() != net.input_dim()) throw UsageError("center does not match the network input dimension");
  std::optional<std::pair<double, double>> clip;
  if (!a.clip.empty()) clip = std::pair{a.clip[0], a.clip[1]};
  EnumerationLimits lim;
  if (a.limit) lim.max_patterns = a.limit;
  lim.time_limit_s = a.enum_time_limit;
  std::ostringstream os;
  os << "delta,stably_inactive,stably_active,patterns,complete\n";
  bool complete = true;
  for (double delta : a.deltas) {
    const BoxDomain d = BoxDomain::around(c, delta, clip);
    const StabilityReport r = classify_units(net, d, classify_options(a.solver));
    const PatternSet ps = enumerate_patterns(net, d, r, lim);
    complete = complete && ps.complete && !any_relaxed(r);
    os << fmt(delta) << ',' << r.count(StabilityClass::stably_inactive) << ','
       << r.count(StabilityClass::stably_active) << ',' << ps.size() << ',' << (ps.complete ? "true" : "false")
       << '\n';
  }
  write_text(a.csv, os.str());
  return complete ? kOk : kSolverLimit;
}

// ---- widths

struct WidthsArgs {
  std::vector<std::size_t> arch;
  std::vector<std::uint64_t> prefix_counts;
};

int cmd_widths(const WidthsArgs& a) {
  const ShallowWidths full = widths_full(a.arch);
  std::cout << "arch,full_n1,full_n2,patterns_n1,patterns_n2\n" << join(a.arch, '-') << ',' << full.first << ','
            << full.second << ',';
  if (!a.prefix_counts.empty()) {
    const ShallowWidths p = widths_patterns(a.arch, a.prefix_counts);
    std::cout << p.first << ',' << p.second;
  } else {
    std::cout << ',';
  }
  std::cout << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"reluforge: stability analysis, compression and shallow transforms of ReLU networks"};
  app.require_subcommand(1);

  BoundsArgs ba;
  auto* bounds = app.add_subcommand("bounds", "per-unit pre-activation bounds and stability classes");
  bounds->add_option("--net", ba.net, "network JSON")->required();
  bounds->add_option("--out", ba.out, "report JSON (default stdout)");
  bounds->add_option("--csv", ba.csv, "per-layer stable counts CSV");
  bounds->add_flag("--no-timing", ba.no_timing, "zero all timing fields for reproducible output");
  add_domain_options(bounds, ba.domain);
  add_solver_options(bounds, ba.solver);

  CompressArgs ca;
  auto* compress = app.add_subcommand("compress", "remove stable units and layers without changing the function");
  compress->add_option("--net", ca.net, "network JSON")->required();
  compress->add_option("--out", ca.out, "compressed network JSON (default stdout)");
  compress->add_option("--report", ca.report, "reuse a stability report instead of recomputing it");
  compress->add_option("--emit-trace", ca.trace, "write the compression trace JSON");
  compress->add_flag("--no-verify", ca.no_verify, "skip the sampled equivalence check (unsafe)");
  compress->add_option("--samples", ca.samples, "samples for the equivalence check");
  compress->add_option("--tol", ca.tol, "relative tolerance of the equivalence check");
  compress->add_option("--seed", ca.seed, "sampling seed");
  add_domain_options(compress, ca.domain);
  add_solver_options(compress, ca.solver);

  RegionsArgs ra;
  auto* regions = app.add_subcommand("regions", "enumerate the activation patterns of the linear regions");
  regions->add_option("--net", ra.net, "network JSON")->required();
  regions->add_option("--out", ra.out, "pattern file (JSON lines)");
  regions->add_option("--summary", ra.summary, "summary CSV (default stdout)");
  regions->add_option("--report", ra.report, "reuse a stability report");
  regions->add_option("--alpha", ra.alphas, "sweep over the boxes [0, alpha]^n")->delimiter(',');
  regions->add_option("--limit", ra.limit, "stop after this many patterns");
  regions->add_option("--enum-time-limit", ra.enum_time_limit, "seconds for each enumeration");
  regions->add_flag("--no-timing", ra.no_timing, "zero all timing fields");
  add_domain_options(regions, ra.domain);
  add_solver_options(regions, ra.solver);

  ShallowArgs sa;
  auto* shallow = app.add_subcommand("shallow", "two-hidden-layer approximations and their widths");
  shallow->add_option("--net", sa.net, "network JSON")->required();
  shallow->add_option("--out-full", sa.out_full, "write the construction over every prefix");
  shallow->add_option("--out-patterns", sa.out_patterns, "write the construction over feasible prefixes");
  shallow->add_option("--epsilon", sa.epsilon, "interiority distance");
  shallow->add_option("--norm", sa.norm, "linf or l2");
  shallow->add_option("--H-strategy", sa.H_strategy, "auto, conservative-interval, lp-min-violation");
  shallow->add_option("--H", sa.H, "use this penalty constant");
  shallow->add_option("--max-units", sa.max_units, "skip networks with more hidden units");
  shallow->add_option("--check-samples", sa.check_samples, "interior-filtered check with this many samples");
  shallow->add_option("--tol", sa.tol, "relative tolerance of the check");
  shallow->add_option("--seed", sa.seed, "sampling seed");
  add_domain_options(shallow, sa.domain);
  add_solver_options(shallow, sa.solver);

  VerifyArgs va;
  auto* verify = app.add_subcommand("verify", "compare two networks on a domain");
  verify->add_option("--net", va.net, "reference network JSON")->required();
  verify->add_option("--other", va.other, "network to compare")->required();
  verify->add_option("--method", va.mode, "sampled, region-exact, interior-filtered");
  verify->add_option("--samples", va.samples, "number of samples");
  verify->add_option("--tol", va.tol, "relative tolerance");
  verify->add_option("--epsilon", va.epsilon, "interiority distance (interior-filtered)");
  verify->add_option("--norm", va.norm, "linf or l2 (interior-filtered)");
  verify->add_option("--seed", va.seed, "sampling seed");
  verify->add_option("--json", va.json, "write the report JSON");
  add_domain_options(verify, va.domain);
  add_solver_options(verify, va.solver);

  LocalArgs la;
  auto* local = app.add_subcommand("local-stability", "stable units and patterns on boxes around a point");
  local->add_option("--net", la.net, "network JSON")->required();
  local->add_option("--domain-center", la.center, "center point JSON")->required();
  local->add_option("--deltas", la.deltas, "box half-widths")->delimiter(',');
  local->add_option("--clip", la.clip, "clip every box to lo,hi")->delimiter(',')->expected(2);
  local->add_option("--csv", la.csv, "output CSV (default stdout)");
  local->add_option("--limit", la.limit, "stop each enumeration after this many patterns");
  local->add_option("--enum-time-limit", la.enum_time_limit, "seconds for each enumeration");
  add_solver_options(local, la.solver);

  WidthsArgs wa;
  auto* widths = app.add_subcommand("widths", "unit counts of the two-hidden-layer constructions");
  widths->add_option("--arch", wa.arch, "n0,n1,...,nL,n(L+1)")->delimiter(',')->required();
  widths->add_option("--prefix-counts", wa.prefix_counts, "feasible prefix counts |A_0|..|A_(L-1)|")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (*bounds) return cmd_bounds(ba);
    if (*compress) return cmd_compress(ca);
    if (*regions) return cmd_regions(ra);
    if (*shallow) return cmd_shallow(sa);
    if (*verify) return cmd_verify(va);
    if (*local) return cmd_local_stability(la);
    if (*widths) return cmd_widths(wa);
  } catch (const LimitError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kSolverLimit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
