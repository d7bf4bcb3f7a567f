// Command-line surface for the library: covariance coefficients, flow
// trajectories, critical-point search, susceptibility and specific-heat
// curves, exponent tables, polymer identity suites, and the oracle
// cross-check battery.
//
// Conventions shared by every subcommand:
//   - CSV artifacts carry 17 significant digits and a fixed column set.
//   - Scalar reports are JSON on stdout; --output also writes them to a file.
//   - Every output file gets a sidecar <file>.meta.json with the version,
//     the fully resolved configuration, and the wall time.
//   - Exit 0 on success, 2 on usage errors, 1 on computation errors.
//   - A --config file holds `key = value` lines (# comments); unknown keys
//     are errors and explicit flags override file values.

#include <algorithm>
#include <chrono>
#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "phi4rg/covariance.hpp"
#include "phi4rg/flow.hpp"
#include "phi4rg/observables.hpp"
#include "phi4rg/oracle.hpp"
#include "phi4rg/polymers.hpp"

namespace {

using nlohmann::json;

constexpr const char* kVersion = "1.0.0";

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Buffers every artifact so that nothing touches the filesystem until the
// computation has finished; a failure therefore leaves no partial outputs,
// and a failed flush removes whatever it had already written.
struct Emitter {
  std::string command;
  json config = json::object();
  std::vector<std::pair<std::string, std::string>> files;
  std::string stdout_payload;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  void add_file(const std::string& path, std::string content) {
    files.emplace_back(path, std::move(content));
  }

  void flush() {
    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    json meta{{"version", kVersion},
              {"command", command},
              {"config", config},
              {"wall_time_seconds", wall}};
    std::vector<std::string> written;
    auto write_one = [&](const std::string& path, const std::string& body) {
      std::ofstream out(path, std::ios::binary | std::ios::trunc);
      out << body;
      if (!out) {
        for (const std::string& p : written) std::remove(p.c_str());
        throw std::runtime_error("cannot write " + path);
      }
      written.push_back(path);
    };
    for (const auto& [path, body] : files) {
      write_one(path, body);
      write_one(path + ".meta.json", meta.dump(2) + "\n");
    }
    if (!stdout_payload.empty()) std::cout << stdout_payload;
  }
};

struct Options {
  double L = 2.0;
  double t1 = 0.0625;
  double m2 = 0.0;
  std::vector<double> m2_list;
  double m2_min = 1e-8;
  double m2_max = 1e-2;
  int points = 9;
  int n = 1;
  int jmax = 0;  // 0 selects the automatic mass-scale cap
  int refine = 12;
  int workers = 1;
  int subnodes = 4;
  int extra_scales = 64;
  double g0 = 0.05;
  double nu0 = 0.0;
  double z0 = 0.0;
  double tol = 1e-12;
  double mu_escape = 1.0;
  double g = 0.0;
  double nu = 1.0;
  int side = 4;
  long long sweeps = 10000;
  std::uint64_t seed = 1;
  std::string backend = "proper-time";
  std::string toggle = "on";
  std::string output;
  std::string config_path;
};

phi4rg::SliceSchedule schedule(const Options& o) {
  phi4rg::SliceSchedule sc;
  sc.L = o.L;
  sc.t1 = o.t1;
  return sc;
}

int auto_jmax(const Options& o) {
  phi4rg::SliceSchedule sc = schedule(o);
  if (o.jmax > 0) return std::min(o.jmax, phi4rg::scale_overflow_cap(sc));
  double m = std::sqrt(std::max(o.m2, 1e-32));
  int cap = static_cast<int>(std::ceil(10.0 * std::log(1.0 / m) / std::log(o.L)));
  return std::min(std::max(cap, 1), phi4rg::scale_overflow_cap(sc));
}

std::vector<double> geometric_grid(double lo, double hi, int points) {
  if (!(lo < hi)) throw CLI::ValidationError("grid", "--m2-min must be below --m2-max");
  std::vector<double> g(static_cast<std::size_t>(points));
  double ratio = std::log(hi / lo) / (points - 1);
  for (int i = 0; i < points; ++i) g[static_cast<std::size_t>(i)] = lo * std::exp(ratio * i);
  g.front() = lo;
  g.back() = hi;
  return g;
}

// ---------------------------------------------------------------- beta

std::string resolve_output(const Options& o, const char* fallback) {
  return o.output.empty() ? std::string(fallback) : o.output;
}

void run_beta(const Options& o, Emitter& em) {
  int J = o.jmax > 0 ? o.jmax : 16;
  std::string out = resolve_output(o, "beta.csv");
  em.config = json{{"L", o.L},   {"t1", o.t1},           {"m2", o.m2},
                   {"jmax", J},  {"backend", o.backend}, {"refine", o.refine},
                   {"output", out}};
  phi4rg::SliceSchedule sc = schedule(o);
  std::ostringstream csv;
  csv << "j,b_j\n";
  for (int j = 0; j < J; ++j) {
    double b = o.backend == "brillouin" ? phi4rg::beta_coeff_bz(sc, j, o.m2, o.refine)
                                        : phi4rg::beta_coeff(sc, j, o.m2);
    csv << j << ',' << fmt17(b) << '\n';
  }
  em.add_file(out, csv.str());
}

// ---------------------------------------------------------------- bubble

void run_bubble(const Options& o, Emitter& em) {
  std::string out = resolve_output(o, "bubble.csv");
  em.config = json{{"m2", o.m2_list}, {"output", out}};
  std::ostringstream csv;
  csv << "m2,B\n";
  for (double m2 : o.m2_list) csv << fmt17(m2) << ',' << fmt17(phi4rg::bubble(m2)) << '\n';
  em.add_file(out, csv.str());
}

// ---------------------------------------------------------------- flow

phi4rg::FlowParams flow_params(const Options& o) {
  phi4rg::FlowParams p;
  p.n = o.n;
  p.g0 = o.g0;
  p.nu0 = o.nu0;
  p.driving = o.toggle == "on";
  p.mu_escape = o.mu_escape;
  return p;
}

void run_flow_cmd(const Options& o, Emitter& em) {
  int J = auto_jmax(o);
  std::string out = resolve_output(o, "flow.csv");
  em.config = json{{"n", o.n},           {"L", o.L},
                   {"t1", o.t1},         {"m2", o.m2},
                   {"g0", o.g0},         {"nu0", o.nu0},
                   {"toggle-driving", o.toggle}, {"jmax", J},
                   {"mu-escape", o.mu_escape},   {"output", out}};
  phi4rg::SliceSchedule sc = schedule(o);
  phi4rg::FlowTables tab = phi4rg::make_flow_tables(sc, o.m2, J);
  phi4rg::FlowResult r = phi4rg::run_flow(flow_params(o), tab);

  std::ostringstream csv;
  csv << "j,g,mu,nu,nuprime\n";
  for (std::size_t j = 0; j < r.g.size(); ++j) {
    double nu = r.mu[j] * std::pow(o.L, -2.0 * static_cast<double>(j));
    csv << j << ',' << fmt17(r.g[j]) << ',' << fmt17(r.mu[j]) << ',' << fmt17(nu) << ','
        << fmt17(r.nuprime[j]) << '\n';
  }
  em.add_file(out, csv.str());
}

void run_critical(const Options& o, Emitter& em) {
  int J = auto_jmax(o);
  em.config = json{{"n", o.n},   {"L", o.L},   {"t1", o.t1},
                   {"m2", o.m2}, {"g0", o.g0}, {"toggle-driving", o.toggle},
                   {"jmax", J},  {"mu-escape", o.mu_escape}, {"tol", o.tol},
                   {"output", o.output}};
  phi4rg::SliceSchedule sc = schedule(o);
  phi4rg::FlowTables tab = phi4rg::make_flow_tables(sc, o.m2, J);
  phi4rg::CriticalPoint cp = phi4rg::find_critical_nu0(flow_params(o), tab, o.tol);
  json rec{{"m2", cp.m2},
           {"g0", cp.g0},
           {"nu0c", cp.nu0c},
           {"bracket", cp.bracket},
           {"iterations", cp.iterations},
           {"escape_scale", cp.escape_scale},
           {"escape_scale_monotone", cp.escape_scale_monotone}};
  em.stdout_payload = rec.dump(2) + "\n";
  if (!o.output.empty()) em.add_file(o.output, em.stdout_payload);
}

// ---------------------------------------------------------------- curves

void run_chi_curve(const Options& o, Emitter& em) {
  em.config = json{{"n", o.n},       {"L", o.L},         {"t1", o.t1},
                   {"g0", o.g0},     {"z0", o.z0},       {"m2-min", o.m2_min},
                   {"m2-max", o.m2_max}, {"points", o.points},
                   {"route-subnodes", o.subnodes},       {"extra-scales", o.extra_scales},
                   {"workers", o.workers},               {"output", resolve_output(o, "chi-curve.csv")}};
  phi4rg::ChiOptions opt;
  opt.z0 = o.z0;
  opt.route_subnodes = o.subnodes;
  opt.extra_scales = o.extra_scales;
  opt.workers = o.workers;
  phi4rg::ChiCurve cv = phi4rg::chi_curve(o.n, schedule(o), o.g0,
                                          geometric_grid(o.m2_min, o.m2_max, o.points), opt);
  std::ostringstream csv;
  csv << "m2,nu0c,nu,eps,chi,dchidnu,Aeff,gammaeff\n";
  for (std::size_t i = 0; i < cv.pts.size(); ++i) {
    const phi4rg::ChiPoint& p = cv.pts[i];
    // gammaeff on row i is the midpoint exponent of the interval ending at i.
    double ge = i == 0 ? std::numeric_limits<double>::quiet_NaN() : cv.gamma_eff[i - 1];
    csv << fmt17(p.m2) << ',' << fmt17(p.nu0c) << ',' << fmt17(p.nu) << ',' << fmt17(p.eps)
        << ',' << fmt17(p.chi) << ',' << fmt17(p.dchidnu) << ',' << fmt17(cv.A_eff[i]) << ','
        << fmt17(ge) << '\n';
  }
  em.add_file(resolve_output(o, "chi-curve.csv"), csv.str());
}

void run_specific_heat(const Options& o, Emitter& em) {
  em.config = json{{"n", o.n},       {"L", o.L},   {"t1", o.t1},
                   {"g0", o.g0},     {"m2-min", o.m2_min}, {"m2-max", o.m2_max},
                   {"points", o.points},           {"extra-scales", o.extra_scales},
                   {"workers", o.workers},         {"output", resolve_output(o, "specific-heat.csv")}};
  phi4rg::ChiOptions opt;
  opt.extra_scales = o.extra_scales;
  opt.workers = o.workers;
  phi4rg::HeatCurve hc = phi4rg::specific_heat_proxy(
      o.n, schedule(o), o.g0, geometric_grid(o.m2_min, o.m2_max, o.points), opt);
  std::ostringstream csv;
  csv << "m2,eps,cH,exponent_eff\n";
  for (std::size_t i = 0; i < hc.pts.size(); ++i) {
    const phi4rg::HeatPoint& p = hc.pts[i];
    double ee = i == 0 ? std::numeric_limits<double>::quiet_NaN() : hc.exponent_eff[i - 1];
    csv << fmt17(p.m2) << ',' << fmt17(p.eps) << ',' << fmt17(p.cH) << ',' << fmt17(ee) << '\n';
  }
  em.add_file(resolve_output(o, "specific-heat.csv"), csv.str());
}

void run_exponents(const Options& o, Emitter& em) {
  em.config = json{{"n", o.n}, {"output", o.output}};
  phi4rg::ExponentTable t = phi4rg::theory_exponents(o.n);
  json rec{{"n", t.n},
           {"gamma_log", t.gamma_log},
           {"xi_log", t.xi_log},
           {"cH_exponent", t.cH_exponent},
           {"cH_loglog", t.cH_loglog},
           {"cH_bounded", t.cH_bounded}};
  em.stdout_payload = rec.dump(2) + "\n";
  if (!o.output.empty()) em.add_file(o.output, em.stdout_payload);
}

// ---------------------------------------------------------------- polymers

std::vector<double> deterministic_table(std::size_t size, std::uint64_t seed, bool normalised) {
  std::mt19937_64 rng(seed);
  std::vector<double> t(size);
  for (double& v : t) v = 0.25 + static_cast<double>(rng() >> 11) * 0x1p-53;
  if (normalised) t[0] = 1.0;
  return t;
}

json polymer_identity_report() {
  using namespace phi4rg;
  json ids = json::array();

  auto push = [&ids](const std::string& name, long long cases, double worst, double bound) {
    ids.push_back(json{{"name", name},
                       {"cases", cases},
                       {"worst", worst},
                       {"bound", bound},
                       {"pass", worst <= bound}});
  };

  {  // Unit identity, both sides, every polymer on the d = 1 side-8 torus.
    TorusSpec t{1, 8, 1};
    PolymerSpace sp = polymer_space(t, 0);
    PolymerFunctional F = from_table(deterministic_table(256, 11, false));
    PolymerFunctional I = unit_functional();
    double worst = 0.0;
    for (std::uint32_t m = 0; m < 256; ++m) {
      Polymer X = make_polymer(sp, m);
      worst = std::max(worst, std::abs(circle_product(I, F, X) - F(m)));
      worst = std::max(worst, std::abs(circle_product(F, I, X) - F(m)));
    }
    push("unit_identity_d1_side8", 512, worst, 0.0);
  }

  {  // Commutativity through the library product, every polymer, d = 2 side 4.
    TorusSpec t{2, 4, 1};
    PolymerSpace sp = polymer_space(t, 0);
    PolymerFunctional F = from_table(deterministic_table(1u << 16, 21, false));
    PolymerFunctional G = from_table(deterministic_table(1u << 16, 22, false));
    double worst = 0.0;
    for (std::uint32_t m = 0; m < (1u << 16); ++m) {
      Polymer X = make_polymer(sp, m);
      double a = circle_product(F, G, X), b = circle_product(G, F, X);
      worst = std::max(worst, std::abs(a - b) / std::max(1.0, std::abs(a)));
    }
    push("commutativity_d2_side4", 1ll << 16, worst, 1e-12);
  }

  {  // Associativity, every polymer on a 6-block torus.
    TorusSpec t{1, 6, 1};
    PolymerSpace sp = polymer_space(t, 0);
    std::vector<double> ft = deterministic_table(64, 31, false);
    std::vector<double> gt = deterministic_table(64, 32, false);
    std::vector<double> ht = deterministic_table(64, 33, false);
    PolymerFunctional F = from_table(ft), G = from_table(gt), H = from_table(ht);
    std::vector<double> fg(64), gh(64);
    for (std::uint32_t m = 0; m < 64; ++m) {
      fg[m] = circle_product(F, G, make_polymer(sp, m));
      gh[m] = circle_product(G, H, make_polymer(sp, m));
    }
    PolymerFunctional FG = from_table(fg), GH = from_table(gh);
    double worst = 0.0;
    for (std::uint32_t m = 0; m < 64; ++m) {
      double a = circle_product(FG, H, make_polymer(sp, m));
      double b = circle_product(F, GH, make_polymer(sp, m));
      worst = std::max(worst, std::abs(a - b) / std::max(1.0, std::abs(a)));
    }
    push("associativity_d1_side6", 64, worst, 1e-12);
  }

  {  // Factorization through the library on every d = 1 side-8 pair.
    TorusSpec t{1, 8, 1};
    PolymerSpace sp = polymer_space(t, 0);
    PolymerFunctional K = multiplicative_functional(std::vector<double>(8, 2.0));
    double worst = 0.0;
    long long cases = 0;
    for (std::uint32_t x = 0; x < 256; ++x) {
      Polymer X = make_polymer(sp, x);
      for (std::uint32_t y = 0; y < 256; ++y) {
        Polymer Y = make_polymer(sp, y);
        if (touching(sp, X, Y)) continue;
        worst = std::max(worst, factorization_check(sp, K, X, Y));
        ++cases;
      }
    }
    push("factorization_d1_side8", cases, worst, 0.0);
  }

  {  // Factorization on every d = 2 side-4 pair via precomputed tables.
    TorusSpec t{2, 4, 1};
    PolymerSpace sp = polymer_space(t, 0);
    const std::uint32_t full = 1u << 16;
    std::vector<std::uint32_t> expand(full);
    std::vector<double> k(full);
    for (std::uint32_t m = 0; m < full; ++m) {
      expand[m] = sp.expand(m);
      k[m] = std::ldexp(1.0, __builtin_popcount(m));
    }
    double worst = 0.0;
    long long cases = 0;
    for (std::uint32_t x = 0; x < full; ++x) {
      std::uint32_t halo = expand[x];
      double kx = k[x];
      for (std::uint32_t y = 0; y < full; ++y) {
        if ((halo & y) != 0) continue;
        worst = std::max(worst, std::abs(k[x | y] - kx * k[y]));
        ++cases;
      }
    }
    push("factorization_d2_side4", cases, worst, 0.0);
  }

  bool all = true;
  for (const auto& e : ids) all = all && e.at("pass").get<bool>();
  return json{{"identities", ids}, {"all_pass", all}};
}

void run_polymer_check(const Options& o, Emitter& em) {
  em.config = json{{"output", o.output}};
  json rep = polymer_identity_report();
  em.stdout_payload = rep.dump(2) + "\n";
  if (!o.output.empty()) em.add_file(o.output, em.stdout_payload);
}

// ---------------------------------------------------------------- oracle

void run_mcmc(const Options& o, Emitter& em) {
  em.config = json{{"side", o.side},   {"n", o.n},       {"g", o.g},
                   {"nu", o.nu},       {"sweeps", o.sweeps}, {"seed", o.seed},
                   {"output", o.output}};
  phi4rg::TorusSpec t{4, o.side, 1};
  phi4rg::McmcEstimate est = phi4rg::mcmc_phi4(t, o.n, o.g, o.nu, o.seed, o.sweeps);
  json rec{{"mean", est.mean},       {"se", est.se},
           {"sweeps", est.sweeps},   {"seed", est.seed},
           {"acceptance", est.acceptance}, {"batches", est.batches}};
  em.stdout_payload = rec.dump(2) + "\n";
  if (!o.output.empty()) em.add_file(o.output, em.stdout_payload);
}

json oracle_suite_report() {
  using namespace phi4rg;
  json checks = json::array();
  auto push = [&checks](const std::string& name, double measured, double bound) {
    checks.push_back(json{{"name", name},
                          {"measured", measured},
                          {"bound", bound},
                          {"pass", measured <= bound}});
  };

  push("dense_vs_momentum_d4_side4", dense_green_check(TorusSpec{4, 2, 2}, 1.0), 1e-10);
  push("dense_vs_momentum_d1_side8", dense_green_check(TorusSpec{1, 8, 1}, 0.5), 1e-12);

  {
    TorusSpec t{3, 2, 2};
    double m2 = 0.3;
    Neumaier acc;
    for (double v : torus_green(t, m2)) acc.add(v);
    push("torus_zero_mode_d3_side4", std::abs(acc.value() * m2 - 1.0), 1e-12);
  }

  {
    BubbleReport rep = bubble_position_check(1.0, 10);
    push("bubble_position_m2_1", rep.difference, 1e-6 + rep.tail_bound);
    push("bubble_tail_conclusive_m2_1", rep.conclusive ? 0.0 : 1.0, 0.0);
  }

  {
    double r8 = 64.0 * green_position_d({8, 0, 0, 0}, 0.0);
    double r16 = 256.0 * green_position_d({16, 0, 0, 0}, 0.0);
    push("walk_decay_ratio_8_16", std::abs(r8 / r16 - 1.0), 0.02);
  }

  {
    McmcEstimate est = mcmc_phi4(TorusSpec{1, 2, 1}, 1, 0.1, 0.5, 18, 200000);
    push("two_site_mcmc_vs_quadrature", std::abs(est.mean - two_site_chi(0.5, 0.1)),
         3.0 * est.se);
  }

  {
    McmcEstimate est = mcmc_phi4(TorusSpec{2, 2, 2}, 2, 0.0, 1.0, 4242, 60000);
    push("free_field_mcmc_chi", std::abs(est.mean - 1.0), 3.0 * est.se);
  }

  bool all = true;
  for (const auto& e : checks) all = all && e.at("pass").get<bool>();
  return json{{"checks", checks}, {"all_pass", all}};
}

void run_oracle_suite(const Options& o, Emitter& em) {
  em.config = json{{"output", o.output}};
  json rep = oracle_suite_report();
  em.stdout_payload = rep.dump(2) + "\n";
  if (!o.output.empty()) em.add_file(o.output, em.stdout_payload);
}

// ---------------------------------------------------------------- wiring

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--config", o.config_path,
                  "`key = value` configuration file; explicit flags override its entries");
}

// Reads the --config file named on the command line, validates every key
// against the chosen subcommand, and appends the entries that no explicit
// flag already covers. Runs before CLI11 so that flag checks still apply
// to config-fed values.
std::vector<std::string> expand_config_args(const CLI::App& app, int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  if (args.empty() || args[0].empty() || args[0][0] == '-') return args;
  const CLI::App* sub = app.get_subcommand_no_throw(args[0]);
  if (sub == nullptr) return args;

  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;

  std::ifstream in(path);
  if (!in.good()) throw CLI::ValidationError("--config", "cannot open '" + path + "'");

  std::set<std::string> known;
  for (const CLI::Option* op : sub->get_options())
    for (const std::string& nm : op->get_lnames()) known.insert(nm);

  auto trim = [](const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };

  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::string t = trim(line);
    if (t.empty()) continue;
    auto eq = t.find('=');
    std::string where = path + ":" + std::to_string(lineno);
    if (eq == std::string::npos)
      throw CLI::ValidationError("--config", where + " is not a `key = value` line");
    std::string key = trim(t.substr(0, eq));
    std::string val = trim(t.substr(eq + 1));
    if (key.empty() || val.empty())
      throw CLI::ValidationError("--config", where + " is not a `key = value` line");
    if (known.count(key) == 0)
      throw CLI::ValidationError("--config", where + ": unknown key '" + key + "'");
    entries.emplace_back(std::move(key), std::move(val));
  }

  for (const auto& [key, val] : entries) {
    std::string flag = "--" + key;
    bool overridden = false;
    for (std::size_t i = 1; i < args.size(); ++i)
      if (args[i] == flag || args[i].rfind(flag + "=", 0) == 0) overridden = true;
    if (!overridden) {
      args.push_back(flag);
      args.push_back(val);
    }
  }
  return args;
}

void add_schedule_flags(CLI::App* sub, Options& o) {
  sub->add_option("--L", o.L, "Per-step scale ratio")->check(CLI::Range(1.0 + 1e-9, 64.0));
  sub->add_option("--t1", o.t1, "First proper-time cut")->check(CLI::PositiveNumber);
}

void add_grid_flags(CLI::App* sub, Options& o) {
  sub->add_option("--m2-min", o.m2_min, "Smallest m^2 of the geometric grid")
      ->check(CLI::Range(1e-300, 0.1));
  sub->add_option("--m2-max", o.m2_max, "Largest m^2 of the geometric grid")
      ->check(CLI::Range(1e-300, 0.1));
  sub->add_option("--points", o.points, "Grid size")->check(CLI::Range(4, 4096));
  sub->add_option("--extra-scales", o.extra_scales, "Flow depth past the mass scale")
      ->check(CLI::Range(8, 4096));
  sub->add_option("--workers", o.workers, "Worker threads; output independent of the count")
      ->check(CLI::Range(1, 256));
}

int run_command(int argc, char** argv) {
  Options o;
  Emitter em;

  CLI::App app{"Renormalisation-group laboratory for the 4d |phi|^4 lattice model"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  void (*runner)(const Options&, Emitter&) = nullptr;
  auto arm = [&](CLI::App* sub, void (*fn)(const Options&, Emitter&)) {
    sub->callback([&runner, fn]() { runner = fn; });
  };

  {
    CLI::App* sub = app.add_subcommand("beta", "Slice coefficients b_j as CSV");
    add_common(sub, o);
    add_schedule_flags(sub, o);
    sub->add_option("--m2", o.m2, "Mass squared")->check(CLI::NonNegativeNumber);
    sub->add_option("--jmax", o.jmax, "Number of scales; 0 selects 16")
        ->check(CLI::Range(0, 4096));
    sub->add_option("--backend", o.backend, "Evaluation route")
        ->check(CLI::IsMember({"proper-time", "brillouin"}));
    sub->add_option("--refine", o.refine, "Quadrature panels per axis interval (brillouin)")
        ->check(CLI::Range(4, 256));
    sub->add_option("--output", o.output, "CSV path (default beta.csv)");
    arm(sub, run_beta);
  }
  {
    CLI::App* sub = app.add_subcommand("bubble", "Bubble integral B(m^2) as CSV");
    add_common(sub, o);
    sub->add_option("--m2", o.m2_list, "Mass squared values")
        ->required()
        ->check(CLI::PositiveNumber);
    sub->add_option("--output", o.output, "CSV path (default bubble.csv)");
    arm(sub, run_bubble);
  }
  {
    CLI::App* sub = app.add_subcommand("flow", "Coupling trajectory as CSV");
    add_common(sub, o);
    add_schedule_flags(sub, o);
    sub->add_option("--n", o.n, "Component count")->check(CLI::NonNegativeNumber);
    sub->add_option("--m2", o.m2, "Mass squared")->check(CLI::NonNegativeNumber);
    sub->add_option("--g0", o.g0, "Initial coupling")->check(CLI::PositiveNumber);
    sub->add_option("--nu0", o.nu0, "Initial mass coupling");
    sub->add_option("--toggle-driving", o.toggle, "Tadpole driving term")
        ->check(CLI::IsMember({"on", "off"}));
    sub->add_option("--jmax", o.jmax, "Scale cap; 0 selects the mass-scale default")
        ->check(CLI::Range(0, 100000));
    sub->add_option("--mu-escape", o.mu_escape, "Escape threshold")->check(CLI::PositiveNumber);
    sub->add_option("--output", o.output, "CSV path (default flow.csv)");
    arm(sub, run_flow_cmd);
  }
  {
    CLI::App* sub = app.add_subcommand("critical", "Critical nu_0 as a JSON record");
    add_common(sub, o);
    add_schedule_flags(sub, o);
    sub->add_option("--n", o.n, "Component count")->check(CLI::NonNegativeNumber);
    sub->add_option("--m2", o.m2, "Mass squared")->check(CLI::NonNegativeNumber);
    sub->add_option("--g0", o.g0, "Initial coupling")->check(CLI::PositiveNumber);
    sub->add_option("--toggle-driving", o.toggle, "Tadpole driving term")
        ->check(CLI::IsMember({"on", "off"}));
    sub->add_option("--jmax", o.jmax, "Scale cap; 0 selects the mass-scale default")
        ->check(CLI::Range(0, 100000));
    sub->add_option("--mu-escape", o.mu_escape, "Escape threshold")->check(CLI::PositiveNumber);
    sub->add_option("--tol", o.tol, "Bracket width target")->check(CLI::Range(1e-16, 1e-2));
    sub->add_option("--output", o.output, "Optional JSON path");
    arm(sub, run_critical);
  }
  {
    CLI::App* sub = app.add_subcommand("chi-curve", "Susceptibility curve as CSV");
    add_common(sub, o);
    add_schedule_flags(sub, o);
    add_grid_flags(sub, o);
    sub->add_option("--n", o.n, "Component count")->check(CLI::NonNegativeNumber);
    sub->add_option("--g0", o.g0, "Initial coupling; 0 gives the Gaussian curve")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--z0", o.z0, "Field-strength shift")->check(CLI::Range(-0.99, 100.0));
    sub->add_option("--route-subnodes", o.subnodes, "Route (b) nodes per interval; 0 skips")
        ->check(CLI::Range(0, 64));
    sub->add_option("--output", o.output, "CSV path (default chi-curve.csv)");
    arm(sub, run_chi_curve);
  }
  {
    CLI::App* sub = app.add_subcommand("specific-heat", "Specific-heat proxy curve as CSV");
    add_common(sub, o);
    add_schedule_flags(sub, o);
    add_grid_flags(sub, o);
    sub->add_option("--n", o.n, "Component count")->check(CLI::PositiveNumber);
    sub->add_option("--g0", o.g0, "Initial coupling")->check(CLI::PositiveNumber);
    sub->add_option("--output", o.output, "CSV path (default specific-heat.csv)");
    arm(sub, run_specific_heat);
  }
  {
    CLI::App* sub = app.add_subcommand("exponents", "Logarithmic exponent table as JSON");
    add_common(sub, o);
    sub->add_option("--n", o.n, "Component count")->required()->check(CLI::NonNegativeNumber);
    sub->add_option("--output", o.output, "Optional JSON path");
    arm(sub, run_exponents);
  }
  {
    CLI::App* sub = app.add_subcommand("polymer-check", "Exhaustive polymer identity suites");
    add_common(sub, o);
    sub->add_option("--output", o.output, "Optional JSON path");
    arm(sub, run_polymer_check);
  }
  {
    CLI::App* sub = app.add_subcommand("mcmc", "Metropolis susceptibility on a d = 4 torus");
    add_common(sub, o);
    sub->add_option("--side", o.side, "Torus side")->required()->check(CLI::Range(2, 8));
    sub->add_option("--n", o.n, "Component count")->check(CLI::PositiveNumber);
    sub->add_option("--g", o.g, "Quartic coupling")->check(CLI::NonNegativeNumber);
    sub->add_option("--nu", o.nu, "Mass coupling");
    sub->add_option("--sweeps", o.sweeps, "Total sweeps")->check(CLI::Range(320ll, 100000000ll));
    sub->add_option("--seed", o.seed, "RNG seed");
    sub->add_option("--output", o.output, "Optional JSON path");
    arm(sub, run_mcmc);
  }
  {
    CLI::App* sub = app.add_subcommand("oracle-suite", "All oracle cross-checks as JSON");
    add_common(sub, o);
    sub->add_option("--output", o.output, "Optional JSON path");
    arm(sub, run_oracle_suite);
  }

  try {
    std::vector<std::string> args = expand_config_args(app, argc, argv);
    std::reverse(args.begin(), args.end());
    app.parse(std::move(args));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    em.command = app.get_subcommands().front()->get_name();
    runner(o, em);
    em.flush();
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) { return run_command(argc, argv); }
