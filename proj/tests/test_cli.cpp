#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

// End-to-end drives of the installed binary; the path arrives through the
// PHI4RG_CLI_PATH environment variable set by the build.

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

struct RunResult {
  int code = -1;
  std::string out;
};

std::string cli_path() {
  const char* p = std::getenv("PHI4RG_CLI_PATH");
  REQUIRE(p != nullptr);
  return p;
}

RunResult run_cli(const std::string& args, const fs::path& dir) {
  std::string cmd = "cd '" + dir.string() + "' && '" + cli_path() + "' " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  RunResult r;
  char buf[4096];
  std::size_t got;
  while ((got = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, got);
  int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path fresh_dir(const std::string& tag) {
  fs::path dir = fs::temp_directory_path() / ("phi4rg_cli_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    std::vector<std::string> fields;
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) fields.push_back(cell);
    rows.push_back(fields);
  }
  return rows;
}

double field(const std::vector<std::vector<std::string>>& rows, std::size_t r, std::size_t c) {
  REQUIRE(r < rows.size());
  REQUIRE(c < rows[r].size());
  return std::strtod(rows[r][c].c_str(), nullptr);
}

}  // namespace

TEST_CASE("help and usage errors", "[cli]") {
  fs::path dir = fresh_dir("usage");
  CHECK(run_cli("--help", dir).code == 0);
  CHECK(run_cli("no-such-command", dir).code == 2);
  CHECK(run_cli("", dir).code == 2);          // a subcommand is required
  CHECK(run_cli("exponents", dir).code == 2); // --n is required
  CHECK(run_cli("beta --jmax -3", dir).code == 2);
  CHECK(run_cli("bubble --m2 0", dir).code == 2);
  CHECK(run_cli("chi-curve --m2-min 1e-2 --m2-max 1e-6", dir).code == 2);
}

TEST_CASE("exponents prints the theory table", "[cli]") {
  fs::path dir = fresh_dir("exponents");
  RunResult r = run_cli("exponents --n 1", dir);
  REQUIRE(r.code == 0);
  json rec = json::parse(r.out);
  CHECK(rec.at("n") == 1);
  CHECK_THAT(rec.at("gamma_log").get<double>(), WithinRel(1.0 / 3.0, 1e-15));
  CHECK_THAT(rec.at("xi_log").get<double>(), WithinRel(1.0 / 6.0, 1e-15));
  CHECK_THAT(rec.at("cH_exponent").get<double>(), WithinRel(1.0 / 3.0, 1e-15));
  CHECK(rec.at("cH_loglog") == false);
  CHECK(rec.at("cH_bounded") == false);

  RunResult r4 = run_cli("exponents --n 4", dir);
  REQUIRE(r4.code == 0);
  CHECK(json::parse(r4.out).at("cH_loglog") == true);
}

TEST_CASE("beta emits the coefficient table with metadata sidecar", "[cli]") {
  fs::path dir = fresh_dir("beta");
  REQUIRE(run_cli("beta", dir).code == 0);

  auto rows = parse_csv(slurp(dir / "beta.csv"));
  REQUIRE(rows.size() == 17);
  CHECK(rows[0] == std::vector<std::string>{"j", "b_j"});
  // Frozen: b_10 at m2 = 0 for the default schedule (mpmath, 50 digits).
  CHECK_THAT(field(rows, 11, 1), WithinRel(0.0044080864473829682, 1e-13));

  json meta = json::parse(slurp(dir / "beta.csv.meta.json"));
  CHECK(meta.at("version") == "1.0.0");
  CHECK(meta.at("command") == "beta");
  CHECK(meta.at("config").at("jmax") == 16);
  CHECK(meta.at("config").at("L") == 2.0);
  CHECK(meta.at("config").at("t1") == 0.0625);
  CHECK(meta.at("config").at("backend") == "proper-time");
  CHECK(meta.at("wall_time_seconds").get<double>() >= 0.0);

  SECTION("brillouin backend agrees through the same interface") {
    REQUIRE(run_cli("beta --backend brillouin --jmax 11 --output bz.csv", dir).code == 0);
    auto bz = parse_csv(slurp(dir / "bz.csv"));
    CHECK_THAT(field(bz, 11, 1), WithinRel(field(rows, 11, 1), 1e-6));
  }
}

TEST_CASE("bubble reproduces frozen values through the CSV round trip", "[cli]") {
  fs::path dir = fresh_dir("bubble");
  REQUIRE(run_cli("bubble --m2 1 --m2 0.01 --m2 1e-4", dir).code == 0);
  auto rows = parse_csv(slurp(dir / "bubble.csv"));
  REQUIRE(rows.size() == 4);
  CHECK(rows[0] == std::vector<std::string>{"m2", "B"});
  CHECK_THAT(field(rows, 1, 1), WithinRel(0.01989548520716831009, 1e-12));
  CHECK_THAT(field(rows, 2, 1), WithinRel(0.05305546322422932850, 1e-12));
  CHECK_THAT(field(rows, 3, 1), WithinRel(0.08233640876169992692, 1e-12));
}

TEST_CASE("flow trajectory CSV is consistent and deterministic", "[cli]") {
  fs::path dir = fresh_dir("flow");
  std::string args = "flow --n 1 --m2 1e-4 --g0 0.05 --nu0 0 --jmax 40";
  REQUIRE(run_cli(args, dir).code == 0);
  auto rows = parse_csv(slurp(dir / "flow.csv"));
  CHECK(rows[0] == std::vector<std::string>{"j", "g", "mu", "nu", "nuprime"});
  REQUIRE(rows.size() >= 3);

  for (std::size_t r = 1; r < rows.size(); ++r) {
    double j = field(rows, r, 0), g = field(rows, r, 1), mu = field(rows, r, 2);
    double nu = field(rows, r, 3), nup = field(rows, r, 4);
    CHECK(j == static_cast<double>(r - 1));
    CHECK(g > 0.0);
    CHECK(g <= 0.05);
    CHECK_THAT(nu, WithinRel(mu * std::pow(2.0, -2.0 * (r - 1)), 1e-12));
    CHECK(nup > 0.0);
    CHECK(nup <= 1.0);
  }

  std::string first = slurp(dir / "flow.csv");
  fs::remove(dir / "flow.csv");
  REQUIRE(run_cli(args, dir).code == 0);
  CHECK(slurp(dir / "flow.csv") == first);
}

TEST_CASE("critical point record honours the driving toggle", "[cli]") {
  fs::path dir = fresh_dir("critical");
  RunResult off = run_cli(
      "critical --n 1 --L 2 --m2 1e-4 --g0 0.05 --toggle-driving off --tol 1e-12", dir);
  REQUIRE(off.code == 0);
  json joff = json::parse(off.out);
  CHECK_THAT(joff.at("nu0c").get<double>(), WithinAbs(0.0, 1e-12));
  CHECK(joff.at("bracket").get<double>() <= 1e-12);
  CHECK(joff.at("escape_scale_monotone") == true);

  RunResult on = run_cli("critical --n 1 --m2 1e-4 --g0 0.05 --tol 1e-12", dir);
  REQUIRE(on.code == 0);
  json jon = json::parse(on.out);
  CHECK(jon.at("nu0c").get<double>() < 0.0);
  CHECK(jon.at("iterations").get<int>() > 20);
}

TEST_CASE("chi-curve CSV has the documented schema", "[cli]") {
  fs::path dir = fresh_dir("chicurve");
  std::string args =
      "chi-curve --n 2 --g0 0.05 --m2-min 1e-6 --m2-max 1e-2 --points 5 --route-subnodes 2";
  REQUIRE(run_cli(args, dir).code == 0);
  auto rows = parse_csv(slurp(dir / "chi-curve.csv"));
  REQUIRE(rows.size() == 6);
  CHECK(rows[0] ==
        std::vector<std::string>{"m2", "nu0c", "nu", "eps", "chi", "dchidnu", "Aeff", "gammaeff"});
  CHECK(rows[1][7] == "nan");
  for (std::size_t r = 1; r < rows.size(); ++r) {
    double m2 = field(rows, r, 0), eps = field(rows, r, 3), chi = field(rows, r, 4);
    CHECK_THAT(chi, WithinRel(1.0 / m2, 1e-12));  // z0 = 0
    CHECK(eps > 0.0);
    CHECK(field(rows, r, 5) < 0.0);  // susceptibility falls as nu rises
    CHECK(field(rows, r, 6) > 0.0);
    if (r > 1) CHECK(field(rows, r, 7) > 0.0);
  }

  SECTION("worker count does not change a byte") {
    std::string serial = slurp(dir / "chi-curve.csv");
    REQUIRE(run_cli(args + " --workers 3 --output w3.csv", dir).code == 0);
    CHECK(slurp(dir / "w3.csv") == serial);
  }
}

TEST_CASE("specific-heat CSV grows toward criticality", "[cli]") {
  fs::path dir = fresh_dir("heat");
  REQUIRE(run_cli("specific-heat --n 2 --g0 0.05 --m2-min 1e-12 --m2-max 1e-4 --points 5", dir)
              .code == 0);
  auto rows = parse_csv(slurp(dir / "specific-heat.csv"));
  REQUIRE(rows.size() == 6);
  CHECK(rows[0] == std::vector<std::string>{"m2", "eps", "cH", "exponent_eff"});
  CHECK(rows[1][3] == "nan");
  CHECK(field(rows, 1, 2) > field(rows, 5, 2));  // cH rises as m2 falls
  for (std::size_t r = 1; r < rows.size(); ++r) CHECK(field(rows, r, 2) > 0.0);
}

TEST_CASE("config file feeds values and flags override them", "[cli]") {
  fs::path dir = fresh_dir("config");
  {
    std::ofstream cfg(dir / "run.cfg");
    cfg << "# trajectory settings\n"
        << "m2 = 1e-4\n"
        << "g0 = 0.03\n"
        << "jmax = 20\n";
  }
  REQUIRE(run_cli("flow --config run.cfg", dir).code == 0);
  auto rows = parse_csv(slurp(dir / "flow.csv"));
  CHECK_THAT(field(rows, 1, 1), WithinRel(0.03, 1e-15));

  REQUIRE(run_cli("flow --config run.cfg --g0 0.05 --output override.csv", dir).code == 0);
  auto over = parse_csv(slurp(dir / "override.csv"));
  CHECK_THAT(field(over, 1, 1), WithinRel(0.05, 1e-15));

  {
    std::ofstream cfg(dir / "bad.cfg");
    cfg << "m2 = 1e-4\nnot_a_key = 1\n";
  }
  CHECK(run_cli("flow --config bad.cfg", dir).code == 2);
}

TEST_CASE("computation failures exit 1 and leave no partial artifacts", "[cli]") {
  fs::path dir = fresh_dir("failure");
  // g0 beyond the admissible ceiling passes flag validation but the flow
  // rejects it, which must surface as a computation error.
  RunResult r = run_cli("flow --g0 0.2 --m2 1e-4 --output part.csv", dir);
  CHECK(r.code == 1);
  CHECK_FALSE(fs::exists(dir / "part.csv"));
  CHECK_FALSE(fs::exists(dir / "part.csv.meta.json"));
}

TEST_CASE("mcmc subcommand reports a reproducible estimate", "[cli]") {
  fs::path dir = fresh_dir("mcmc");
  std::string args = "mcmc --side 2 --n 1 --g 0 --nu 0.5 --sweeps 4000 --seed 7";
  RunResult a = run_cli(args, dir);
  REQUIRE(a.code == 0);
  json rec = json::parse(a.out);
  CHECK_THAT(rec.at("mean").get<double>(), WithinAbs(2.0, 3.0 * rec.at("se").get<double>()));
  CHECK(rec.at("se").get<double>() > 0.0);
  CHECK(rec.at("acceptance").get<double>() > 0.0);
  CHECK(rec.at("acceptance").get<double>() < 1.0);
  CHECK(rec.at("sweeps") == 4000);
  CHECK(rec.at("seed") == 7);

  RunResult b = run_cli(args, dir);
  CHECK(b.out == a.out);
}

TEST_CASE("oracle-suite passes every cross-check", "[cli]") {
  fs::path dir = fresh_dir("oracle");
  RunResult r = run_cli("oracle-suite --output report.json", dir);
  REQUIRE(r.code == 0);
  json rep = json::parse(r.out);
  CHECK(rep.at("all_pass") == true);
  CHECK(rep.at("checks").size() >= 7);
  for (const auto& c : rep.at("checks")) {
    INFO(c.at("name").get<std::string>());
    CHECK(c.at("pass") == true);
  }
  CHECK(json::parse(slurp(dir / "report.json")) == rep);
  CHECK(fs::exists(dir / "report.json.meta.json"));
}

TEST_CASE("polymer-check passes every identity", "[cli]") {
  fs::path dir = fresh_dir("polymer");
  RunResult r = run_cli("polymer-check", dir);
  REQUIRE(r.code == 0);
  json rep = json::parse(r.out);
  CHECK(rep.at("all_pass") == true);
  REQUIRE(rep.at("identities").size() == 5);
  for (const auto& e : rep.at("identities")) {
    INFO(e.at("name").get<std::string>());
    CHECK(e.at("pass") == true);
    // Exactly 136063 of the 2^32 ordered pairs on the 4x4 torus are
    // non-touching (independent enumeration); a different count means the
    // neighbourhood expansion drifted.
    if (e.at("name") == "factorization_d2_side4") CHECK(e.at("cases") == 136063);
    if (e.at("name") == "commutativity_d2_side4") CHECK(e.at("cases") == 65536);
  }
}
