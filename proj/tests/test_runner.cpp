#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "gmprop/error.hpp"
#include "gmprop/runner.hpp"

using namespace gmprop;

namespace {

GaussianMixture single(const Vector& m, const Matrix& p) {
  GaussianMixture gm;
  gm.mixands.push_back({1.0, m, p, "0"});
  return gm;
}

Scenario small_geo(Eigen::Index n = 1000) {
  auto s = builtin_scenario("geo");
  s.mc.N = n;
  return s;
}

std::string metric_columns(const std::vector<MetricsRow>& rows) {
  std::ostringstream os;
  write_metrics_csv(os, rows);
  std::string out;
  std::istringstream is(os.str());
  for (std::string line; std::getline(is, line);) out += line.substr(0, line.rfind(',')) + "\n";
  return out;
}

}  // namespace

TEST_CASE("method labels round-trip") {
  for (const char* text : {"none", "FOS", "USSOLC", "WUSSOLC", "DS1-WUSSOLC", "DS2-USFOS", "DS3-SOLC"}) {
    CHECK(parse_method(text).label() == text);
  }
  CHECK(parse_method("DS2-USFOS").variant == DsVariant::DS2);
  CHECK(parse_method("none").kind == MethodSpec::Kind::None);
  CHECK_THROWS_AS((void)parse_method("wussolc"), ConfigError);
  CHECK_THROWS_AS((void)parse_method("DS4-FOS"), ConfigError);
  CHECK_THROWS_AS((void)parse_method(""), ConfigError);
}

TEST_CASE("metrics CSV layout") {
  std::ostringstream os;
  write_metrics_csv(os, {{"WUSSOLC", 0.5, 0.25, 1.125, 0.31234}});
  CHECK(os.str() == std::string(kMetricsHeader) + "\nWUSSOLC,0.5,0.25,1.125,0.312\n");
}

TEST_CASE("marginal grid of a standard normal") {
  const auto gm = single(Vector::Zero(6), Matrix::Identity(6, 6));
  const auto g = marginal_grid(gm, 0, 3, 201, 6.0);
  REQUIRE(g.xs.size() == 201);
  CHECK(g.xs(100) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(g.density.maxCoeff() == doctest::Approx(1.0 / (2.0 * std::numbers::pi)).epsilon(1e-14));
  CHECK(g.density(100, 100) == g.density.maxCoeff());
  const double cell = (g.xs(1) - g.xs(0)) * (g.ys(1) - g.ys(0));
  CHECK(std::abs(g.density.sum() * cell - 1.0) < 0.01);

  Matrix p = Matrix::Identity(6, 6);
  p(0, 0) = 4.0;
  const auto h = marginal_grid(single(Vector::Zero(6), p), 0, 1, 101, 5.0);
  CHECK(h.density.maxCoeff() == doctest::Approx(1.0 / (2.0 * std::numbers::pi * 2.0)).epsilon(1e-14));

  CHECK_THROWS_AS((void)marginal_grid(gm, 0, 0, 11, 4.0), ConfigError);
  CHECK_THROWS_AS((void)marginal_grid(gm, 0, 6, 11, 4.0), ConfigError);
  CHECK_THROWS_AS((void)marginal_grid(gm, -1, 2, 11, 4.0), ConfigError);
}

TEST_CASE("marginal grid integrates a two-component mixture") {
  GaussianMixture gm;
  Vector a = Vector::Zero(6), b = Vector::Zero(6);
  b(0) = 2.0;
  b(1) = -1.0;
  gm.mixands.push_back({0.4, a, Matrix::Identity(6, 6), "0.0"});
  gm.mixands.push_back({0.6, b, 0.5 * Matrix::Identity(6, 6), "0.1"});
  const auto g = marginal_grid(gm, 0, 1, 161, 5.0);
  const double cell = (g.xs(1) - g.xs(0)) * (g.ys(1) - g.ys(0));
  CHECK(std::abs(g.density.sum() * cell - 1.0) < 0.01);
}

TEST_CASE("GEO FOS depth-4 marginal matches the golden grid") {
  const auto s = small_geo();
  const auto run = run_method(s, parse_method("FOS"), RunOptions{});
  REQUIRE(run.result.mixture.mixands.size() == 27);
  const auto g = marginal_grid(run.result.mixture, 0, 1, 41, 4.0);

  std::ifstream is(std::string(GMPROP_TEST_DIR) + "/golden/geo_fos_marginal.csv");
  REQUIRE(is);
  std::string line;
  std::getline(is, line);
  CHECK(line == "x,y,density");
  const double peak = g.density.maxCoeff();
  int rows = 0;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < 41; ++i) {
    for (Eigen::Index k = 0; k < 41; ++k) {
      REQUIRE(std::getline(is, line));
      double x, y, d;
      char c1, c2;
      std::istringstream ls(line);
      ls >> x >> c1 >> y >> c2 >> d;
      CHECK(x == doctest::Approx(g.xs(i)).epsilon(1e-12));
      CHECK(y == doctest::Approx(g.ys(k)).epsilon(1e-12));
      worst = std::max(worst, std::abs(d - g.density(i, k)) / peak);
      ++rows;
    }
  }
  CHECK(rows == 41 * 41);
  CHECK(worst < 1e-8);
  // single ridge: peak strictly inside the window
  Eigen::Index pi, pk;
  g.density.maxCoeff(&pi, &pk);
  CHECK(pi > 0);
  CHECK(pi < 40);
  CHECK(pk > 0);
  CHECK(pk < 40);
}

TEST_CASE("method runs on GEO") {
  const auto s = small_geo();
  RunOptions opts;
  const auto none = run_method(s, parse_method("none"), opts);
  CHECK(none.result.mixture.mixands.size() == 1);
  CHECK(none.result.events.empty());

  const auto imm = run_method(s, parse_method("USSOLC"), opts);
  CHECK(imm.result.mixture.mixands.size() == 27);
  double wsum = 0.0;
  for (const auto& c : imm.result.mixture.mixands) wsum += c.w;
  CHECK(wsum == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(imm.result.events.size() == 13);

  const auto def = run_method(s, parse_method("DS2-WUSSOLC"), opts);
  CHECK(def.result.mixture.mixands.size() >= 1);
  CHECK(def.result.mixture.mixands.size() <= 27);
  for (const auto& e : def.result.events) CHECK(e.variant == DsVariant::DS2);
}

TEST_CASE("compare shares truth and is deterministic") {
  const auto s = small_geo();
  const auto truth = scenario_truth(s);
  RunOptions opts;
  const std::vector<MethodSpec> methods{parse_method("none"), parse_method("WUSSOLC"), parse_method("WUSSOLC"),
                                        parse_method("DS1-WUSSOLC")};
  const auto a = compare(s, methods, opts, truth);
  REQUIRE(a.rows.size() == 5);
  CHECK(a.rows[0].method == "none");
  CHECK(a.rows[3].method == "DS1-WUSSOLC");
  CHECK(a.rows[4].method == "original");
  CHECK(a.rows[0].relative_time == 1.0);
  CHECK(a.rows[1].relative_time == 1.0);
  CHECK(a.rows[3].relative_time > 0.0);
  CHECK(a.rows[1].madem == a.rows[2].madem);
  CHECK(a.rows[1].cvm == a.rows[2].cvm);
  CHECK(a.rows[1].mcr == a.rows[2].mcr);

  const auto b = compare(s, methods, opts, scenario_truth(s));
  CHECK(metric_columns(a.rows) == metric_columns(b.rows));

  const auto orig = original_row(s, opts.madem_norm);
  CHECK(orig.madem == a.rows[4].madem);
  CHECK(orig.cvm == a.rows[4].cvm);
}

TEST_CASE("mixture JSON round-trip is exact") {
  const auto run = run_method(small_geo(), parse_method("WUSSOLC"), RunOptions{});
  const auto& gm = run.result.mixture;
  const auto back = mixture_from_json(nlohmann::json::parse(mixture_to_json(gm).dump()));
  REQUIRE(back.mixands.size() == gm.mixands.size());
  for (std::size_t i = 0; i < gm.mixands.size(); ++i) {
    CHECK(back.mixands[i].w == gm.mixands[i].w);
    CHECK(back.mixands[i].m == gm.mixands[i].m);
    CHECK(back.mixands[i].P == gm.mixands[i].P);
    CHECK(back.mixands[i].lineage == gm.mixands[i].lineage);
  }
  auto bad = mixture_to_json(gm);
  bad[0]["w"] = 5.0;
  CHECK_THROWS_AS((void)mixture_from_json(bad), ConfigError);
}

TEST_CASE("run artifact provenance") {
  const auto s = small_geo();
  RunOptions opts;
  const auto run = run_method(s, parse_method("DS3-WUSSOLC"), opts);
  const auto j = run_artifact(s, run, opts, nullptr);
  const auto& p = j.at("provenance");
  CHECK(p.at("seed").get<std::uint64_t>() == s.mc.seed);
  CHECK(p.at("mc_samples").get<long>() == 1000);
  CHECK(p.at("library").get<std::string>() == library_key(3, 1e-4));
  CHECK(p.at("config_hash").get<std::string>().size() == 16);
  CHECK(p.at("integrator").contains("rel_tol"));
  CHECK(j.at("events").size() == run.result.events.size());
  CHECK(j.at("method").get<std::string>() == "DS3-WUSSOLC");

  const auto again = run_artifact(s, run_method(s, parse_method("DS3-WUSSOLC"), opts), opts, nullptr);
  CHECK(again.at("provenance").at("config_hash") == p.at("config_hash"));
  RunOptions other = opts;
  other.epsilon = 0.5;
  const auto changed = run_artifact(s, run_method(s, parse_method("DS3-WUSSOLC"), other), other, nullptr);
  CHECK(changed.at("provenance").at("config_hash") != p.at("config_hash"));

  CHECK(library_key(3, 1e-4) == "L3_lambda1e-4");
  CHECK(library_key(5, 0.0025) == "L5_lambda2.5e-3");
  CHECK(library_key(1, 10.0) == "L1_lambda1e1");
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("criterion trace extraction") {
  const auto s = small_geo();
  RunOptions opts;
  opts.record_trace = true;

  SUBCASE("no split gives one depth-1 series") {
    opts.epsilon = 1e9;
    const auto run = run_method(s, parse_method("DS3-WUSSOLC"), opts);
    const auto rows = central_chain_trace(run_artifact(s, run, opts, nullptr), opts.L_s);
    CHECK(rows.size() == static_cast<std::size_t>(opts.checkpoints + 1));
    for (const auto& r : rows) CHECK(r.depth == 1);
  }
  SUBCASE("central chain follows the split epochs") {
    const auto run = run_method(s, parse_method("DS3-WUSSOLC"), opts);
    const auto rows = central_chain_trace(run_artifact(s, run, opts, nullptr), opts.L_s);
    REQUIRE(!rows.empty());
    for (std::size_t i = 1; i < rows.size(); ++i) {
      CHECK(rows[i].depth >= rows[i - 1].depth);
      if (rows[i].depth == rows[i - 1].depth) CHECK(rows[i].t > rows[i - 1].t);
    }
    for (const auto& r : rows) {
      const std::string expect = r.depth == 1 ? "0" : r.lineage.substr(0, r.lineage.size() - 2) + ".1";
      CHECK(r.lineage == expect);
    }
  }
  SUBCASE("missing trace is a config error") {
    opts.record_trace = false;
    const auto run = run_method(s, parse_method("DS3-WUSSOLC"), opts);
    CHECK_THROWS_AS((void)central_chain_trace(run_artifact(s, run, opts, nullptr), opts.L_s), ConfigError);
  }
}

TEST_CASE("atomic file writes") {
  const auto dir = std::filesystem::temp_directory_path() / "gmprop_runner_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "out.txt";
  write_file_atomic(path, "abc\n");
  std::ifstream is(path);
  std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  CHECK(text == "abc\n");
  CHECK(!std::filesystem::exists(dir / "out.txt.tmp"));
  std::filesystem::remove_all(dir);
}
