#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "tvpbart/io.hpp"
#include "tvpbart/simulate.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace tvpbart;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("tvpbart_test_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string expect_ingest_error(const PanelSpec& spec) {
  try {
    load_panel(spec);
  } catch (const IngestError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("year-on-year transforms") {
  VectorXd x(6);
  x << 100, 100, 100, 100, 110, 121;
  const VectorXd yoy = apply_transform(x, Transform::Yoy, 4);
  for (int i = 0; i < 4; ++i) CHECK(std::isnan(yoy(i)));
  CHECK(yoy(4) == doctest::Approx(100.0 * std::log(1.1)).epsilon(1e-12));
  CHECK(yoy(4) == doctest::Approx(9.531).epsilon(1e-4));
  const VectorXd arith = apply_transform(x, Transform::YoyArith, 4);
  CHECK(arith(4) == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(arith(5) == doctest::Approx(21.0).epsilon(1e-12));
  const VectorXd flat = apply_transform(VectorXd::Constant(20, 3.0), Transform::Yoy, 12);
  for (int i = 12; i < 20; ++i) CHECK(flat(i) == 0.0);
  const VectorXd d = apply_transform(x, Transform::Diff, 4);
  CHECK(std::isnan(d(0)));
  CHECK(d(5) == 11.0);
  CHECK(apply_transform(x, Transform::Log, 4)(0) == doctest::Approx(std::log(100.0)));
  CHECK(parse_transform("yoy") == Transform::Yoy);
  CHECK(parse_transform("yoy_arith") == Transform::YoyArith);
  CHECK(transform_name(Transform::Diff) == "diff");
  CHECK_THROWS(parse_transform("growth"));
}

TEST_CASE("date spacing") {
  CHECK(infer_step_months({"2000-01-01", "2000-04-01", "2000-07-01"}) == 3);
  CHECK(infer_step_months({"2000-11", "2000-12", "2001-01"}) == 1);
  CHECK_THROWS_AS(infer_step_months({"2000-01-01", "2000-04-01", "2000-10-01"}), IngestError);
}

TEST_CASE("panel ingestion aligns files, transforms and reports problems") {
  const fs::path dir = scratch("panel");
  write_text(dir / "y.csv",
             "date,gdp,unemp\n"
             "2000-01-01,100,5\n2000-04-01,101,5.1\n2000-07-01,102,5.2\n2000-10-01,103,5.0\n"
             "2001-01-01,110,4.9\n2001-04-01,112,4.8\n2001-07-01,113,4.7\n");
  write_text(dir / "z.csv",
             "date,recession,\"noise\"\n"
             "2000-04-01,0,0.1\n2000-07-01,0,0.2\n2000-10-01,1,0.3\n2001-01-01,1,0.4\n2001-04-01,0,0.5\n"
             "2001-07-01,0,0.6\n2001-10-01,0,0.7\n");
  PanelSpec spec;
  spec.endogenous_path = (dir / "y.csv").string();
  spec.modifier_path = (dir / "z.csv").string();
  spec.transforms["gdp"] = Transform::Yoy;
  const Dataset d = load_panel(spec);
  REQUIRE(d.n_obs() == 3);  // 2001Q1..Q3 once yoy drops the first year
  CHECK(d.dates.front() == "2001-01-01");
  CHECK(d.Y(0, 0) == doctest::Approx(100.0 * std::log(1.1)));
  CHECK(d.Y(2, 1) == 4.7);
  CHECK(d.Z(1, 1) == 0.5);
  CHECK(d.modifier_names == std::vector<std::string>{"recession", "noise"});

  spec.variables = {"unemp"};
  spec.modifiers = {"noise"};
  const Dataset sub = load_panel(spec);
  CHECK(sub.n_vars() == 1);
  CHECK(sub.n_modifiers() == 1);

  SUBCASE("missing value") {
    write_text(dir / "y2.csv", "date,gdp\n2000-01-01,1\n2000-04-01,2\n2000-07-01,NA\n2000-10-01,4\n");
    PanelSpec s2;
    s2.endogenous_path = (dir / "y2.csv").string();
    s2.modifier_path = (dir / "z.csv").string();
    const std::string msg = expect_ingest_error(s2);
    CAPTURE(msg);
    CHECK(msg.find("missing value in 'gdp' at 2000-07-01") != std::string::npos);
  }
  SUBCASE("gap in dates") {
    write_text(dir / "y3.csv", "date,gdp\n2000-01-01,1\n2000-04-01,2\n2000-10-01,3\n");
    PanelSpec s3;
    s3.endogenous_path = (dir / "y3.csv").string();
    s3.modifier_path = (dir / "z.csv").string();
    CHECK(expect_ingest_error(s3).find("date misalignment") != std::string::npos);
  }
  SUBCASE("unknown transform column") {
    PanelSpec s4 = spec;
    s4.transforms["cpi"] = Transform::Yoy;
    CHECK_FALSE(expect_ingest_error(s4).empty());
  }
}

TEST_CASE("datasets survive a write and read round trip") {
  const fs::path dir = scratch("roundtrip");
  DgpSpec spec;
  spec.n_obs = 50;
  const Dataset d = simulate_dgp(spec, 3).data;
  write_dataset(d, (dir / "y.csv").string(), (dir / "z.csv").string());
  PanelSpec p;
  p.endogenous_path = (dir / "y.csv").string();
  p.modifier_path = (dir / "z.csv").string();
  const Dataset back = load_panel(p);
  CHECK((back.Y - d.Y).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((back.Z - d.Z).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(back.dates == d.dates);
  CHECK(back.variable_names == d.variable_names);
}

TEST_CASE("git blob hashes") {
  CHECK(git_blob_sha1("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  CHECK(git_blob_sha1("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
  const fs::path dir = scratch("sha");
  write_text(dir / "h.txt", "hello\n");
  CHECK(file_sha1((dir / "h.txt").string()) == "ce013625030ba8dba906f756967f9e9ca394464a");
}

TEST_CASE("array files") {
  const fs::path dir = scratch("array");
  const std::vector<double> v{1.5, -2.0, 1e-300, 3.0, std::nan(""), 6.0};
  write_array((dir / "a.bin").string(), {2, 3}, v);
  const ArrayData a = read_array((dir / "a.bin").string());
  CHECK(a.dims == std::vector<std::int64_t>{2, 3});
  REQUIRE(a.data.size() == 6);
  CHECK(a.data[2] == 1e-300);
  CHECK(std::isnan(a.data[4]));
  CHECK(read_text(dir / "a.bin").substr(0, 8) == "TVPBARR1");
  write_text(dir / "bad.bin", "NOTANARRAYFILE..........");
  CHECK_THROWS(read_array((dir / "bad.bin").string()));
  CHECK_THROWS(write_array((dir / "c.bin").string(), {4}, v));
}

TEST_CASE("configuration JSON") {
  ModelConfig c;
  c.lags = 2;
  c.seed = 99;
  c.alpha = 0.9;
  const ModelConfig back = config_from_json(config_to_json(c));
  CHECK(back.lags == 2);
  CHECK(back.seed == 99);
  CHECK(back.alpha == 0.9);
  CHECK(config_to_json(back) == config_to_json(c));

  auto field_of = [](const nlohmann::json& j) {
    try {
      config_from_json(j);
    } catch (const ConfigError& e) {
      return e.field();
    }
    return std::string();
  };
  CHECK(field_of(nlohmann::json{{"P", 2}, {"depth", 3}}) == "depth");
  CHECK(field_of(nlohmann::json{{"alpha", "high"}}) == "alpha");
  CHECK(field_of(nlohmann::json{{"zeta", 0.5}}) == "zeta");
  CHECK(config_from_json(nlohmann::json{{"Q_beta", 4}}).n_tvp_factors == 4);
}

TEST_CASE("draw stores reload exactly and reruns are byte-identical") {
  ModelConfig cfg;
  cfg.lags = 1;
  cfg.n_tvp_factors = 2;
  cfg.n_vol_factors = 1;
  cfg.trees_per_vol_factor = 5;
  cfg.n_draws = 30;
  cfg.n_burn = 20;
  cfg.thin = 2;
  DgpSpec spec;
  spec.n_vars = 2;
  spec.n_obs = 40;
  const Dataset d = simulate_dgp(spec, 4).data;
  RunInfo info;
  info.variable_names = d.variable_names;
  info.modifier_names = d.modifier_names;
  info.dates = std::vector<std::string>(d.dates.begin() + 1, d.dates.end());

  const fs::path dir = scratch("store");
  const PosteriorDraws post = run_mcmc(cfg, d);
  save_draws(post, info, (dir / "a").string());
  save_draws(run_mcmc(cfg, d), info, (dir / "b").string());

  const StoredRun back = load_draws((dir / "a").string());
  REQUIRE(back.post.draws.size() == post.draws.size());
  CHECK(back.post.config.seed == cfg.seed);
  CHECK(back.info.dates == info.dates);
  CHECK((back.post.design.Y - post.design.Y).norm() == 0.0);
  for (std::size_t i = 0; i < post.draws.size(); ++i) {
    const DrawRecord& x = post.draws[i];
    const DrawRecord& y = back.post.draws[i];
    CHECK(x.sweep == y.sweep);
    CHECK(x.A == y.A);
    CHECK(x.Gamma == y.Gamma);
    CHECK(x.R == y.R);
    CHECK(x.Sigma == y.Sigma);
    CHECK(x.loglik == y.loglik);
    CHECK(x.beta[0] == y.beta[0]);
    CHECK(x.loadings[1] == y.loadings[1]);
    CHECK(x.process_var[0] == y.process_var[0]);
    CHECK(x.tvp_trees[1][0].trees[0].structure_key() == y.tvp_trees[1][0].trees[0].structure_key());
  }
  CHECK((back.post.loglik() - post.loglik()).norm() == 0.0);

  for (const auto& entry : fs::directory_iterator(dir / "a")) {
    const std::string name = entry.path().filename().string();
    if (name == "manifest.json") continue;  // carries wall-clock times
    CAPTURE(name);
    CHECK(read_text(entry.path()) == read_text(dir / "b" / name));
  }
  CHECK_THROWS(load_draws((dir / "missing").string()));
}
