// tvpbart command-line driver. Exit status: 0 ok, 1 usage or input error,
// 2 internal failure.
#include "tvpbart/io.hpp"
#include "tvpbart/sampler.hpp"
#include "tvpbart/simulate.hpp"
#include "tvpbart/structural.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

using namespace tvpbart;
namespace fs = std::filesystem;

namespace {

class UsageError : public Error {
 public:
  using Error::Error;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

int resolve_index(const std::string& key, const std::vector<std::string>& names, const char* what) {
  const auto it = std::find(names.begin(), names.end(), key);
  if (it != names.end()) return static_cast<int>(it - names.begin());
  try {
    std::size_t used = 0;
    const int i = std::stoi(key, &used);
    if (used == key.size() && i >= 0 && i < static_cast<int>(names.size())) return i;
  } catch (const std::exception&) {
  }
  throw UsageError(std::string("unknown ") + what + " '" + key + "'");
}

/// Row index for a date string or a 0-based integer.
Eigen::Index resolve_time(const std::string& key, const std::vector<std::string>& dates) {
  return resolve_index(key, dates, "time");
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write " + path);
  return out;
}

std::map<std::string, Transform> parse_transforms(const std::vector<std::string>& items) {
  std::map<std::string, Transform> out;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--transform expects NAME=KIND, got '" + item + "'");
    out[item.substr(0, eq)] = parse_transform(item.substr(eq + 1));
  }
  return out;
}

struct FlagOptions {
  std::string modifier = "recession";
  std::string output_var;
  std::string unemp_var;
};

void add_flag_options(CLI::App* cmd, FlagOptions& f) {
  cmd->add_option("--flag-modifier", f.modifier, "modifier column marking flagged (recession) periods, > 0.5 = flagged")
      ->capture_default_str();
  cmd->add_option("--output-var", f.output_var, "output variable (name or index; default: first)");
  cmd->add_option("--unemp-var", f.unemp_var, "unemployment variable (name or index; default: second)");
}

struct Identification {
  std::vector<ShockId> shocks;
  int output_var = 0;
  int unemp_var = 1;
};

Identification identify(const StoredRun& run, const FlagOptions& f) {
  const auto& names = run.info.variable_names;
  if (names.size() < 2) throw UsageError("shock identification needs at least two variables");
  Identification id;
  id.output_var = f.output_var.empty() ? 0 : resolve_index(f.output_var, names, "variable");
  id.unemp_var = f.unemp_var.empty() ? 1 : resolve_index(f.unemp_var, names, "variable");
  const int col = resolve_index(f.modifier, run.info.modifier_names, "modifier");
  const MatrixXd& Z = run.post.design.Z;
  std::vector<bool> flags(static_cast<std::size_t>(Z.rows()));
  for (Eigen::Index t = 0; t < Z.rows(); ++t) flags[static_cast<std::size_t>(t)] = Z(t, col) > 0.5;
  if (std::none_of(flags.begin(), flags.end(), [](bool b) { return b; }))
    throw UsageError("no period is flagged by modifier '" + f.modifier + "'");
  id.shocks = identify_all(run.post, flags, id.output_var, id.unemp_var);
  return id;
}

void write_summary_rows(std::ostream& out, const std::string& label, const IrfResult& r, int ti,
                        const std::vector<std::string>& names) {
  std::vector<double> v(static_cast<std::size_t>(r.n_draws));
  for (int h = 0; h < r.horizons; ++h)
    for (int m = 0; m < r.n_vars; ++m) {
      for (int d = 0; d < r.n_draws; ++d) v[static_cast<std::size_t>(d)] = r.at(d, ti, h, m);
      out << label << ',' << h << ',' << names[static_cast<std::size_t>(m)] << ',' << fmt(quantile(v, 0.16)) << ','
          << fmt(quantile(v, 0.5)) << ',' << fmt(quantile(v, 0.84)) << '\n';
    }
}

// ---------------------------------------------------------------- estimate

struct EstimateArgs {
  std::string config;
  std::string data;
  std::string modifiers;
  std::vector<std::string> transforms;
  std::string variables;
  std::string modifier_columns;
  std::string out;
  std::string manifest;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  bool quiet = false;
};

int run_estimate(const EstimateArgs& a) {
  ModelConfig config;
  PanelSpec panel;
  if (!a.manifest.empty()) {
    if (!a.config.empty() || !a.data.empty() || !a.modifiers.empty() || !a.transforms.empty())
      throw UsageError("--manifest replaces --config, --data, --modifiers and --transform");
    std::ifstream in(a.manifest);
    if (!in) throw UsageError("cannot open " + a.manifest);
    const auto mf = nlohmann::json::parse(in);
    config = config_from_json(mf.at("config"));
    panel = panel_from_json(mf.at("panel"));
    for (const auto& input : mf.at("inputs")) {
      const auto path = input.at("path").get<std::string>();
      if (file_sha1(path) != input.at("sha1").get<std::string>())
        throw IngestError("input file " + path + " changed since the manifest was written");
      if (input.at("role") == "endogenous") panel.endogenous_path = path;
      if (input.at("role") == "modifiers") panel.modifier_path = path;
    }
  } else {
    if (a.data.empty() || a.modifiers.empty()) throw UsageError("estimate needs --data and --modifiers (or --manifest)");
    if (!a.config.empty()) config = read_config(a.config);
    panel.endogenous_path = a.data;
    panel.modifier_path = a.modifiers;
    panel.transforms = parse_transforms(a.transforms);
    panel.variables = split_list(a.variables);
    panel.modifiers = split_list(a.modifier_columns);
  }
  if (a.seed) config.seed = *a.seed;
  config = validate_config(config);

  const Dataset data = load_panel(panel);
  const DesignData design = build_design(data, config.lags, config.include_intercept);
  RunInfo info;
  info.variable_names = data.variable_names;
  info.modifier_names = data.modifier_names;
  info.dates = design.dates;
  info.panel = panel;
  info.started = utc_timestamp();

  RunOptions opts;
  opts.threads = a.threads;
  if (!a.quiet) {
    opts.progress = [](int done, int total) {
      if (done == total || done % std::max(1, total / 10) == 0) std::cerr << "sweep " << done << "/" << total << "\n";
    };
  }
  const PosteriorDraws post = run_mcmc(config, design, opts);
  info.finished = utc_timestamp();
  save_draws(post, info, a.out);
  std::cout << "retained draws: " << post.draws.size() << "\n"
            << "rows: " << design.n_obs() << " (" << design.dates.front() << " to " << design.dates.back() << ")\n"
            << "seconds: " << fmt(post.seconds) << "\n"
            << "store: " << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------- irf

struct IrfArgs {
  std::string store;
  int horizons = 16;
  std::string time = "all";
  std::string out;
  FlagOptions flags;
};

int run_irf(const IrfArgs& a) {
  const StoredRun run = load_draws(a.store);
  const Identification id = identify(run, a.flags);
  std::vector<Eigen::Index> times;
  if (a.time == "all") {
    for (Eigen::Index t = 0; t < run.post.design.n_obs(); ++t) times.push_back(t);
  } else {
    times.push_back(resolve_time(a.time, run.info.dates));
  }
  const IrfResult r = compute_irfs(run.post, id.shocks, times, a.horizons);
  std::ofstream file;
  if (!a.out.empty()) file = open_out(a.out);
  std::ostream& out = a.out.empty() ? std::cout : file;
  out << "time,horizon,variable,lower,median,upper\n";
  for (int ti = 0; ti < r.n_times; ++ti)
    write_summary_rows(out, run.info.dates[static_cast<std::size_t>(times[static_cast<std::size_t>(ti)])], r, ti,
                       run.info.variable_names);
  if (r.n_times > 1) {
    const IrfSummary s = average_irf(r);
    for (int h = 0; h < r.horizons; ++h)
      for (int m = 0; m < r.n_vars; ++m)
        out << "average," << h << ',' << run.info.variable_names[static_cast<std::size_t>(m)] << ','
            << fmt(s.lower(h, m)) << ',' << fmt(s.median(h, m)) << ',' << fmt(s.upper(h, m)) << '\n';
  }
  if (r.n_explosive > 0)
    std::cerr << "warning: " << r.n_explosive << " draw-period pairs have explosive companion matrices\n";
  return 0;
}

// ---------------------------------------------------------------- identify

struct IdentifyArgs {
  std::string store;
  std::string shares;
  FlagOptions flags;
};

int run_identify(const IdentifyArgs& a) {
  const StoredRun run = load_draws(a.store);
  const Identification id = identify(run, a.flags);
  const auto& post = run.post;
  std::cout << "draw,factor,sign,scale,sign_conflict\n";
  std::map<int, int> counts;
  for (std::size_t d = 0; d < id.shocks.size(); ++d) {
    const ShockId& s = id.shocks[d];
    ++counts[s.factor];
    std::cout << d << ',' << s.factor + 1 << ',' << s.sign << ',' << fmt(s.scale) << ',' << (s.sign_conflict ? 1 : 0)
              << '\n';
  }
  for (const auto& [factor, n] : counts)
    std::cerr << "factor " << factor + 1 << ": " << fmt(100.0 * n / static_cast<double>(id.shocks.size()))
              << "% of draws\n";

  if (!a.shares.empty()) {
    std::ofstream out = open_out(a.shares);
    out << "date,variable,lower,median,upper\n";
    const Eigen::Index T = post.design.n_obs();
    const auto M = static_cast<int>(post.design.n_vars());
    std::vector<std::vector<double>> v(static_cast<std::size_t>(M), std::vector<double>(post.draws.size()));
    for (Eigen::Index t = 0; t < T; ++t) {
      for (std::size_t d = 0; d < post.draws.size(); ++d) {
        const DrawRecord& dr = post.draws[d];
        const VectorXd share = variance_share(dr.Gamma, dr.R.row(t).transpose(), dr.Sigma.row(t).transpose(),
                                              id.shocks[d].factor);
        for (int m = 0; m < M; ++m) v[static_cast<std::size_t>(m)][d] = share(m);
      }
      for (int m = 0; m < M; ++m) {
        const auto& x = v[static_cast<std::size_t>(m)];
        out << run.info.dates[static_cast<std::size_t>(t)] << ',' << run.info.variable_names[static_cast<std::size_t>(m)]
            << ',' << fmt(quantile(x, 0.16)) << ',' << fmt(quantile(x, 0.5)) << ',' << fmt(quantile(x, 0.84)) << '\n';
      }
    }
  }
  return 0;
}

// ---------------------------------------------------------------- scenario

struct ScenarioArgs {
  std::string store;
  std::string vary;
  std::string percentiles = "0,25,50,75,100";
  std::string anchor_window;
  std::string variables;
  int horizons = 16;
  std::string out;
  FlagOptions flags;
};

int run_scenario(const ScenarioArgs& a) {
  const StoredRun run = load_draws(a.store);
  const auto& post = run.post;
  const MatrixXd& Z = post.design.Z;
  const int vary = resolve_index(a.vary, run.info.modifier_names, "modifier");

  Eigen::Index lo = 0, hi = Z.rows() - 1;
  if (!a.anchor_window.empty()) {
    const auto colon = a.anchor_window.find(':');
    if (colon == std::string::npos) throw UsageError("--anchor-window expects START:END");
    lo = resolve_time(a.anchor_window.substr(0, colon), run.info.dates);
    hi = resolve_time(a.anchor_window.substr(colon + 1), run.info.dates);
    if (hi < lo) throw UsageError("--anchor-window ends before it starts");
  }
  const VectorXd anchor = Z.middleRows(lo, hi - lo + 1).colwise().mean().transpose();
  const std::vector<double> column(Z.col(vary).data(), Z.col(vary).data() + Z.rows());

  std::vector<int> vars;
  for (const auto& v : split_list(a.variables)) vars.push_back(resolve_index(v, run.info.variable_names, "variable"));
  if (vars.empty())
    for (int m = 0; m < static_cast<int>(post.design.n_vars()); ++m) vars.push_back(m);

  const Identification id = identify(run, a.flags);
  std::ofstream file;
  if (!a.out.empty()) file = open_out(a.out);
  std::ostream& out = a.out.empty() ? std::cout : file;
  out << "percentile,modifier_value,horizon,variable,lower,median,upper\n";
  for (const auto& ptxt : split_list(a.percentiles)) {
    const double p = std::stod(ptxt);
    if (p < 0.0 || p > 100.0) throw UsageError("percentiles must lie in [0, 100]");
    VectorXd z_star = anchor;
    z_star(vary) = quantile(column, p / 100.0);
    std::vector<MatrixXd> coefs;
    coefs.reserve(post.draws.size());
    for (const auto& d : post.draws) coefs.push_back(scenario_coefficients(d, z_star));
    const IrfResult r = compute_scenario_irfs(post, id.shocks, coefs, a.horizons);
    std::vector<double> v(static_cast<std::size_t>(r.n_draws));
    for (int h = 0; h < r.horizons; ++h)
      for (int m : vars) {
        for (int d = 0; d < r.n_draws; ++d) v[static_cast<std::size_t>(d)] = r.at(d, 0, h, m);
        out << ptxt << ',' << fmt(z_star(vary)) << ',' << h << ',' << run.info.variable_names[static_cast<std::size_t>(m)]
            << ',' << fmt(quantile(v, 0.16)) << ',' << fmt(quantile(v, 0.5)) << ',' << fmt(quantile(v, 0.84)) << '\n';
      }
  }
  return 0;
}

// ---------------------------------------------------------------- waic

int run_waic(const std::string& store, const std::string& subset) {
  const StoredRun run = load_draws(store);
  std::vector<int> vars;
  for (const auto& v : split_list(subset)) vars.push_back(resolve_index(v, run.info.variable_names, "variable"));
  const WaicResult w = waic(run.post.loglik_subset(vars));
  std::cout << "waic " << fmt(w.waic) << "\nlpd " << fmt(w.lpd) << "\np_waic " << fmt(w.p_waic) << "\n";
  return 0;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string out_data;
  std::string out_modifiers;
  std::string truth;
  std::string toy;
  int n_vars = 3;
  int lags = 1;
  int n_obs = 200;
  int factors = 1;
  std::string coef_law = "constant";
  std::string vol_law = "constant";
  double amplitude = 0.3;
  std::uint64_t seed = 1;
  bool allow_explosive = false;
};

CoefLaw parse_coef_law(const std::string& s) {
  if (s == "constant") return CoefLaw::Constant;
  if (s == "step") return CoefLaw::Step;
  if (s == "sine") return CoefLaw::Sine;
  if (s == "tree") return CoefLaw::Tree;
  throw UsageError("unknown coefficient law '" + s + "'");
}

VolLaw parse_vol_law(const std::string& s) {
  if (s == "constant") return VolLaw::Constant;
  if (s == "step") return VolLaw::Step;
  if (s == "regime") return VolLaw::Regime;
  throw UsageError("unknown volatility law '" + s + "'");
}

nlohmann::json matrix_json(const MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
    rows.push_back(row);
  }
  return rows;
}

int run_simulate(const SimulateArgs& a) {
  if (a.out_data.empty()) throw UsageError("simulate needs --out-data");
  if (!a.toy.empty()) {
    ToySpec spec;
    spec.n_obs = a.n_obs;
    spec.law = parse_coef_law(a.toy);
    const ToyData d = simulate_toy(spec, a.seed);
    MatrixXd v(d.y.size(), 2);
    v << d.y, d.x;
    write_csv(a.out_data, "date", {"y", "x"}, d.dates, v);
    if (!a.truth.empty()) {
      std::ofstream out = open_out(a.truth);
      out << nlohmann::json{{"beta", std::vector<double>(d.beta.data(), d.beta.data() + d.beta.size())}}.dump(2) << "\n";
    }
    return 0;
  }
  if (a.out_modifiers.empty()) throw UsageError("simulate needs --out-modifiers");
  DgpSpec spec;
  spec.n_vars = a.n_vars;
  spec.lags = a.lags;
  spec.n_obs = a.n_obs;
  spec.n_factors = a.factors;
  spec.coef_law = parse_coef_law(a.coef_law);
  spec.vol_law = parse_vol_law(a.vol_law);
  spec.amplitude = a.amplitude;
  spec.allow_explosive = a.allow_explosive;
  const SimulatedData sim = simulate_dgp(spec, a.seed);
  Dataset data = sim.data;
  data.modifier_names[1] = "recession";
  write_dataset(data, a.out_data, a.out_modifiers);
  if (!a.truth.empty()) {
    const auto& tr = sim.truth;
    nlohmann::json coefs = nlohmann::json::array();
    for (const auto& c : tr.coefficients) coefs.push_back(matrix_json(c));
    std::ofstream out = open_out(a.truth);
    out << nlohmann::json{{"Gamma", matrix_json(tr.Gamma)},
                          {"R", matrix_json(tr.R)},
                          {"Sigma", matrix_json(tr.Sigma)},
                          {"q", matrix_json(tr.q)},
                          {"regime", tr.regime},
                          {"coefficients", coefs}}
               .dump()
        << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------- toy-phillips

struct ToyArgs {
  std::string data;
  int trees = 1;
  int draws = 3000;
  int burn = 1000;
  std::uint64_t seed = 1;
  std::string out;
};

int run_toy(const ToyArgs& a) {
  const CsvTable table = read_csv(a.data);
  if (table.columns.size() != 2) throw UsageError("toy-phillips expects a date column and exactly two data columns (y, x)");
  if (!table.values.allFinite()) throw IngestError("toy-phillips data contains missing values");
  const Eigen::Index T = table.values.rows();
  VectorXd z(T);
  for (Eigen::Index t = 0; t < T; ++t) z(t) = static_cast<double>(t + 1);
  const DesignData design =
      make_regression_design(table.values.col(0), table.values.col(1), z, true, table.dates);

  ModelConfig c;
  c.lags = 0;
  c.n_tvp_factors = 1;
  c.n_vol_factors = 1;
  c.trees_per_tvp_factor = a.trees;
  c.trees_per_vol_factor = 1;
  c.n_draws = a.draws;
  c.n_burn = a.burn;
  c.seed = a.seed;
  const PosteriorDraws post = run_mcmc(c, design, {});

  // Coefficient on x in raw units, per draw and period.
  const auto S = post.draws.size();
  std::vector<std::vector<double>> path(static_cast<std::size_t>(T), std::vector<double>(S));
  for (std::size_t d = 0; d < S; ++d)
    for (Eigen::Index t = 0; t < T; ++t)
      path[static_cast<std::size_t>(t)][d] =
          unscale_coefficients(post.draws[d].coefficients_at(t), design.layout, post.scalers)(0, 1);
  if (!a.out.empty()) {
    std::ofstream out = open_out(a.out);
    out << "date,lower,median,upper\n";
    for (Eigen::Index t = 0; t < T; ++t) {
      const auto& v = path[static_cast<std::size_t>(t)];
      out << table.dates[static_cast<std::size_t>(t)] << ',' << fmt(quantile(v, 0.16)) << ',' << fmt(quantile(v, 0.5))
          << ',' << fmt(quantile(v, 0.84)) << '\n';
    }
  }

  // Regime summary of the first tree: most frequent structure, then the mean
  // terminal node parameter and share of observations of each branch.
  std::map<std::string, std::vector<std::size_t>> by_structure;
  for (std::size_t d = 0; d < S; ++d) by_structure[post.draws[d].tvp_trees[0][0].trees[0].structure_key()].push_back(d);
  const auto mode = std::max_element(by_structure.begin(), by_structure.end(),
                                     [](const auto& l, const auto& r) { return l.second.size() < r.second.size(); });
  const auto& members = mode->second;
  const Tree& ref = post.draws[members.front()].tvp_trees[0][0].trees[0];
  const std::vector<int> leaves = ref.leaves();
  std::cout << "trees per factor: " << a.trees << (a.trees > 1 ? " (summary of the first tree)" : "") << "\n"
            << "most frequent structure in " << fmt(100.0 * members.size() / static_cast<double>(S))
            << "% of retained draws, " << leaves.size() << " regimes\n"
            << "regime,first,last,share,node_parameter,coefficient_on_x\n";
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    std::vector<Eigen::Index> rows;
    for (Eigen::Index t = 0; t < T; ++t)
      if (ref.find_leaf(design.Z.row(t)) == leaves[li]) rows.push_back(t);
    double mu = 0.0, coef = 0.0;
    for (std::size_t d : members) {
      mu += post.draws[d].tvp_trees[0][0].trees[0].node(leaves[li]).mu;
      for (Eigen::Index t : rows) coef += path[static_cast<std::size_t>(t)][d] / static_cast<double>(rows.size());
    }
    mu /= static_cast<double>(members.size());
    coef /= static_cast<double>(members.size());
    std::cout << li + 1 << ',' << table.dates[static_cast<std::size_t>(rows.front())] << ','
              << table.dates[static_cast<std::size_t>(rows.back())] << ','
              << fmt(static_cast<double>(rows.size()) / static_cast<double>(T)) << ',' << fmt(mu) << ',' << fmt(coef)
              << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nonparametric TVP-VAR with factor BART coefficients and heteroBART volatilities"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kSoftwareVersion);

  EstimateArgs est;
  auto* c_est = app.add_subcommand("estimate", "run the sampler and write a draw store");
  c_est->add_option("--config", est.config, "JSON configuration");
  c_est->add_option("--data", est.data, "endogenous CSV (date first)");
  c_est->add_option("--modifiers", est.modifiers, "effect-modifier CSV (date first)");
  c_est->add_option("--transform", est.transforms, "NAME=none|yoy|yoy_arith|diff|log, repeatable");
  c_est->add_option("--variables", est.variables, "comma-separated endogenous columns, in order");
  c_est->add_option("--modifier-columns", est.modifier_columns, "comma-separated modifier columns");
  c_est->add_option("--out", est.out, "draw store directory")->required();
  c_est->add_option("--manifest", est.manifest, "re-run from a stored manifest");
  c_est->add_option("--seed", est.seed, "override the configured seed");
  c_est->add_option("--threads", est.threads, "worker threads over equations")->check(CLI::PositiveNumber);
  c_est->add_flag("--quiet", est.quiet, "no progress output");

  IrfArgs irf_args;
  auto* c_irf = app.add_subcommand("irf", "impulse responses to the business-cycle shock");
  c_irf->add_option("--store", irf_args.store, "draw store directory")->required();
  c_irf->add_option("--horizons", irf_args.horizons, "number of horizons")->check(CLI::PositiveNumber);
  c_irf->add_option("--time", irf_args.time, "'all', a date or a 0-based row")->capture_default_str();
  c_irf->add_option("--out", irf_args.out, "CSV output (default stdout)");
  add_flag_options(c_irf, irf_args.flags);

  IdentifyArgs id_args;
  auto* c_id = app.add_subcommand("identify", "per-draw shock labels and variance-share paths");
  c_id->add_option("--store", id_args.store, "draw store directory")->required();
  c_id->add_option("--shares", id_args.shares, "CSV of the identified factor's variance shares over time");
  add_flag_options(c_id, id_args.flags);

  ScenarioArgs sc;
  auto* c_sc = app.add_subcommand("scenario", "responses with one modifier set to chosen percentiles");
  c_sc->add_option("--store", sc.store, "draw store directory")->required();
  c_sc->add_option("--vary", sc.vary, "modifier to vary")->required();
  c_sc->add_option("--percentiles", sc.percentiles, "comma-separated percentiles")->capture_default_str();
  c_sc->add_option("--anchor-window", sc.anchor_window, "START:END rows or dates for the other modifiers");
  c_sc->add_option("--variables", sc.variables, "variables to report (default all)");
  c_sc->add_option("--horizons", sc.horizons, "number of horizons")->check(CLI::PositiveNumber);
  c_sc->add_option("--out", sc.out, "CSV output (default stdout)");
  add_flag_options(c_sc, sc.flags);

  std::string waic_store, waic_subset;
  auto* c_waic = app.add_subcommand("waic", "WAIC from pointwise log densities");
  c_waic->add_option("--store", waic_store, "draw store directory")->required();
  c_waic->add_option("--subset", waic_subset, "comma-separated variables for a marginal WAIC");

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "simulate a dataset from the model");
  c_sim->add_option("--out-data", sim.out_data, "endogenous CSV to write");
  c_sim->add_option("--out-modifiers", sim.out_modifiers, "modifier CSV to write");
  c_sim->add_option("--truth", sim.truth, "JSON file for the true parameters");
  c_sim->add_option("--toy", sim.toy, "write a two-column toy regression instead: constant|step|sine|tree");
  c_sim->add_option("--n-vars", sim.n_vars, "number of variables")->check(CLI::PositiveNumber);
  c_sim->add_option("--lags", sim.lags, "lag order")->check(CLI::PositiveNumber);
  c_sim->add_option("--T", sim.n_obs, "usable rows")->check(CLI::PositiveNumber);
  c_sim->add_option("--factors", sim.factors, "volatility factors")->check(CLI::PositiveNumber);
  c_sim->add_option("--coef-law", sim.coef_law, "constant|step|sine|tree")->capture_default_str();
  c_sim->add_option("--vol-law", sim.vol_law, "constant|step|regime")->capture_default_str();
  c_sim->add_option("--amplitude", sim.amplitude, "coefficient variation amplitude")->capture_default_str();
  c_sim->add_option("--seed", sim.seed, "random seed")->capture_default_str();
  c_sim->add_flag("--allow-explosive", sim.allow_explosive, "accept explosive coefficient paths");

  ToyArgs toy;
  auto* c_toy = app.add_subcommand("toy-phillips", "single-equation TVP regression with a time-trend modifier");
  c_toy->add_option("--data", toy.data, "CSV with date, y, x")->required();
  c_toy->add_option("--trees", toy.trees, "trees in the coefficient factor")->check(CLI::PositiveNumber);
  c_toy->add_option("--draws", toy.draws, "total sweeps")->check(CLI::PositiveNumber);
  c_toy->add_option("--burn", toy.burn, "burn-in sweeps")->check(CLI::NonNegativeNumber);
  c_toy->add_option("--seed", toy.seed, "random seed");
  c_toy->add_option("--out", toy.out, "CSV of the coefficient path on x");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*c_est) return run_estimate(est);
    if (*c_irf) return run_irf(irf_args);
    if (*c_id) return run_identify(id_args);
    if (*c_sc) return run_scenario(sc);
    if (*c_waic) return run_waic(waic_store, waic_subset);
    if (*c_sim) return run_simulate(sim);
    if (*c_toy) return run_toy(toy);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const IngestError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 1;
  } catch (const DimensionError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 1;
  } catch (const DegenerateScaleError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 1;
  } catch (const ParameterError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "input error: malformed JSON: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
