#include "tvpbart/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

namespace tvpbart {

namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n\"");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n\"");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

bool is_missing(const std::string& s) {
  static const std::set<std::string> tokens{"", "NA", "NaN", "nan", "NAN", ".", "null"};
  return tokens.count(s) > 0;
}

double parse_number(const std::string& s, const std::string& where) {
  if (is_missing(s)) return kNaN;
  double v = 0.0;
  const char* first = s.data();
  if (!s.empty() && s[0] == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw IngestError("cannot parse '" + s + "' as a number " + where);
  return v;
}

// Months since year 0 for "YYYY-MM" or "YYYY-MM-DD".
int month_index(const std::string& date) {
  auto digits = [&](std::size_t from, std::size_t n) {
    int v = 0;
    for (std::size_t i = from; i < from + n; ++i) {
      if (i >= date.size() || date[i] < '0' || date[i] > '9') throw IngestError("date '" + date + "' is not ISO formatted");
      v = v * 10 + (date[i] - '0');
    }
    return v;
  };
  if (date.size() < 7 || date[4] != '-') throw IngestError("date '" + date + "' is not ISO formatted");
  const int year = digits(0, 4);
  const int month = digits(5, 2);
  if (month < 1 || month > 12) throw IngestError("date '" + date + "' has an invalid month");
  if (date.size() > 7) {
    if (date.size() != 10 || date[7] != '-') throw IngestError("date '" + date + "' is not ISO formatted");
    const int day = digits(8, 2);
    if (day < 1 || day > 31) throw IngestError("date '" + date + "' has an invalid day");
  }
  return year * 12 + month - 1;
}

std::vector<int> select_columns(const CsvTable& t, const std::vector<std::string>& wanted, const std::string& file) {
  std::vector<int> idx;
  if (wanted.empty()) {
    for (std::size_t i = 0; i < t.columns.size(); ++i) idx.push_back(static_cast<int>(i));
    return idx;
  }
  for (const auto& name : wanted) {
    const auto it = std::find(t.columns.begin(), t.columns.end(), name);
    if (it == t.columns.end()) throw IngestError("column '" + name + "' not found in " + file);
    idx.push_back(static_cast<int>(it - t.columns.begin()));
  }
  return idx;
}

void put_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const std::string& buf, std::size_t& pos) {
  if (pos + 8 > buf.size()) throw IngestError("truncated array file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
  pos += 8;
  return v;
}

constexpr char kArrayMagic[9] = "TVPBARR1";

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestError("cannot write " + path);
  out << content;
}

}  // namespace

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw IngestError(path + " is empty");
  const auto header = split_line(line);
  if (header.size() < 2) throw IngestError(path + " needs a date column and at least one data column");
  CsvTable t;
  t.columns.assign(header.begin() + 1, header.end());
  std::vector<std::vector<double>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != header.size())
      throw IngestError(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                        " fields, found " + std::to_string(cells.size()));
    t.dates.push_back(cells[0]);
    std::vector<double> row;
    for (std::size_t i = 1; i < cells.size(); ++i)
      row.push_back(parse_number(cells[i], "at " + path + ":" + std::to_string(line_no)));
    rows.push_back(std::move(row));
  }
  t.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(t.columns.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) t.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return t;
}

void write_csv(const std::string& path, const std::string& date_header, const std::vector<std::string>& columns,
               const std::vector<std::string>& dates, const MatrixXd& values) {
  std::ofstream out(path);
  if (!out) throw IngestError("cannot write " + path);
  out << date_header;
  for (const auto& c : columns) out << ',' << c;
  out << '\n';
  char buf[64];
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    out << (static_cast<std::size_t>(r) < dates.size() ? dates[static_cast<std::size_t>(r)] : std::to_string(r));
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", values(r, c));
      out << ',' << buf;
    }
    out << '\n';
  }
}

Transform parse_transform(const std::string& name) {
  if (name == "none") return Transform::None;
  if (name == "yoy") return Transform::Yoy;
  if (name == "yoy_arith") return Transform::YoyArith;
  if (name == "diff") return Transform::Diff;
  if (name == "log") return Transform::Log;
  throw IngestError("unknown transformation '" + name + "' (expected none, yoy, yoy_arith, diff or log)");
}

std::string transform_name(Transform t) {
  switch (t) {
    case Transform::None: return "none";
    case Transform::Yoy: return "yoy";
    case Transform::YoyArith: return "yoy_arith";
    case Transform::Diff: return "diff";
    case Transform::Log: return "log";
  }
  return "none";
}

VectorXd apply_transform(const VectorXd& x, Transform t, int periods_per_year) {
  const Eigen::Index n = x.size();
  VectorXd out = VectorXd::Constant(n, kNaN);
  auto safe_log = [](double v) { return v > 0.0 ? std::log(v) : kNaN; };
  switch (t) {
    case Transform::None:
      return x;
    case Transform::Log:
      for (Eigen::Index i = 0; i < n; ++i) out(i) = safe_log(x(i));
      return out;
    case Transform::Diff:
      for (Eigen::Index i = 1; i < n; ++i) out(i) = x(i) - x(i - 1);
      return out;
    case Transform::Yoy:
      if (periods_per_year < 1) throw IngestError("yoy needs a known number of periods per year");
      for (Eigen::Index i = periods_per_year; i < n; ++i)
        out(i) = 100.0 * (safe_log(x(i)) - safe_log(x(i - periods_per_year)));
      return out;
    case Transform::YoyArith:
      if (periods_per_year < 1) throw IngestError("yoy_arith needs a known number of periods per year");
      for (Eigen::Index i = periods_per_year; i < n; ++i) {
        const double base = x(i - periods_per_year);
        out(i) = base != 0.0 ? 100.0 * (x(i) / base - 1.0) : kNaN;
      }
      return out;
  }
  return out;
}

int infer_step_months(const std::vector<std::string>& dates) {
  if (dates.size() < 2) throw IngestError("at least two dated rows are required");
  int step = 0;
  for (std::size_t i = 1; i < dates.size(); ++i) {
    const int d = month_index(dates[i]) - month_index(dates[i - 1]);
    if (d <= 0) throw IngestError("dates are not strictly increasing at '" + dates[i] + "'");
    if (step == 0) step = d;
    if (d != step) throw IngestError("date misalignment: gap between '" + dates[i - 1] + "' and '" + dates[i] + "'");
  }
  return step;
}

Dataset load_panel(const PanelSpec& spec) {
  const CsvTable ty = read_csv(spec.endogenous_path);
  const CsvTable tz = read_csv(spec.modifier_path);
  const int step_y = infer_step_months(ty.dates);
  const int step_z = infer_step_months(tz.dates);
  if (step_y != step_z) throw IngestError("date misalignment: endogenous and modifier files have different frequencies");
  const int ppy = (12 % step_y == 0) ? 12 / step_y : 0;

  for (const auto& [name, tr] : spec.transforms) {
    const bool known = std::find(ty.columns.begin(), ty.columns.end(), name) != ty.columns.end() ||
                       std::find(tz.columns.begin(), tz.columns.end(), name) != tz.columns.end();
    if (!known) throw IngestError("transformation given for unknown column '" + name + "'");
  }

  auto transformed = [&](const CsvTable& t, const std::vector<int>& cols) {
    MatrixXd out(t.values.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) {
      const auto& name = t.columns[static_cast<std::size_t>(cols[k])];
      const auto it = spec.transforms.find(name);
      const Transform tr = it == spec.transforms.end() ? Transform::None : it->second;
      out.col(static_cast<Eigen::Index>(k)) = apply_transform(t.values.col(cols[k]), tr, ppy);
    }
    return out;
  };
  const auto cy = select_columns(ty, spec.variables, spec.endogenous_path);
  const auto cz = select_columns(tz, spec.modifiers, spec.modifier_path);
  const MatrixXd Yall = transformed(ty, cy);
  const MatrixXd Zall = transformed(tz, cz);

  const int y0 = month_index(ty.dates.front()), z0 = month_index(tz.dates.front());
  const int lo = std::max(y0, z0);
  const int hi = std::min(month_index(ty.dates.back()), month_index(tz.dates.back()));
  if (lo > hi) throw IngestError("date misalignment: the two files share no dates");
  if ((lo - y0) % step_y != 0 || (lo - z0) % step_y != 0)
    throw IngestError("date misalignment: the two files use different period anchors");
  const int ny = (hi - lo) / step_y + 1;
  const Eigen::Index oy = (lo - y0) / step_y, oz = (lo - z0) / step_y;

  // Leading rows made undefined by the transformations are dropped.
  Eigen::Index first = 0;
  auto row_defined = [&](Eigen::Index r) {
    return Yall.row(oy + r).array().isFinite().all() && Zall.row(oz + r).array().isFinite().all();
  };
  while (first < ny && !row_defined(first)) ++first;
  if (first == ny) throw IngestError("no complete rows after transformation");

  Dataset d;
  const Eigen::Index T = ny - first;
  d.Y = Yall.middleRows(oy + first, T);
  d.Z = Zall.middleRows(oz + first, T);
  for (Eigen::Index r = 0; r < T; ++r) d.dates.push_back(ty.dates[static_cast<std::size_t>(oy + first + r)]);
  for (int c : cy) d.variable_names.push_back(ty.columns[static_cast<std::size_t>(c)]);
  for (int c : cz) d.modifier_names.push_back(tz.columns[static_cast<std::size_t>(c)]);
  for (Eigen::Index r = 0; r < T; ++r) {
    for (Eigen::Index c = 0; c < d.Y.cols(); ++c)
      if (!std::isfinite(d.Y(r, c)))
        throw IngestError("missing value in '" + d.variable_names[static_cast<std::size_t>(c)] + "' at " + d.dates[static_cast<std::size_t>(r)]);
    for (Eigen::Index c = 0; c < d.Z.cols(); ++c)
      if (!std::isfinite(d.Z(r, c)))
        throw IngestError("missing value in '" + d.modifier_names[static_cast<std::size_t>(c)] + "' at " + d.dates[static_cast<std::size_t>(r)]);
  }
  return d;
}

void write_dataset(const Dataset& data, const std::string& endogenous_path, const std::string& modifier_path) {
  write_csv(endogenous_path, "date", data.variable_names, data.dates, data.Y);
  write_csv(modifier_path, "date", data.modifier_names, data.dates, data.Z);
}

namespace {

template <typename T>
void read_key(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(key, "has the wrong type");
  }
}

}  // namespace

ModelConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config", "must be a JSON object");
  static const std::set<std::string> known{"P", "Q_beta", "Q_q", "S_beta", "S_q", "alpha", "zeta", "kappa", "B_v",
                                           "include_intercept", "n_draws", "n_burn", "thin", "seed",
                                           "constant_coefficients", "n_min", "scale_response", "store_tvp"};
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw ConfigError(key, "unknown configuration key");
  ModelConfig c;
  read_key(j, "P", c.lags);
  read_key(j, "Q_beta", c.n_tvp_factors);
  read_key(j, "Q_q", c.n_vol_factors);
  read_key(j, "S_beta", c.trees_per_tvp_factor);
  read_key(j, "S_q", c.trees_per_vol_factor);
  read_key(j, "alpha", c.alpha);
  read_key(j, "zeta", c.zeta);
  read_key(j, "kappa", c.kappa);
  read_key(j, "B_v", c.process_var_scale);
  read_key(j, "include_intercept", c.include_intercept);
  read_key(j, "n_draws", c.n_draws);
  read_key(j, "n_burn", c.n_burn);
  read_key(j, "thin", c.thin);
  read_key(j, "seed", c.seed);
  read_key(j, "constant_coefficients", c.constant_coefficients);
  read_key(j, "n_min", c.min_leaf_size);
  read_key(j, "scale_response", c.scale_response);
  read_key(j, "store_tvp", c.store_tvp);
  return validate_config(c);
}

nlohmann::json config_to_json(const ModelConfig& c) {
  return {{"P", c.lags},
          {"Q_beta", c.n_tvp_factors},
          {"Q_q", c.n_vol_factors},
          {"S_beta", c.trees_per_tvp_factor},
          {"S_q", c.trees_per_vol_factor},
          {"alpha", c.alpha},
          {"zeta", c.zeta},
          {"kappa", c.kappa},
          {"B_v", c.process_var_scale},
          {"include_intercept", c.include_intercept},
          {"n_draws", c.n_draws},
          {"n_burn", c.n_burn},
          {"thin", c.thin},
          {"seed", c.seed},
          {"constant_coefficients", c.constant_coefficients},
          {"n_min", c.min_leaf_size},
          {"scale_response", c.scale_response},
          {"store_tvp", c.store_tvp}};
}

ModelConfig read_config(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config", std::string("invalid JSON in ") + path + ": " + e.what());
  }
  return config_from_json(j);
}

std::string git_blob_sha1(const std::string& content) {
  const std::string header = "blob " + std::to_string(content.size()) + std::string(1, '\0');
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx) throw Error("cannot allocate a hash context");
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                  EVP_DigestUpdate(ctx, content.data(), content.size()) == 1 && EVP_DigestFinal_ex(ctx, md, &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw Error("SHA-1 computation failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return os.str();
}

std::string file_sha1(const std::string& path) { return git_blob_sha1(read_file(path)); }

void write_array(const std::string& path, const std::vector<std::int64_t>& dims, const std::vector<double>& data) {
  std::int64_t n = 1;
  for (auto d : dims) n *= d;
  if (n != static_cast<std::int64_t>(data.size())) throw DimensionError("array shape does not match data length");
  std::string buf(kArrayMagic, 8);
  put_u64(buf, dims.size());
  for (auto d : dims) put_u64(buf, static_cast<std::uint64_t>(d));
  for (double v : data) put_u64(buf, std::bit_cast<std::uint64_t>(v));
  write_file(path, buf);
}

ArrayData read_array(const std::string& path) {
  const std::string buf = read_file(path);
  if (buf.size() < 16 || buf.compare(0, 8, kArrayMagic) != 0) throw IngestError(path + " is not a draw array file");
  std::size_t pos = 8;
  ArrayData a;
  const auto ndim = get_u64(buf, pos);
  std::int64_t n = 1;
  for (std::uint64_t i = 0; i < ndim; ++i) {
    a.dims.push_back(static_cast<std::int64_t>(get_u64(buf, pos)));
    n *= a.dims.back();
  }
  if (buf.size() != pos + 8 * static_cast<std::size_t>(n)) throw IngestError(path + " has the wrong length for its shape");
  a.data.resize(static_cast<std::size_t>(n));
  for (auto& v : a.data) v = std::bit_cast<double>(get_u64(buf, pos));
  return a;
}

PanelSpec panel_from_json(const nlohmann::json& j) {
  PanelSpec p;
  p.endogenous_path = j.value("endogenous", "");
  p.modifier_path = j.value("modifiers", "");
  if (j.contains("transforms"))
    for (const auto& [k, v] : j.at("transforms").items()) p.transforms[k] = parse_transform(v.get<std::string>());
  if (j.contains("variables")) p.variables = j.at("variables").get<std::vector<std::string>>();
  if (j.contains("modifier_columns")) p.modifiers = j.at("modifier_columns").get<std::vector<std::string>>();
  return p;
}

nlohmann::json panel_to_json(const PanelSpec& p) {
  nlohmann::json tr = nlohmann::json::object();
  for (const auto& [k, v] : p.transforms) tr[k] = transform_name(v);
  return {{"endogenous", p.endogenous_path},
          {"modifiers", p.modifier_path},
          {"transforms", tr},
          {"variables", p.variables},
          {"modifier_columns", p.modifiers}};
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace {

std::vector<double> flatten(const MatrixXd& m) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
  return out;
}

void append(std::vector<double>& out, const MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
}

MatrixXd slice(const ArrayData& a, std::size_t offset, Eigen::Index rows, Eigen::Index cols) {
  MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = a.data.at(offset + static_cast<std::size_t>(r * cols + c));
  return m;
}

nlohmann::json moves_json(const MoveCounts& m) {
  static const char* names[4] = {"grow", "prune", "change", "swap"};
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t i = 0; i < 4; ++i) j[names[i]] = {{"proposed", m.proposed[i]}, {"accepted", m.accepted[i]}};
  return j;
}

MoveCounts moves_from_json(const nlohmann::json& j) {
  static const char* names[4] = {"grow", "prune", "change", "swap"};
  MoveCounts m;
  for (std::size_t i = 0; i < 4; ++i) {
    if (!j.contains(names[i])) continue;
    m.proposed[i] = j.at(names[i]).at("proposed").get<long>();
    m.accepted[i] = j.at(names[i]).at("accepted").get<long>();
  }
  return m;
}

}  // namespace

nlohmann::json save_draws(const PosteriorDraws& post, const RunInfo& info, const std::string& dir) {
  fs::create_directories(dir);
  const auto S = static_cast<std::int64_t>(post.draws.size());
  const auto T = static_cast<std::int64_t>(post.design.n_obs());
  const auto M = static_cast<std::int64_t>(post.design.n_vars());
  const auto K = static_cast<std::int64_t>(post.design.n_regressors());
  const std::int64_t Qq = post.config.n_vol_factors;
  const std::int64_t Qb = post.draws.empty() || post.draws[0].loadings.empty() ? 0 : post.draws[0].loadings[0].cols();
  const bool tvp = !post.draws.empty() && post.draws[0].has_tvp();

  std::vector<double> A, G, q, R, Sig, B, L, V, ll;
  for (const auto& d : post.draws) {
    append(A, d.A);
    append(G, d.Gamma);
    append(q, d.q);
    append(R, d.R);
    append(Sig, d.Sigma);
    for (const auto& b : d.beta) append(B, b);
    for (const auto& l : d.loadings) append(L, l);
    for (const auto& v : d.process_var) append(V, v.transpose());
    append(ll, d.loglik.transpose());
  }
  std::map<std::string, std::string> hashes;
  auto put = [&](const std::string& name, const std::vector<std::int64_t>& dims, const std::vector<double>& data) {
    const std::string path = (fs::path(dir) / name).string();
    write_array(path, dims, data);
    hashes[name] = file_sha1(path);
  };
  put("A.bin", {S, M, K}, A);
  put("Gamma.bin", {S, M, Qq}, G);
  put("q.bin", {S, T, Qq}, q);
  put("R.bin", {S, T, Qq}, R);
  put("Sigma.bin", {S, T, M}, Sig);
  if (tvp) put("B.bin", {S, M, T, K}, B);
  put("Lambda.bin", {S, M, K, Qb}, L);
  put("V.bin", {S, M, K}, V);
  put("loglik.bin", {S, T}, ll);
  put("X.bin", {T, K}, flatten(post.design.X));
  put("Y.bin", {T, M}, flatten(post.design.Y));
  put("Z.bin", {T, static_cast<std::int64_t>(post.design.n_modifiers())}, flatten(post.design.Z));

  {
    std::ostringstream os;
    for (std::size_t s = 0; s < post.draws.size(); ++s) {
      nlohmann::json eqs = nlohmann::json::array();
      for (const auto& factors : post.draws[s].tvp_trees) {
        nlohmann::json fj = nlohmann::json::array();
        for (const auto& ens : factors) fj.push_back(ensemble_to_json(ens));
        eqs.push_back(std::move(fj));
      }
      os << nlohmann::json{{"draw", s}, {"sweep", post.draws[s].sweep}, {"equations", eqs}}.dump() << '\n';
    }
    const std::string path = (fs::path(dir) / "trees.jsonl").string();
    write_file(path, os.str());
    hashes["trees.jsonl"] = file_sha1(path);
  }
  {
    nlohmann::json diag;
    nlohmann::json eqm = nlohmann::json::array();
    for (const auto& m : post.tvp_moves) eqm.push_back(moves_json(m));
    diag["tvp_tree_moves"] = eqm;
    diag["vol_tree_moves"] = moves_json(post.vol_moves);
    diag["retained_draws"] = S;
    const std::string path = (fs::path(dir) / "diagnostics.json").string();
    write_file(path, diag.dump(2) + "\n");
    hashes["diagnostics.json"] = file_sha1(path);
  }

  nlohmann::json scalers = nlohmann::json::array();
  for (const auto& sc : post.scalers) scalers.push_back({{"center", sc.center}, {"half_range", sc.half_range}});
  nlohmann::json inputs = nlohmann::json::array();
  for (const auto& [role, path] : {std::pair<std::string, std::string>{"endogenous", info.panel.endogenous_path},
                                   {"modifiers", info.panel.modifier_path}}) {
    if (path.empty()) continue;
    inputs.push_back({{"role", role}, {"path", fs::absolute(path).string()}, {"sha1", file_sha1(path)}});
  }
  const auto& lay = post.design.layout;
  nlohmann::json manifest{
      {"software", kSoftwareVersion},
      {"config", config_to_json(post.config)},
      {"seed", post.config.seed},
      {"started", info.started},
      {"finished", info.finished},
      {"seconds", post.seconds},
      {"inputs", inputs},
      {"panel", panel_to_json(info.panel)},
      {"files", hashes},
      {"layout",
       {{"kind", lay.kind == DesignLayout::Kind::Var ? "var" : "regression"},
        {"n_vars", lay.n_vars},
        {"lags", lay.lags},
        {"intercept", lay.intercept},
        {"n_regressors", lay.n_regressors}}},
      {"scalers", scalers},
      {"variable_names", info.variable_names},
      {"modifier_names", info.modifier_names},
      {"dates", info.dates},
      {"storage", {{"directory", fs::absolute(dir).string()}, {"store_tvp", tvp}, {"retained_draws", S}}}};
  write_file((fs::path(dir) / "manifest.json").string(), manifest.dump(2) + "\n");
  return manifest;
}

StoredRun load_draws(const std::string& dir) {
  StoredRun run;
  const fs::path base(dir);
  try {
    run.manifest = nlohmann::json::parse(read_file((base / "manifest.json").string()));
  } catch (const nlohmann::json::parse_error& e) {
    throw IngestError("invalid manifest in " + dir + ": " + e.what());
  }
  const auto& mf = run.manifest;
  PosteriorDraws& post = run.post;
  post.config = config_from_json(mf.at("config"));
  const auto& lj = mf.at("layout");
  DesignLayout lay;
  lay.kind = lj.at("kind").get<std::string>() == "var" ? DesignLayout::Kind::Var : DesignLayout::Kind::Regression;
  lay.n_vars = lj.at("n_vars").get<int>();
  lay.lags = lj.at("lags").get<int>();
  lay.intercept = lj.at("intercept").get<bool>();
  lay.n_regressors = lj.at("n_regressors").get<int>();
  for (const auto& s : mf.at("scalers")) post.scalers.push_back(Scaler{s.at("center").get<double>(), s.at("half_range").get<double>()});
  run.info.variable_names = mf.at("variable_names").get<std::vector<std::string>>();
  run.info.modifier_names = mf.at("modifier_names").get<std::vector<std::string>>();
  run.info.dates = mf.at("dates").get<std::vector<std::string>>();
  run.info.panel = panel_from_json(mf.at("panel"));
  run.info.started = mf.value("started", "");
  run.info.finished = mf.value("finished", "");
  post.seconds = mf.value("seconds", 0.0);

  auto arr = [&](const std::string& name) { return read_array((base / name).string()); };
  const ArrayData X = arr("X.bin"), Y = arr("Y.bin"), Z = arr("Z.bin");
  post.design.X = slice(X, 0, X.dims[0], X.dims[1]);
  post.design.Y = slice(Y, 0, Y.dims[0], Y.dims[1]);
  post.design.Z = slice(Z, 0, Z.dims[0], Z.dims[1]);
  post.design.dates = run.info.dates;
  post.design.layout = lay;

  const ArrayData A = arr("A.bin"), G = arr("Gamma.bin"), q = arr("q.bin"), R = arr("R.bin"), Sg = arr("Sigma.bin"),
                  L = arr("Lambda.bin"), V = arr("V.bin"), ll = arr("loglik.bin");
  const bool tvp = fs::exists(base / "B.bin");
  const ArrayData B = tvp ? arr("B.bin") : ArrayData{};
  const auto S = A.dims[0];
  const auto M = A.dims[1], K = A.dims[2], Qq = G.dims[2], T = q.dims[1], Qb = L.dims[3];

  std::vector<nlohmann::json> tree_lines;
  {
    std::istringstream is(read_file((base / "trees.jsonl").string()));
    std::string line;
    while (std::getline(is, line))
      if (!line.empty()) tree_lines.push_back(nlohmann::json::parse(line));
  }
  if (static_cast<std::int64_t>(tree_lines.size()) != S) throw IngestError("trees.jsonl does not match the draw count");

  for (std::int64_t s = 0; s < S; ++s) {
    const auto us = static_cast<std::size_t>(s);
    DrawRecord d;
    d.sweep = tree_lines[us].at("sweep").get<int>();
    d.A = slice(A, us * M * K, M, K);
    d.Gamma = slice(G, us * M * Qq, M, Qq);
    d.q = slice(q, us * T * Qq, T, Qq);
    d.R = slice(R, us * T * Qq, T, Qq);
    d.Sigma = slice(Sg, us * T * M, T, M);
    d.loglik = slice(ll, us * T, 1, T).transpose();
    for (std::int64_t m = 0; m < M; ++m) {
      if (tvp) d.beta.push_back(slice(B, static_cast<std::size_t>((s * M + m) * T * K), T, K));
      d.loadings.push_back(slice(L, static_cast<std::size_t>((s * M + m) * K * Qb), K, Qb));
      d.process_var.push_back(slice(V, static_cast<std::size_t>((s * M + m) * K), 1, K).transpose());
    }
    for (const auto& fj : tree_lines[us].at("equations")) {
      std::vector<Ensemble> factors;
      for (const auto& ej : fj) factors.push_back(ensemble_from_json(ej));
      d.tvp_trees.push_back(std::move(factors));
    }
    post.draws.push_back(std::move(d));
  }

  const auto diag = nlohmann::json::parse(read_file((base / "diagnostics.json").string()));
  for (const auto& m : diag.at("tvp_tree_moves")) post.tvp_moves.push_back(moves_from_json(m));
  post.vol_moves = moves_from_json(diag.at("vol_tree_moves"));
  return run;
}

}  // namespace tvpbart
