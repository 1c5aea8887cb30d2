// File formats: panel CSV ingestion with per-column transformations, the JSON
// configuration, and the on-disk draw store with its manifest.
#pragma once

#include "tvpbart/core.hpp"
#include "tvpbart/sampler.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace tvpbart {

class IngestError : public Error {
 public:
  using Error::Error;
};

struct CsvTable {
  std::vector<std::string> columns;  // excluding the date column
  std::vector<std::string> dates;
  MatrixXd values;                   // NaN marks a missing cell
};

CsvTable read_csv(const std::string& path);
void write_csv(const std::string& path, const std::string& date_header, const std::vector<std::string>& columns,
               const std::vector<std::string>& dates, const MatrixXd& values);

enum class Transform { None, Yoy, YoyArith, Diff, Log };
Transform parse_transform(const std::string& name);
std::string transform_name(Transform t);

/// Applies a transformation; leading entries that are undefined become NaN.
/// yoy is 100 (log x_t - log x_{t-periods_per_year}); yoy_arith is the
/// arithmetic rate 100 (x_t / x_{t-periods_per_year} - 1).
VectorXd apply_transform(const VectorXd& x, Transform t, int periods_per_year);

/// Months between consecutive ISO dates, or an IngestError if they are not
/// evenly spaced.
int infer_step_months(const std::vector<std::string>& dates);

struct PanelSpec {
  std::string endogenous_path;
  std::string modifier_path;
  std::map<std::string, Transform> transforms;  // by column name; default None
  std::vector<std::string> variables;           // subset and order; empty = all
  std::vector<std::string> modifiers;           // subset and order; empty = all
};

/// Reads both files, transforms, aligns on common dates and drops the rows
/// lost to transformation. Any remaining missing value is an error.
Dataset load_panel(const PanelSpec& spec);

/// Writes Y and Z as two CSV files that load_panel reads back unchanged.
void write_dataset(const Dataset& data, const std::string& endogenous_path, const std::string& modifier_path);

ModelConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ModelConfig& c);
ModelConfig read_config(const std::string& path);

/// Git blob hash: SHA-1 of "blob <size>\0" followed by the content.
std::string git_blob_sha1(const std::string& content);
std::string file_sha1(const std::string& path);

/// Little-endian float64 array with a shape header.
void write_array(const std::string& path, const std::vector<std::int64_t>& dims, const std::vector<double>& data);
struct ArrayData {
  std::vector<std::int64_t> dims;
  std::vector<double> data;
};
ArrayData read_array(const std::string& path);

/// Metadata stored next to the draws.
struct RunInfo {
  std::vector<std::string> variable_names;
  std::vector<std::string> modifier_names;
  std::vector<std::string> dates;  // usable rows
  PanelSpec panel;                 // empty paths when data did not come from files
  std::string started;
  std::string finished;
};

inline constexpr const char* kSoftwareVersion = "tvpbart 1.0.0";

/// Writes the draw store into `dir` (created if missing) and returns the manifest.
nlohmann::json save_draws(const PosteriorDraws& post, const RunInfo& info, const std::string& dir);

struct StoredRun {
  PosteriorDraws post;
  RunInfo info;
  nlohmann::json manifest;
};

StoredRun load_draws(const std::string& dir);

/// Panel description recorded in a manifest.
PanelSpec panel_from_json(const nlohmann::json& j);
nlohmann::json panel_to_json(const PanelSpec& p);

std::string utc_timestamp();

}  // namespace tvpbart
