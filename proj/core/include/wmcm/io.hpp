#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "wmcm/simulation.hpp"
#include "wmcm/solver.hpp"
#include "wmcm/types.hpp"
#include "wmcm/weights.hpp"

namespace wmcm::io {

// ---------------------------------------------------------------------------
// CSV

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of `name` in the header, if present.
  std::optional<std::size_t> column(std::string_view name) const;
};

/// RFC 4180 parsing: comma separated, optional double-quoted fields with
/// "" escapes, LF or CRLF line ends. The first record is the header and
/// every record must have the header's width. `source` names the input in
/// error messages. Throws DataError.
CsvTable parse_csv(std::string_view text, const std::string& source = "<memory>");
CsvTable read_csv(const std::string& path);

std::string csv_escape(std::string_view field);
void write_csv(std::ostream& out, const CsvTable& table);
void write_csv_file(const std::string& path, const CsvTable& table);

// Shortest round-trip decimal form ('.' separator, locale independent);
// "nan", "inf" and "-inf" for non-finite values.
std::string format_double(double value);
// Strict parse of a whole field; std::nullopt when it is not a number.
std::optional<double> parse_double(std::string_view text);

// ---------------------------------------------------------------------------
// Datasets

struct CsvDatasetOptions {
  std::string covariates_path;
  std::string outcomes_path;
  // Looked up in the covariates file first, then in the outcomes file.
  std::string treatment_column;
  TreatmentCoding coding = TreatmentCoding::plus_minus_one;
  bool add_intercept = true;
  // Empty: every covariate-file column except treatment and propensity.
  std::vector<std::string> covariate_columns;
  // Empty: every outcome-file column except the treatment.
  std::vector<std::string> outcome_columns;
  std::optional<std::string> propensity_column;
  // Center and scale the non-intercept covariates before fitting.
  bool standardize = false;
};

struct LoadedDataset {
  Dataset data;
  std::vector<std::string> covariate_names;  // includes "(Intercept)" when added
  std::vector<std::string> outcome_names;
  bool standardized = false;
  Vector center;  // per raw covariate column, when standardized
  Vector scale;
};

LoadedDataset load_csv_dataset(const CsvDatasetOptions& options);

Dataset load_csv_dataset(const std::string& covariates_path,
                         const std::string& outcomes_path,
                         const std::string& treatment_column, TreatmentCoding coding,
                         bool add_intercept);

// ---------------------------------------------------------------------------
// Model artifact

inline constexpr int kModelSchemaVersion = 1;

struct ModelArtifact {
  FactorModel model;
  FitConfig config;
  PropensitySource propensity = PropensitySource::rct_half;
  std::vector<double> objective_trace;
  bool converged = false;
  int outer_iters = 0;
  std::vector<std::string> covariate_names;
  std::vector<std::string> outcome_names;
  bool standardized = false;
  Vector center;
  Vector scale;
};

// JSON document holding the config echo, W, V, the nonzero rows of C,
// Gamma = W V^T, the propensity source, the objective trace and the seed.
std::string serialize_model(const ModelArtifact& artifact);
// Throws DataError on malformed input or when the stored Gamma disagrees
// with W V^T by more than 1e-12.
ModelArtifact parse_model(std::string_view text);
void save_model(const ModelArtifact& artifact, const std::string& path);
ModelArtifact load_model(const std::string& path);

// ---------------------------------------------------------------------------
// Path diagram

struct DiagramNode {
  std::string id;
  std::string label;
  enum class Kind { covariate, factor, outcome } kind;
};

struct DiagramEdge {
  std::string from;
  std::string to;
  double weight;
};

struct PathDiagramGraph {
  std::vector<DiagramNode> nodes;
  std::vector<DiagramEdge> edges;
};

/// Covariates with a nonzero W row, the factors with a nonzero W column and
/// every outcome; edges covariate -> factor weighted by W and factor ->
/// outcome weighted by V, skipping exact zeros. Nodes keep input order.
PathDiagramGraph build_path_diagram(const FactorModel& model,
                                    const std::vector<std::string>& covariate_names,
                                    const std::vector<std::string>& outcome_names);

// Graphviz DOT text: left-to-right layers, labels rounded to 3 decimals,
// negative edges dashed, a sign="+"/"-" attribute on every edge.
std::string render_dot(const PathDiagramGraph& graph);

void export_path_diagram(const FactorModel& model,
                         const std::vector<std::string>& covariate_names,
                         const std::vector<std::string>& outcome_names,
                         const std::string& path);

// ---------------------------------------------------------------------------
// Replication tables and summaries

inline constexpr const char* kReplicationHeader[] = {"scenario_id", "replication",
                                                      "method", "metric", "value"};
inline constexpr const char* kSummaryHeader[] = {"scenario_id", "method", "metric", "n",
                                                  "n_missing", "median", "q1", "q3", "iqr"};

CsvTable replication_table(const std::vector<ReplicationRow>& rows);
// Validates the header and field types. Throws DataError.
std::vector<ReplicationRow> parse_replication_table(const CsvTable& table);

/// Median and interquartile range (linear-interpolation quartiles) per
/// (scenario_id, method, metric), in first-appearance order. NaN values are
/// counted in n_missing and excluded from the statistics.
CsvTable summarize(const std::vector<ReplicationRow>& rows);

// CV loss surface with columns lambda, phi, rank, fold, loss.
CsvTable cv_surface_table(const CvResult& result);

// Scenario specs from JSON: one object or an array of objects whose keys
// match the ScenarioSpec field names.
std::vector<ScenarioSpec> parse_scenarios(std::string_view text);
std::vector<ScenarioSpec> load_scenarios(const std::string& path);

// Reads a whole file; throws DataError when it cannot be opened.
std::string read_file(const std::string& path);
// Writes `text` to `path`; throws Error on I/O failure.
void write_file(const std::string& path, std::string_view text);

}  // namespace wmcm::io
