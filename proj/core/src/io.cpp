#include "wmcm/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "json.hpp"
#include "wmcm/error.hpp"

namespace wmcm::io {

using ojson = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Files

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path + "'");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// CSV

std::optional<std::size_t> CsvTable::column(std::string_view name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) return std::nullopt;
  return static_cast<std::size_t>(it - header.begin());
}

CsvTable parse_csv(std::string_view text, const std::string& source) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::size_t> lines;  // starting line of each record
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false, quoted = false, any = false;
  std::size_t line = 1, record_line = 1;

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    quoted = false;
  };
  auto end_record = [&] {
    end_field();
    const bool blank = record.size() == 1 && record[0].empty() && !any;
    if (!blank) {
      records.push_back(std::move(record));
      lines.push_back(record_line);
    }
    record.clear();
    any = false;
    record_line = line;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty() || quoted) {
          throw DataError(source + ": line " + std::to_string(line) +
                          ": unexpected quote inside unquoted field");
        }
        in_quotes = quoted = any = true;
        break;
      case ',':
        end_field();
        any = true;
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') break;
        [[fallthrough]];
      case '\n':
        ++line;
        end_record();
        break;
      default:
        if (quoted) {
          throw DataError(source + ": line " + std::to_string(line) +
                          ": characters after closing quote");
        }
        field.push_back(c);
        any = true;
    }
  }
  if (in_quotes) throw DataError(source + ": unterminated quoted field");
  if (any || !field.empty()) end_record();

  if (records.empty()) throw DataError(source + ": empty file, header expected");
  CsvTable table;
  table.header = std::move(records.front());
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != table.header.size()) {
      throw DataError(source + ": line " + std::to_string(lines[r]) + ": " +
                      std::to_string(records[r].size()) + " fields, header has " +
                      std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(records[r]));
  }
  return table;
}

CsvTable read_csv(const std::string& path) { return parse_csv(read_file(path), path); }

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_csv(std::ostream& out, const CsvTable& table) {
  auto line = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out << ',';
      out << csv_escape(fields[i]);
    }
    out << '\n';
  };
  line(table.header);
  for (const auto& row : table.rows) line(row);
}

void write_csv_file(const std::string& path, const CsvTable& table) {
  std::ostringstream ss;
  write_csv(ss, table);
  write_file(path, ss.str());
}

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

std::optional<double> parse_double(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t')) text.remove_suffix(1);
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

// ---------------------------------------------------------------------------
// Datasets

namespace {

struct ColumnRef {
  const CsvTable* table;
  std::size_t index;
  const std::string* file;
};

double cell_value(const ColumnRef& col, std::size_t row) {
  const std::string& text = col.table->rows[row][col.index];
  const auto v = parse_double(text);
  if (!v) {
    throw DataError(*col.file + ": line " + std::to_string(row + 2) + ", column '" +
                    col.table->header[col.index] + "': cannot parse '" + text + "'");
  }
  return *v;
}

}  // namespace

LoadedDataset load_csv_dataset(const CsvDatasetOptions& options) {
  const CsvTable cov = read_csv(options.covariates_path);
  const CsvTable out = read_csv(options.outcomes_path);
  if (cov.rows.size() != out.rows.size()) {
    throw DataError("row count mismatch: " + options.covariates_path + " has " +
                    std::to_string(cov.rows.size()) + " rows, " + options.outcomes_path +
                    " has " + std::to_string(out.rows.size()));
  }
  const std::size_t n = cov.rows.size();

  auto locate = [&](const std::string& name) -> std::optional<ColumnRef> {
    if (auto i = cov.column(name)) return ColumnRef{&cov, *i, &options.covariates_path};
    if (auto i = out.column(name)) return ColumnRef{&out, *i, &options.outcomes_path};
    return std::nullopt;
  };
  auto require = [&](const std::string& name) {
    auto ref = locate(name);
    if (!ref) throw DataError("missing column '" + name + "'");
    return *ref;
  };

  const ColumnRef treat = require(options.treatment_column);
  std::optional<ColumnRef> prop;
  if (options.propensity_column) prop = require(*options.propensity_column);

  std::set<std::string> reserved{options.treatment_column};
  if (options.propensity_column) reserved.insert(*options.propensity_column);

  std::vector<ColumnRef> xcols, ycols;
  LoadedDataset loaded;
  if (options.covariate_columns.empty()) {
    for (std::size_t j = 0; j < cov.header.size(); ++j) {
      if (reserved.count(cov.header[j])) continue;
      xcols.push_back({&cov, j, &options.covariates_path});
      loaded.covariate_names.push_back(cov.header[j]);
    }
  } else {
    for (const auto& name : options.covariate_columns) {
      auto i = cov.column(name);
      if (!i) throw DataError("missing column '" + name + "' in " + options.covariates_path);
      xcols.push_back({&cov, *i, &options.covariates_path});
      loaded.covariate_names.push_back(name);
    }
  }
  if (options.outcome_columns.empty()) {
    for (std::size_t j = 0; j < out.header.size(); ++j) {
      if (reserved.count(out.header[j])) continue;
      ycols.push_back({&out, j, &options.outcomes_path});
      loaded.outcome_names.push_back(out.header[j]);
    }
  } else {
    for (const auto& name : options.outcome_columns) {
      auto i = out.column(name);
      if (!i) throw DataError("missing column '" + name + "' in " + options.outcomes_path);
      ycols.push_back({&out, *i, &options.outcomes_path});
      loaded.outcome_names.push_back(name);
    }
  }
  if (ycols.empty()) throw DataError("no outcome columns");

  Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(xcols.size()));
  Matrix y(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(ycols.size()));
  IntVector t(static_cast<Eigen::Index>(n));
  std::optional<Vector> pi;
  if (prop) pi = Vector(static_cast<Eigen::Index>(n));

  const bool zero_one = options.coding == TreatmentCoding::zero_one;
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (std::size_t j = 0; j < xcols.size(); ++j)
      x(r, static_cast<Eigen::Index>(j)) = cell_value(xcols[j], i);
    for (std::size_t j = 0; j < ycols.size(); ++j)
      y(r, static_cast<Eigen::Index>(j)) = cell_value(ycols[j], i);
    const double tv = cell_value(treat, i);
    const bool ok = zero_one ? (tv == 0.0 || tv == 1.0) : (tv == -1.0 || tv == 1.0);
    if (!ok) {
      throw DataError(*treat.file + ": line " + std::to_string(i + 2) + ", column '" +
                      options.treatment_column + "': treatment value '" +
                      treat.table->rows[i][treat.index] + "' outside coding set " +
                      (zero_one ? "{0,1}" : "{-1,1}"));
    }
    t(r) = static_cast<int>(tv);
    if (prop) (*pi)(r) = cell_value(*prop, i);
  }

  if (options.standardize && x.cols() > 0) {
    loaded.standardized = true;
    loaded.center = x.colwise().mean().transpose();
    loaded.scale.resize(x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double denom = std::max<double>(1.0, static_cast<double>(n) - 1.0);
      const double sd =
          std::sqrt((x.col(j).array() - loaded.center(j)).square().sum() / denom);
      loaded.scale(j) = sd > 0.0 ? sd : 1.0;
      x.col(j) = (x.col(j).array() - loaded.center(j)) / loaded.scale(j);
    }
  }

  ValidateOptions vo;
  vo.add_intercept = options.add_intercept;
  vo.coding = options.coding;
  loaded.data = validate_dataset(x, y, t, pi, vo);
  if (options.add_intercept) {
    loaded.covariate_names.insert(loaded.covariate_names.begin(), "(Intercept)");
  }
  return loaded;
}

Dataset load_csv_dataset(const std::string& covariates_path,
                         const std::string& outcomes_path,
                         const std::string& treatment_column, TreatmentCoding coding,
                         bool add_intercept) {
  CsvDatasetOptions o;
  o.covariates_path = covariates_path;
  o.outcomes_path = outcomes_path;
  o.treatment_column = treatment_column;
  o.coding = coding;
  o.add_intercept = add_intercept;
  return load_csv_dataset(o).data;
}

// ---------------------------------------------------------------------------
// Model artifact

namespace {

ojson matrix_rows(const Matrix& m) {
  ojson rows = ojson::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    ojson row = ojson::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

ojson vector_json(const Vector& v) {
  ojson out = ojson::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Matrix matrix_from(const ojson& rows, Eigen::Index nrows, Eigen::Index ncols,
                   const char* name) {
  if (!rows.is_array() || static_cast<Eigen::Index>(rows.size()) != nrows) {
    throw DataError(std::string("model file: '") + name + "' has the wrong number of rows");
  }
  Matrix m(nrows, ncols);
  for (Eigen::Index i = 0; i < nrows; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != ncols) {
      throw DataError(std::string("model file: '") + name + "' row " + std::to_string(i) +
                      " has the wrong width");
    }
    for (Eigen::Index j = 0; j < ncols; ++j) m(i, j) = row[static_cast<std::size_t>(j)].get<double>();
  }
  return m;
}

Vector vector_from(const ojson& arr, const char* name) {
  if (!arr.is_array()) throw DataError(std::string("model file: '") + name + "' is not an array");
  Vector v(static_cast<Eigen::Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i) v(static_cast<Eigen::Index>(i)) = arr[i].get<double>();
  return v;
}

ojson penalty_json(double v) { return std::isinf(v) ? ojson("inf") : ojson(v); }

double penalty_from(const ojson& j) {
  if (j.is_string() && j.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
  return j.get<double>();
}

}  // namespace

std::string serialize_model(const ModelArtifact& a) {
  const FactorModel& m = a.model;
  ojson doc;
  doc["schema_version"] = kModelSchemaVersion;
  doc["config"] = {
      {"rank", a.config.rank},
      {"lambda_w", penalty_json(a.config.lambda_w)},
      {"phi_c", penalty_json(a.config.phi_c)},
      {"outer_tol", a.config.outer_tol},
      {"inner_tol", a.config.inner_tol},
      {"max_outer", a.config.max_outer},
      {"max_inner", a.config.max_inner},
      {"init", a.config.init == Initialization::random ? "random" : "weighted_ls"},
  };
  doc["seed"] = a.config.seed;
  doc["dimensions"] = {{"n", m.c.rows()}, {"columns", m.w.rows()}, {"q", m.v.rows()},
                       {"rank", m.w.cols()}};
  doc["propensity_source"] = std::string(to_string(a.propensity));
  doc["standardized"] = a.standardized;
  if (a.standardized) {
    doc["center"] = vector_json(a.center);
    doc["scale"] = vector_json(a.scale);
  }
  doc["covariate_names"] = a.covariate_names;
  doc["outcome_names"] = a.outcome_names;
  doc["W"] = matrix_rows(m.w);
  doc["V"] = matrix_rows(m.v);
  ojson c = ojson::array();
  for (Eigen::Index i = 0; i < m.c.rows(); ++i) {
    if ((m.c.row(i).array() == 0.0).all()) continue;
    ojson values = ojson::array();
    for (Eigen::Index j = 0; j < m.c.cols(); ++j) values.push_back(m.c(i, j));
    c.push_back({{"row", i}, {"values", std::move(values)}});
  }
  doc["C"] = std::move(c);
  doc["gamma"] = matrix_rows(m.gamma());
  doc["objective_trace"] = a.objective_trace;
  doc["converged"] = a.converged;
  doc["outer_iters"] = a.outer_iters;
  return doc.dump(2) + "\n";
}

ModelArtifact parse_model(std::string_view text) {
  try {
    const ojson doc = ojson::parse(text);
    if (doc.at("schema_version").get<int>() != kModelSchemaVersion) {
      throw DataError("model file: unsupported schema_version");
    }
    ModelArtifact a;
    const ojson& cfg = doc.at("config");
    a.config.rank = cfg.at("rank").get<int>();
    a.config.lambda_w = penalty_from(cfg.at("lambda_w"));
    a.config.phi_c = penalty_from(cfg.at("phi_c"));
    a.config.outer_tol = cfg.at("outer_tol").get<double>();
    a.config.inner_tol = cfg.at("inner_tol").get<double>();
    a.config.max_outer = cfg.at("max_outer").get<int>();
    a.config.max_inner = cfg.at("max_inner").get<int>();
    a.config.init = cfg.at("init").get<std::string>() == "random" ? Initialization::random
                                                                  : Initialization::weighted_ls;
    a.config.seed = doc.at("seed").get<std::uint64_t>();
    const ojson& dims = doc.at("dimensions");
    const auto n = dims.at("n").get<Eigen::Index>();
    const auto cols = dims.at("columns").get<Eigen::Index>();
    const auto q = dims.at("q").get<Eigen::Index>();
    const auto r = dims.at("rank").get<Eigen::Index>();
    a.propensity = propensity_source_from_string(doc.at("propensity_source").get<std::string>());
    a.standardized = doc.at("standardized").get<bool>();
    if (a.standardized) {
      a.center = vector_from(doc.at("center"), "center");
      a.scale = vector_from(doc.at("scale"), "scale");
    }
    a.covariate_names = doc.at("covariate_names").get<std::vector<std::string>>();
    a.outcome_names = doc.at("outcome_names").get<std::vector<std::string>>();
    a.model.w = matrix_from(doc.at("W"), cols, r, "W");
    a.model.v = matrix_from(doc.at("V"), q, r, "V");
    a.model.c = Matrix::Zero(n, q);
    for (const auto& entry : doc.at("C")) {
      const auto row = entry.at("row").get<Eigen::Index>();
      if (row < 0 || row >= n) throw DataError("model file: C row index out of range");
      const Vector values = vector_from(entry.at("values"), "C values");
      if (values.size() != q) throw DataError("model file: C row has the wrong width");
      a.model.c.row(row) = values.transpose();
    }
    const Matrix gamma = matrix_from(doc.at("gamma"), cols, q, "gamma");
    const Matrix recomputed = a.model.gamma();
    const double tol = 1e-12 * std::max(1.0, recomputed.cwiseAbs().maxCoeff());
    if ((gamma - recomputed).cwiseAbs().maxCoeff() > tol) {
      throw DataError("model file: stored gamma disagrees with W V^T");
    }
    a.objective_trace = doc.at("objective_trace").get<std::vector<double>>();
    a.converged = doc.at("converged").get<bool>();
    a.outer_iters = doc.at("outer_iters").get<int>();
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("model file: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw DataError(std::string("model file: ") + e.what());
  }
}

void save_model(const ModelArtifact& artifact, const std::string& path) {
  write_file(path, serialize_model(artifact));
}

ModelArtifact load_model(const std::string& path) { return parse_model(read_file(path)); }

// ---------------------------------------------------------------------------
// Path diagram

PathDiagramGraph build_path_diagram(const FactorModel& model,
                                    const std::vector<std::string>& covariate_names,
                                    const std::vector<std::string>& outcome_names) {
  if (static_cast<Eigen::Index>(covariate_names.size()) != model.w.rows() ||
      static_cast<Eigen::Index>(outcome_names.size()) != model.v.rows()) {
    throw InvalidArgument("path diagram: name lists do not match the model dimensions");
  }
  PathDiagramGraph graph;
  const auto cov_id = [](Eigen::Index j) { return "x" + std::to_string(j); };
  const auto fac_id = [](Eigen::Index k) { return "f" + std::to_string(k + 1); };
  const auto out_id = [](Eigen::Index m) { return "y" + std::to_string(m); };

  std::vector<bool> active_factor(static_cast<std::size_t>(model.w.cols()));
  for (Eigen::Index k = 0; k < model.w.cols(); ++k)
    active_factor[static_cast<std::size_t>(k)] = (model.w.col(k).array() != 0.0).any();

  for (Eigen::Index j = 0; j < model.w.rows(); ++j) {
    if ((model.w.row(j).array() == 0.0).all()) continue;
    graph.nodes.push_back({cov_id(j), covariate_names[static_cast<std::size_t>(j)],
                           DiagramNode::Kind::covariate});
    for (Eigen::Index k = 0; k < model.w.cols(); ++k)
      if (model.w(j, k) != 0.0) graph.edges.push_back({cov_id(j), fac_id(k), model.w(j, k)});
  }
  for (Eigen::Index k = 0; k < model.w.cols(); ++k) {
    if (!active_factor[static_cast<std::size_t>(k)]) continue;
    graph.nodes.push_back({fac_id(k), "Factor " + std::to_string(k + 1),
                           DiagramNode::Kind::factor});
    for (Eigen::Index m = 0; m < model.v.rows(); ++m)
      if (model.v(m, k) != 0.0) graph.edges.push_back({fac_id(k), out_id(m), model.v(m, k)});
  }
  for (Eigen::Index m = 0; m < model.v.rows(); ++m) {
    graph.nodes.push_back({out_id(m), outcome_names[static_cast<std::size_t>(m)],
                           DiagramNode::Kind::outcome});
  }
  return graph;
}

namespace {

std::string dot_quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string fixed3(double v) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << std::fixed << std::setprecision(3) << v;
  std::string s = os.str();
  if (s == "-0.000") s = "0.000";
  return s;
}

}  // namespace

std::string render_dot(const PathDiagramGraph& graph) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << "digraph path_diagram {\n";
  os << "  rankdir=LR;\n";
  os << "  node [fontname=\"Helvetica\"];\n";
  const std::pair<DiagramNode::Kind, const char*> layers[] = {
      {DiagramNode::Kind::covariate, "box"},
      {DiagramNode::Kind::factor, "ellipse"},
      {DiagramNode::Kind::outcome, "box"}};
  for (const auto& [kind, shape] : layers) {
    os << "  { rank=same;";
    for (const auto& node : graph.nodes)
      if (node.kind == kind) os << ' ' << dot_quote(node.id) << ';';
    os << " }\n";
    for (const auto& node : graph.nodes)
      if (node.kind == kind) {
        os << "  " << dot_quote(node.id) << " [label=" << dot_quote(node.label)
           << ", shape=" << shape << "];\n";
      }
  }
  for (const auto& e : graph.edges) {
    const bool negative = e.weight < 0.0;
    os << "  " << dot_quote(e.from) << " -> " << dot_quote(e.to) << " [label=\""
       << fixed3(e.weight) << "\", sign=\"" << (negative ? '-' : '+') << "\", style="
       << (negative ? "dashed" : "solid") << "];\n";
  }
  os << "}\n";
  return os.str();
}

void export_path_diagram(const FactorModel& model,
                         const std::vector<std::string>& covariate_names,
                         const std::vector<std::string>& outcome_names,
                         const std::string& path) {
  write_file(path, render_dot(build_path_diagram(model, covariate_names, outcome_names)));
}

// ---------------------------------------------------------------------------
// Replication tables

CsvTable replication_table(const std::vector<ReplicationRow>& rows) {
  CsvTable t;
  t.header.assign(std::begin(kReplicationHeader), std::end(kReplicationHeader));
  for (const auto& r : rows) {
    t.rows.push_back({r.scenario_id, std::to_string(r.replication), r.method, r.metric,
                      format_double(r.value)});
  }
  return t;
}

std::vector<ReplicationRow> parse_replication_table(const CsvTable& table) {
  const std::vector<std::string> expected(std::begin(kReplicationHeader),
                                          std::end(kReplicationHeader));
  if (table.header != expected) {
    throw DataError("replication table: header must be scenario_id,replication,method,metric,value");
  }
  std::vector<ReplicationRow> rows;
  rows.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& f = table.rows[i];
    ReplicationRow r;
    r.scenario_id = f[0];
    int rep = 0;
    const auto res = std::from_chars(f[1].data(), f[1].data() + f[1].size(), rep);
    if (res.ec != std::errc() || res.ptr != f[1].data() + f[1].size()) {
      throw DataError("replication table: line " + std::to_string(i + 2) +
                      ": replication is not an integer");
    }
    r.replication = rep;
    r.method = f[2];
    r.metric = f[3];
    const auto v = parse_double(f[4]);
    if (!v) {
      throw DataError("replication table: line " + std::to_string(i + 2) +
                      ": value is not a number");
    }
    r.value = *v;
    rows.push_back(std::move(r));
  }
  return rows;
}

namespace {

double quantile(const std::vector<double>& sorted, double prob) {
  if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

CsvTable summarize(const std::vector<ReplicationRow>& rows) {
  using Key = std::tuple<std::string, std::string, std::string>;
  std::vector<Key> order;
  std::map<Key, std::pair<std::vector<double>, int>> groups;
  for (const auto& r : rows) {
    Key key{r.scenario_id, r.method, r.metric};
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) order.push_back(key);
    if (std::isnan(r.value)) {
      ++it->second.second;
    } else {
      it->second.first.push_back(r.value);
    }
  }
  CsvTable t;
  t.header.assign(std::begin(kSummaryHeader), std::end(kSummaryHeader));
  for (const auto& key : order) {
    auto& [values, missing] = groups[key];
    std::sort(values.begin(), values.end());
    const double q1 = quantile(values, 0.25), q3 = quantile(values, 0.75);
    t.rows.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key),
                      std::to_string(values.size()), std::to_string(missing),
                      format_double(quantile(values, 0.5)), format_double(q1),
                      format_double(q3), format_double(q3 - q1)});
  }
  return t;
}

CsvTable cv_surface_table(const CvResult& res) {
  CsvTable t;
  t.header = {"lambda", "phi", "rank", "fold", "loss"};
  const auto& g = res.grid;
  for (std::size_t il = 0; il < g.lambdas.size(); ++il)
    for (std::size_t ip = 0; ip < g.phis.size(); ++ip)
      for (std::size_t ir = 0; ir < g.ranks.size(); ++ir)
        for (int f = 0; f < g.folds; ++f) {
          t.rows.push_back({format_double(g.lambdas[il]), format_double(g.phis[ip]),
                            std::to_string(g.ranks[ir]), std::to_string(f),
                            format_double(res.fold_at(il, ip, ir, static_cast<std::size_t>(f)))});
        }
  return t;
}

// ---------------------------------------------------------------------------
// Scenario configs

namespace {

ScenarioSpec scenario_from_json(const ojson& j) {
  static const std::set<std::string> known{
      "scenario_id", "p", "g", "tau_pct", "b", "gamma_scenario", "z", "design", "n",
      "n_test", "q", "replications", "seed", "factor_low", "factor_high", "custom_design"};
  if (!j.is_object()) throw DataError("scenario config: expected an object");
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw DataError("scenario config: unknown key '" + key + "'");
  }
  ScenarioSpec s;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("scenario_id", s.scenario_id);
  get("p", s.p);
  get("g", s.g);
  get("tau_pct", s.tau_pct);
  get("b", s.b);
  get("gamma_scenario", s.gamma_scenario);
  get("z", s.z);
  if (j.contains("design")) s.design = design_from_string(j.at("design").get<std::string>());
  get("n", s.n);
  get("n_test", s.n_test);
  get("q", s.q);
  get("replications", s.replications);
  get("seed", s.seed);
  get("factor_low", s.factor_low);
  get("factor_high", s.factor_high);
  get("custom_design", s.custom_design);
  return s;
}

}  // namespace

std::vector<ScenarioSpec> parse_scenarios(std::string_view text) {
  try {
    const ojson doc = ojson::parse(text);
    std::vector<ScenarioSpec> specs;
    if (doc.is_array()) {
      for (const auto& item : doc) specs.push_back(scenario_from_json(item));
    } else {
      specs.push_back(scenario_from_json(doc));
    }
    if (specs.empty()) throw DataError("scenario config: no scenarios");
    return specs;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("scenario config: ") + e.what());
  }
}

std::vector<ScenarioSpec> load_scenarios(const std::string& path) {
  return parse_scenarios(read_file(path));
}

}  // namespace wmcm::io
