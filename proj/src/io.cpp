#include "rejectkit/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "rejectkit/rng.hpp"

namespace rejectkit {

using ordered_json = nlohmann::ordered_json;

FileFormat format_from_string(const std::string& s) {
  if (s == "csv") return FileFormat::csv;
  if (s == "jsonl") return FileFormat::jsonl;
  throw Error(ErrorCode::invalid_config, "unknown format: " + s);
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string format_double_17(double v) {
  char buf[64];
  auto res =
      std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

double parse_double(const std::string& s, std::size_t line_no,
                    const std::string& what) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last)
    throw Error(ErrorCode::parse_error,
                "line " + std::to_string(line_no) + ": cannot parse " + what +
                    " from '" + s + "'");
  return v;
}

long parse_int(const std::string& s, std::size_t line_no,
               const std::string& what) {
  long v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw Error(ErrorCode::parse_error,
                "line " + std::to_string(line_no) + ": cannot parse " + what +
                    " from '" + s + "'");
  return v;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

// Re-raise validation issues with the line each offending record came from.
void raise_with_lines(
    const std::vector<ValidationIssue>& issues,
    const std::vector<PredictionRecord>& records,
    const std::vector<std::size_t>& record_lines) {
  if (issues.empty()) return;
  std::unordered_map<std::string, std::vector<std::size_t>> lines_by_id;
  for (std::size_t i = 0; i < records.size(); ++i)
    lines_by_id[records[i].sample_id].push_back(record_lines[i]);
  std::ostringstream msg;
  msg << issues.size() << " validation issue(s): ";
  const std::size_t shown = std::min<std::size_t>(issues.size(), 10);
  for (std::size_t i = 0; i < shown; ++i) {
    if (i) msg << "; ";
    const auto& lines = lines_by_id[issues[i].sample_id];
    const std::size_t line =
        issues[i].code == ErrorCode::duplicate_id && lines.size() > 1
            ? lines[1]
            : lines.front();
    msg << "line " << line << ": " << issues[i].to_string();
  }
  if (issues.size() > shown) msg << "; ... (" << issues.size() - shown << " more)";
  throw Error(issues.front().code, msg.str());
}

ScoreTable read_scores_csv(std::istream& in, const ClassSchema& schema) {
  std::string line;
  if (!std::getline(in, line))
    throw Error(ErrorCode::parse_error, "line 1: empty score file");
  const auto header = split_csv_line(strip_cr(line));
  auto column = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw Error(ErrorCode::missing_column, "missing column: " + name);
    return static_cast<std::size_t>(it - header.begin());
  };

  const std::size_t k = schema.n_classes();
  const std::size_t id_col = column("sample_id");
  const std::size_t source_col = column("source");
  std::vector<std::size_t> prob_cols(k), label_cols(k);
  for (std::size_t c = 0; c < k; ++c) {
    prob_cols[c] = column("prob_" + schema.class_names[c]);
    label_cols[c] = column("label_" + schema.class_names[c]);
  }

  std::vector<PredictionRecord> records;
  std::vector<std::size_t> record_lines;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw Error(ErrorCode::parse_error,
                  "line " + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " fields, got " +
                      std::to_string(fields.size()));
    PredictionRecord rec;
    rec.sample_id = fields[id_col];
    rec.source = fields[source_col];
    rec.probs.resize(k);
    rec.labels.resize(k);
    for (std::size_t c = 0; c < k; ++c) {
      rec.probs[c] = parse_double(fields[prob_cols[c]], line_no,
                                  "prob_" + schema.class_names[c]);
      const long lab = parse_int(fields[label_cols[c]], line_no,
                                 "label_" + schema.class_names[c]);
      rec.labels[c] = static_cast<std::uint8_t>(
          lab >= 0 && lab <= 255 ? lab : 255);  // caught as LABEL_NOT_BINARY
    }
    records.push_back(std::move(rec));
    record_lines.push_back(line_no);
  }

  raise_with_lines(validate_table(records, schema), records, record_lines);
  return ScoreTable{schema, std::move(records)};
}

ScoreTable read_scores_jsonl(std::istream& in, const ClassSchema& schema) {
  const std::size_t k = schema.n_classes();
  std::vector<PredictionRecord> records;
  std::vector<std::size_t> record_lines;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    ordered_json row;
    try {
      row = ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::parse_error,
                  "line " + std::to_string(line_no) + ": " + e.what());
    }
    for (const char* field : {"id", "source", "probs", "labels"}) {
      if (!row.contains(field))
        throw Error(ErrorCode::missing_column,
                    "line " + std::to_string(line_no) + ": missing field '" +
                        field + "'");
    }
    PredictionRecord rec;
    try {
      rec.sample_id = row["id"].get<std::string>();
      rec.source = row["source"].get<std::string>();
      const auto& probs = row["probs"];
      const auto& labels = row["labels"];
      if (probs.size() != k || labels.size() != k)
        throw Error(ErrorCode::length_mismatch,
                    "line " + std::to_string(line_no) + ": expected " +
                        std::to_string(k) + " classes, got " +
                        std::to_string(probs.size()) + " probs / " +
                        std::to_string(labels.size()) + " labels");
      rec.probs.resize(k);
      rec.labels.resize(k);
      for (std::size_t c = 0; c < k; ++c) {
        const auto& name = schema.class_names[c];
        if (!probs.contains(name) || !labels.contains(name))
          throw Error(ErrorCode::length_mismatch,
                      "line " + std::to_string(line_no) +
                          ": probs/labels map lacks class '" + name + "'");
        rec.probs[c] = probs[name].get<double>();
        const long lab = labels[name].get<long>();
        rec.labels[c] =
            static_cast<std::uint8_t>(lab >= 0 && lab <= 255 ? lab : 255);
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::parse_error,
                  "line " + std::to_string(line_no) + ": " + e.what());
    }
    records.push_back(std::move(rec));
    record_lines.push_back(line_no);
  }
  raise_with_lines(validate_table(records, schema), records, record_lines);
  return ScoreTable{schema, std::move(records)};
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw Error(ErrorCode::io_error, "cannot open file: " + path);
  return in;
}

}  // namespace

ScoreTable read_scores(std::istream& in, FileFormat format,
                       const ClassSchema& schema) {
  schema.validate();
  return format == FileFormat::csv ? read_scores_csv(in, schema)
                                   : read_scores_jsonl(in, schema);
}

ScoreTable read_scores(const std::string& path, FileFormat format,
                       const ClassSchema& schema) {
  auto in = open_input(path);
  return read_scores(in, format, schema);
}

ClassSchema infer_schema(const std::string& path, FileFormat format,
                         double theta) {
  auto in = open_input(path);
  ClassSchema schema;
  schema.theta = theta;
  std::string line;
  if (!std::getline(in, line))
    throw Error(ErrorCode::parse_error, "line 1: empty score file");
  line = strip_cr(line);
  if (format == FileFormat::csv) {
    for (const auto& col : split_csv_line(line)) {
      if (col.rfind("prob_", 0) == 0)
        schema.class_names.push_back(col.substr(5));
    }
  } else {
    ordered_json row;
    try {
      row = ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::parse_error, std::string("line 1: ") + e.what());
    }
    if (!row.contains("probs"))
      throw Error(ErrorCode::missing_column, "line 1: missing field 'probs'");
    for (const auto& item : row["probs"].items())
      schema.class_names.push_back(item.key());
  }
  if (schema.class_names.empty())
    throw Error(ErrorCode::missing_column, "no prob_<class> columns found");
  schema.validate();
  return schema;
}

void write_scores(std::ostream& out, const ScoreTable& table,
                  FileFormat format) {
  const auto& names = table.schema.class_names;
  if (format == FileFormat::csv) {
    out << "sample_id,source";
    for (const auto& n : names) out << ",prob_" << n;
    for (const auto& n : names) out << ",label_" << n;
    out << "\n";
    for (const auto& rec : table.records) {
      out << rec.sample_id << ',' << rec.source;
      for (double p : rec.probs) out << ',' << format_double_17(p);
      for (auto l : rec.labels) out << ',' << int(l);
      out << "\n";
    }
  } else {
    // Hand-assembled so probabilities keep 17 significant digits; nlohmann
    // would emit the shortest round-trip form instead.
    for (const auto& rec : table.records) {
      out << "{\"id\":" << ordered_json(rec.sample_id).dump()
          << ",\"source\":" << ordered_json(rec.source).dump() << ",\"probs\":{";
      for (std::size_t c = 0; c < names.size(); ++c) {
        if (c) out << ',';
        out << ordered_json(names[c]).dump() << ':'
            << format_double_17(rec.probs[c]);
      }
      out << "},\"labels\":{";
      for (std::size_t c = 0; c < names.size(); ++c) {
        if (c) out << ',';
        out << ordered_json(names[c]).dump() << ':' << int(rec.labels[c]);
      }
      out << "}}\n";
    }
  }
}

void write_scores(const std::string& path, const ScoreTable& table,
                  FileFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io_error, "cannot write file: " + path);
  write_scores(out, table, format);
}

void write_mask_csv(std::ostream& out, const ScoreTable& table,
                    const SelectionMask& mask) {
  out << "sample_id";
  for (const auto& n : table.schema.class_names) out << ",accept_" << n;
  out << ",image_accepted\n";
  for (std::size_t i = 0; i < table.n_samples(); ++i) {
    out << table.records[i].sample_id;
    for (std::size_t c = 0; c < mask.n_classes; ++c)
      out << ',' << (mask.cell(i, c) ? 1 : 0);
    out << ',' << (mask.image_accepted(i) ? 1 : 0) << "\n";
  }
}

std::string artifact_to_json(const ThresholdArtifact& a) {
  ordered_json j;
  j["mechanism"] = to_string(a.mechanism);
  j["scope"] = to_string(a.scope);
  j["mode"] = to_string(a.mode);
  j["theta"] = a.theta;
  j["epsilon"] = a.epsilon;
  j["classes"] = a.class_names;
  if (a.scope == Scope::global) {
    j["percentile"] = a.percentiles.at(0);
    j["thresholds"] = a.thresholds.at(0);
  } else {
    ordered_json qs, ts;
    for (std::size_t c = 0; c < a.class_names.size(); ++c) {
      qs[a.class_names[c]] = a.percentiles.at(c);
      ts[a.class_names[c]] = a.thresholds.at(c);
    }
    j["percentile"] = std::move(qs);
    j["thresholds"] = std::move(ts);
  }
  j["flags"] = a.flags;
  j["calibration_fingerprint"] = {{"n_records", a.n_calibration_records},
                                  {"schema_hash", a.schema_hash}};
  return j.dump(2) + "\n";
}

ThresholdArtifact artifact_from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse_error,
                std::string("bad artifact JSON: ") + e.what());
  }
  ThresholdArtifact a;
  try {
    a.mechanism = mechanism_from_string(j.at("mechanism").get<std::string>());
    a.scope = scope_from_string(j.at("scope").get<std::string>());
    a.mode = mode_from_string(j.at("mode").get<std::string>());
    a.theta = j.at("theta").get<double>();
    a.epsilon = j.at("epsilon").get<double>();
    a.class_names = j.at("classes").get<std::vector<std::string>>();
    if (a.scope == Scope::global) {
      a.percentiles = {j.at("percentile").get<double>()};
      a.thresholds = {j.at("thresholds").get<double>()};
    } else {
      for (const auto& name : a.class_names) {
        a.percentiles.push_back(j.at("percentile").at(name).get<double>());
        a.thresholds.push_back(j.at("thresholds").at(name).get<double>());
      }
    }
    a.flags = j.at("flags").get<std::vector<std::string>>();
    a.n_calibration_records =
        j.at("calibration_fingerprint").at("n_records").get<std::uint64_t>();
    a.schema_hash =
        j.at("calibration_fingerprint").at("schema_hash").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse_error,
                std::string("bad artifact JSON: ") + e.what());
  }
  a.validate();
  return a;
}

void write_artifact(const std::string& path, const ThresholdArtifact& a) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io_error, "cannot write file: " + path);
  out << artifact_to_json(a);
}

ThresholdArtifact read_artifact(const std::string& path) {
  auto in = open_input(path);
  std::stringstream buf;
  buf << in.rdbuf();
  return artifact_from_json(buf.str());
}

namespace {
std::string opt_field(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}
}  // namespace

void write_sweep_csv(std::ostream& out,
                     const std::vector<RiskCoveragePoint>& sweep,
                     const std::vector<std::string>& class_names) {
  out << "percentile,coverage,rejection_rate,mean_auc,n_excluded_classes";
  for (const auto& n : class_names) out << ",threshold_" << n;
  for (const auto& n : class_names) out << ",auc_" << n;
  for (const auto& n : class_names) out << ",f1_" << n;
  for (const auto& n : class_names) out << ",rejection_" << n;
  out << "\n";
  for (const auto& p : sweep) {
    out << opt_field(p.percentile) << ',' << format_double(p.coverage) << ','
        << format_double(p.rejection_rate) << ',' << opt_field(p.mean_auc)
        << ',' << p.n_excluded_classes;
    for (std::size_t c = 0; c < class_names.size(); ++c) {
      if (p.thresholds.empty())
        out << ',';
      else
        out << ','
            << format_double(p.thresholds.size() == 1 ? p.thresholds[0]
                                                      : p.thresholds[c]);
    }
    for (std::size_t c = 0; c < class_names.size(); ++c)
      out << ',' << opt_field(p.auc_per_class[c]);
    for (std::size_t c = 0; c < class_names.size(); ++c)
      out << ',' << opt_field(p.f1_per_class[c]);
    for (std::size_t c = 0; c < class_names.size(); ++c)
      out << ',' << format_double(p.class_rejection_rates[c]);
    out << "\n";
  }
}

namespace {
ordered_json cell_to_json(const CellReport& cell) {
  auto opt = [](const std::optional<double>& v) {
    return v ? ordered_json(*v) : ordered_json(nullptr);
  };
  ordered_json j;
  j["threshold"] = cell.threshold;
  j["auc_baseline"] = opt(cell.auc_baseline);
  j["auc_selective"] = opt(cell.auc_selective);
  j["f1_baseline"] = opt(cell.f1_baseline);
  j["f1_selective"] = opt(cell.f1_selective);
  j["rejection_rate"] = cell.rejection_rate;
  j["n_total"] = cell.n_total;
  j["n_retained"] = cell.n_retained;
  return j;
}
}  // namespace

std::string report_to_json(const EvaluationReport& report) {
  ordered_json j;
  j["schema"] = {{"classes", report.schema.class_names},
                 {"theta", report.schema.theta}};
  ordered_json per_source;
  for (std::size_t s = 0; s < report.sources.size(); ++s) {
    ordered_json by_class;
    for (std::size_t c = 0; c < report.schema.class_names.size(); ++c)
      by_class[report.schema.class_names[c]] =
          cell_to_json(report.cells[s][c]);
    per_source[report.sources[s]] = std::move(by_class);
  }
  j["per_source"] = std::move(per_source);
  ordered_json per_class;
  for (std::size_t c = 0; c < report.schema.class_names.size(); ++c)
    per_class[report.schema.class_names[c]] =
        cell_to_json(report.per_class[c]);
  j["per_class"] = std::move(per_class);
  ordered_json avg = cell_to_json(report.average);
  avg.erase("threshold");
  j["average_over_classes"] = std::move(avg);
  return j.dump(2) + "\n";
}

void write_report_csv(std::ostream& out, const EvaluationReport& report) {
  out << "dataset,class,threshold,auc_baseline,auc_selective,f1_baseline,"
         "f1_selective,rejection_rate\n";
  auto row = [&](const std::string& dataset, const std::string& cls,
                 const CellReport& cell, bool with_threshold) {
    out << dataset << ',' << cls << ','
        << (with_threshold ? format_double(cell.threshold) : std::string())
        << ',' << opt_field(cell.auc_baseline) << ','
        << opt_field(cell.auc_selective) << ',' << opt_field(cell.f1_baseline)
        << ',' << opt_field(cell.f1_selective) << ','
        << format_double(cell.rejection_rate) << "\n";
  };
  for (std::size_t s = 0; s < report.sources.size(); ++s)
    for (std::size_t c = 0; c < report.schema.class_names.size(); ++c)
      row(report.sources[s], report.schema.class_names[c],
          report.cells[s][c], true);
  for (std::size_t c = 0; c < report.schema.class_names.size(); ++c)
    row("(all)", report.schema.class_names[c], report.per_class[c], true);
  row("(all)", "(average)", report.average, false);
}

void write_bootstrap_samples_csv(std::ostream& out, const BootstrapResult& r) {
  out << "source,class,iteration,f1_baseline,f1_selective\n";
  for (const auto& cell : r.cells) {
    for (std::uint64_t it = 0; it < r.iterations; ++it) {
      out << cell.source << ',' << cell.class_name << ',' << it << ','
          << opt_field(cell.f1_baseline[it]) << ','
          << opt_field(cell.f1_selective[it]) << "\n";
    }
  }
}

std::string bootstrap_summary_json(const BootstrapResult& r) {
  auto opt = [](const std::optional<double>& v) {
    return v ? ordered_json(*v) : ordered_json(nullptr);
  };
  ordered_json j;
  j["iterations"] = r.iterations;
  j["seed"] = r.seed;
  ordered_json cells = ordered_json::array();
  for (const auto& cell : r.cells) {
    ordered_json c;
    c["source"] = cell.source;
    c["class"] = cell.class_name;
    c["ci_baseline"] = {opt(cell.ci_baseline_lo), opt(cell.ci_baseline_hi)};
    c["ci_selective"] = {opt(cell.ci_selective_lo), opt(cell.ci_selective_hi)};
    c["ci_gap"] = {opt(cell.ci_gap_lo), opt(cell.ci_gap_hi)};
    c["exceed_fraction"] = cell.exceed_fraction;
    c["n_null_baseline"] = cell.null_baseline;
    c["n_null_selective"] = cell.null_selective;
    cells.push_back(std::move(c));
  }
  j["cells"] = std::move(cells);
  return j.dump(2) + "\n";
}

void write_comparison_csv(std::ostream& out, const MechanismComparison& cmp) {
  out << "class,auc_baseline,auc_interval,auc_entropy\n";
  auto row = [&](const MechanismComparisonRow& r) {
    out << r.class_name << ',' << opt_field(r.auc_baseline) << ','
        << opt_field(r.auc_interval) << ',' << opt_field(r.auc_entropy)
        << "\n";
  };
  for (const auto& r : cmp.rows) row(r);
  row(cmp.average);
}

std::vector<MechanismComparisonRow> read_comparison_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line))
    throw Error(ErrorCode::parse_error, "line 1: empty comparison file");
  const auto header = split_csv_line(strip_cr(line));
  const std::vector<std::string> expected = {"class", "auc_baseline",
                                             "auc_interval", "auc_entropy"};
  for (const auto& name : expected) {
    if (std::find(header.begin(), header.end(), name) == header.end())
      throw Error(ErrorCode::missing_column, "missing column: " + name);
  }
  auto col = [&](const std::string& name) {
    return static_cast<std::size_t>(
        std::find(header.begin(), header.end(), name) - header.begin());
  };
  std::vector<MechanismComparisonRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw Error(ErrorCode::parse_error,
                  "line " + std::to_string(line_no) + ": bad field count");
    MechanismComparisonRow row;
    row.class_name = fields[col("class")];
    if (row.class_name == "average" || row.class_name == "(average)") continue;
    auto opt_parse = [&](const std::string& s) -> std::optional<double> {
      if (s.empty()) return std::nullopt;
      return parse_double(s, line_no, "auc");
    };
    row.auc_baseline = opt_parse(fields[col("auc_baseline")]);
    row.auc_interval = opt_parse(fields[col("auc_interval")]);
    row.auc_entropy = opt_parse(fields[col("auc_entropy")]);
    rows.push_back(std::move(row));
  }
  return rows;
}

SplitStrategy split_strategy_from_string(const std::string& s) {
  if (s == "intra" || s == "intra_source") return SplitStrategy::intra_source;
  if (s == "inter" || s == "inter_source") return SplitStrategy::inter_source;
  throw Error(ErrorCode::invalid_config, "unknown split strategy: " + s);
}

const char* to_string(SplitStrategy s) {
  return s == SplitStrategy::intra_source ? "intra_source" : "inter_source";
}

const char* to_string(Assignment a) {
  switch (a) {
    case Assignment::train: return "train";
    case Assignment::cal: return "cal";
    default: return "eval";
  }
}

SplitManifest make_split(const ScoreTable& table, SplitStrategy strategy,
                         double train_fraction, double cal_fraction,
                         const std::vector<std::string>& held_out_sources,
                         std::uint64_t seed) {
  if (table.records.empty())
    throw Error(ErrorCode::empty_table, "cannot split an empty table");

  SplitManifest manifest;
  manifest.strategy = strategy;
  manifest.seed = seed;
  manifest.train_fraction = train_fraction;
  manifest.cal_fraction = cal_fraction;
  manifest.held_out_sources = held_out_sources;
  manifest.assignments.reserve(table.n_samples());

  std::vector<Assignment> assigned(table.n_samples(), Assignment::train);

  if (strategy == SplitStrategy::intra_source) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
      throw Error(ErrorCode::invalid_config,
                  "train fraction must lie in (0,1)");
    if (!(cal_fraction >= 0.0 && train_fraction + cal_fraction < 1.0))
      throw Error(ErrorCode::invalid_config,
                  "train + cal fractions must leave room for eval");
    std::unordered_map<std::string, std::vector<std::size_t>> by_source;
    for (std::size_t i = 0; i < table.n_samples(); ++i)
      by_source[table.records[i].source].push_back(i);
    for (const auto& source : table.sources()) {
      auto& rows = by_source[source];
      // Per-source stream, so adding a source never disturbs the others.
      SplitMix64 rng(derive_seed(seed, fnv1a64(source)));
      for (std::size_t i = rows.size(); i > 1; --i)
        std::swap(rows[i - 1], rows[rng.bounded(i)]);
      const auto n = rows.size();
      const auto n_train = static_cast<std::size_t>(
          std::floor(static_cast<double>(n) * train_fraction));
      const auto n_cal = static_cast<std::size_t>(
          std::floor(static_cast<double>(n) * cal_fraction));
      for (std::size_t i = 0; i < n; ++i) {
        assigned[rows[i]] = i < n_train                ? Assignment::train
                            : i < n_train + n_cal      ? Assignment::cal
                                                       : Assignment::eval;
      }
    }
  } else {
    if (held_out_sources.empty())
      throw Error(ErrorCode::invalid_config,
                  "inter-source split needs held-out sources");
    const auto present = table.sources();
    for (const auto& s : held_out_sources) {
      if (std::find(present.begin(), present.end(), s) == present.end())
        throw Error(ErrorCode::unknown_source,
                    "held-out source not in table: " + s);
    }
    for (std::size_t i = 0; i < table.n_samples(); ++i) {
      const bool held =
          std::find(held_out_sources.begin(), held_out_sources.end(),
                    table.records[i].source) != held_out_sources.end();
      assigned[i] = held ? Assignment::eval : Assignment::train;
    }
  }

  std::size_t n_train = 0, n_eval = 0;
  for (std::size_t i = 0; i < table.n_samples(); ++i) {
    manifest.assignments.emplace_back(table.records[i].sample_id, assigned[i]);
    n_train += assigned[i] == Assignment::train;
    n_eval += assigned[i] == Assignment::eval;
  }
  if (n_train == 0 || n_eval == 0)
    throw Error(ErrorCode::degenerate_split,
                "split leaves a side empty (train=" + std::to_string(n_train) +
                    ", eval=" + std::to_string(n_eval) + ")");
  return manifest;
}

ScoreTable filter_by_assignment(const ScoreTable& table,
                                const SplitManifest& manifest,
                                Assignment which) {
  std::unordered_map<std::string, Assignment> lookup;
  for (const auto& [id, a] : manifest.assignments) lookup.emplace(id, a);
  std::vector<PredictionRecord> kept;
  for (const auto& rec : table.records) {
    const auto it = lookup.find(rec.sample_id);
    if (it == lookup.end())
      throw Error(ErrorCode::unknown_source,
                  "sample missing from manifest: " + rec.sample_id);
    if (it->second == which) kept.push_back(rec);
  }
  return ScoreTable{table.schema, std::move(kept)};
}

void write_manifest_csv(std::ostream& out, const SplitManifest& manifest) {
  out << "sample_id,assignment\n";
  for (const auto& [id, a] : manifest.assignments)
    out << id << ',' << to_string(a) << "\n";
}

SplitManifest read_manifest_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line))
    throw Error(ErrorCode::parse_error, "line 1: empty manifest");
  if (strip_cr(line) != "sample_id,assignment")
    throw Error(ErrorCode::missing_column,
                "manifest must start with 'sample_id,assignment'");
  SplitManifest manifest;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 2)
      throw Error(ErrorCode::parse_error,
                  "line " + std::to_string(line_no) + ": bad field count");
    Assignment a;
    if (fields[1] == "train")
      a = Assignment::train;
    else if (fields[1] == "cal")
      a = Assignment::cal;
    else if (fields[1] == "eval")
      a = Assignment::eval;
    else
      throw Error(ErrorCode::parse_error,
                  "line " + std::to_string(line_no) + ": unknown assignment '" +
                      fields[1] + "'");
    manifest.assignments.emplace_back(fields[0], a);
  }
  return manifest;
}

}  // namespace rejectkit
