#pragma once

/**
 * \file io.hpp
 * \brief Experiment CSV files, training traces, model checkpoints and run configuration.
 *
 * Experiment file:
 *
 *   # schema=1
 *   # id=A_tension_0.09
 *   # mode=tension
 *   # composition=A
 *   # c=0
 *   # rate=0.09
 *   # rate_unit=1/s
 *   # role=train
 *   # substeps=6
 *   # geometry_L_mm=57
 *   # geometry_R_mm=5
 *   time_s,input,output
 *   0,1,0
 *   ...
 *
 * Checkpoints are JSON documents (schema_version 1) holding the architecture, every gated matrix with its
 * constraint and group, the gamma MLP and an optional snapshot of the run configuration.
 */

#include <picnn/errors.hpp>
#include <picnn/experiment.hpp>
#include <picnn/metrics.hpp>
#include <picnn/potential_net.hpp>
#include <picnn/training.hpp>
#include <picnn/viscoelastic.hpp>

#include <json.hpp>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace picnn {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;
inline constexpr double kZeroOutputTolerance = 1e-9;

/// Shortest round-trip-exact text for a double.
inline std::string format_double(double v)
{
  char buf[40];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v)
      break;
  }
  return buf;
}

/// Writes to a temporary sibling and renames it over `path`.
inline void write_file_atomic(const fs::path& path, const std::string& content)
{
  if (path.has_parent_path())
    fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw std::runtime_error("cannot open '" + tmp.string() + "' for writing");
    out << content;
    out.flush();
    if (!out)
      throw std::runtime_error("write to '" + tmp.string() + "' failed");
  }
  fs::rename(tmp, path);
}

inline std::string read_file(const fs::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ParseError(path.string(), 0, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------------------------------------------
// Experiments

inline std::string experiment_to_csv(const ExperimentRecord& rec)
{
  std::ostringstream out;
  out << "# schema=" << kSchemaVersion << "\n";
  out << "# id=" << rec.id << "\n";
  out << "# mode=" << to_string(rec.mode) << "\n";
  out << "# composition=" << rec.composition_name << "\n";
  out << "# c=" << format_double(rec.c) << "\n";
  out << "# rate=" << format_double(rec.rate) << "\n";
  out << "# rate_unit=" << rec.rate_unit() << "\n";
  out << "# role=" << to_string(rec.role) << "\n";
  out << "# substeps=" << rec.substeps << "\n";
  if (rec.mode == LoadingMode::torsion) {
    out << "# geometry_L_mm=" << format_double(rec.geometry.length) << "\n";
    out << "# geometry_R_mm=" << format_double(rec.geometry.radius) << "\n";
  }
  out << "time_s,input,output\n";
  for (const auto& s : rec.samples)
    out << format_double(s.time) << "," << format_double(s.input) << "," << format_double(s.output) << "\n";
  return out.str();
}

namespace detail {

inline double parse_number(const std::string& text, const std::string& file, std::size_t line, const std::string& what)
{
  if (text.empty())
    throw ParseError(file, line, "missing " + what);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(text.c_str(), &end);
  if (end == text.c_str() || *end != '\0' || errno == ERANGE || !std::isfinite(v))
    throw ParseError(file, line, "invalid " + what + " '" + text + "'");
  return v;
}

inline std::string trim(std::string s)
{
  const auto ws = " \t\r";
  s.erase(0, s.find_first_not_of(ws));
  const auto e = s.find_last_not_of(ws);
  s.erase(e == std::string::npos ? 0 : e + 1);
  return s;
}

} // namespace detail

/// Parses one experiment file; `name` is used in error messages.
inline ExperimentRecord parse_experiment_csv(const std::string& text, const std::string& name = "<memory>")
{
  std::istringstream in(text);
  std::string raw;
  std::size_t line = 0;
  std::map<std::string, std::pair<std::string, std::size_t>> header;
  bool schema_seen = false;
  bool columns_seen = false;
  ExperimentRecord rec;
  std::vector<std::size_t> sample_lines;

  while (std::getline(in, raw)) {
    ++line;
    const auto s = detail::trim(raw);
    if (!schema_seen) {
      if (s != "# schema=" + std::to_string(kSchemaVersion))
        throw ParseError(name, line, "expected '# schema=" + std::to_string(kSchemaVersion) + "' as the first line");
      schema_seen = true;
      continue;
    }
    if (s.empty())
      continue;
    if (!columns_seen && s[0] == '#') {
      const auto eq = s.find('=');
      if (eq == std::string::npos)
        continue;
      const auto key = detail::trim(s.substr(1, eq - 1));
      header[key] = {detail::trim(s.substr(eq + 1)), line};
      continue;
    }
    if (!columns_seen) {
      if (s != "time_s,input,output")
        throw ParseError(name, line, "expected column header 'time_s,input,output'");
      columns_seen = true;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream row(s);
    std::string cell;
    while (std::getline(row, cell, ','))
      cells.push_back(detail::trim(cell));
    if (cells.size() != 3)
      throw ParseError(name, line, "expected 3 columns, found " + std::to_string(cells.size()));
    Sample smp;
    smp.time = detail::parse_number(cells[0], name, line, "time");
    smp.input = detail::parse_number(cells[1], name, line, "input");
    smp.output = detail::parse_number(cells[2], name, line, "output");
    if (!rec.samples.empty() && !(smp.time > rec.samples.back().time))
      throw ParseError(name, line, "time is not strictly increasing");
    rec.samples.push_back(smp);
    sample_lines.push_back(line);
  }
  if (!schema_seen)
    throw ParseError(name, 1, "empty file");
  if (!columns_seen)
    throw ParseError(name, line, "missing column header");

  auto get = [&](const std::string& key) -> const std::pair<std::string, std::size_t>* {
    const auto it = header.find(key);
    return it == header.end() ? nullptr : &it->second;
  };
  auto require = [&](const std::string& key) {
    const auto* v = get(key);
    if (!v)
      throw ParseError(name, line, "missing header field '" + key + "'");
    return *v;
  };

  const auto mode = require("mode");
  if (mode.first == "tension")
    rec.mode = LoadingMode::tension;
  else if (mode.first == "torsion")
    rec.mode = LoadingMode::torsion;
  else
    throw ParseError(name, mode.second, "unknown mode '" + mode.first + "'");

  if (const auto* v = get("id"))
    rec.id = v->first;
  if (const auto* v = get("composition"))
    rec.composition_name = v->first;
  const auto known = composition_value(rec.composition_name);
  if (const auto* v = get("c")) {
    rec.c = detail::parse_number(v->first, name, v->second, "composition value");
  } else if (known) {
    rec.c = *known;
  } else {
    throw ParseError(name, line, "composition '" + rec.composition_name + "' is unknown and no c is given");
  }
  if (!(rec.c >= 0.0))
    throw ParseError(name, get("c") ? get("c")->second : line, "composition value must be non-negative");

  const auto rate = require("rate");
  rec.rate = detail::parse_number(rate.first, name, rate.second, "rate");
  if (!(rec.rate > 0.0))
    throw ParseError(name, rate.second, "rate must be positive");
  if (const auto* v = get("rate_unit"); v && v->first != rec.rate_unit())
    throw ParseError(name, v->second, "rate unit '" + v->first + "' does not match mode " + to_string(rec.mode));

  if (const auto* v = get("role")) {
    const auto role = parse_role(v->first);
    if (!role)
      throw ParseError(name, v->second, "unknown role '" + v->first + "'");
    rec.role = *role;
  } else {
    rec.role = default_role(rec.composition_name);
  }
  if (const auto* v = get("substeps")) {
    const double n = detail::parse_number(v->first, name, v->second, "substeps");
    if (n < 1.0 || n != std::floor(n))
      throw ParseError(name, v->second, "substeps must be a positive integer");
    rec.substeps = static_cast<int>(n);
  }
  if (const auto* v = get("geometry_L_mm"))
    rec.geometry.length = detail::parse_number(v->first, name, v->second, "geometry length");
  if (const auto* v = get("geometry_R_mm"))
    rec.geometry.radius = detail::parse_number(v->first, name, v->second, "geometry radius");
  if (!(rec.geometry.length > 0.0) || !(rec.geometry.radius > 0.0))
    throw ParseError(name, line, "geometry must be positive");

  if (rec.samples.size() < 2)
    throw ParseError(name, line, "at least two samples are required");
  if (std::abs(rec.samples.front().output) > kZeroOutputTolerance)
    throw ParseError(name, sample_lines.front(), "first output must be zero");
  for (std::size_t k = 0; k < rec.samples.size(); ++k) {
    const double in = rec.samples[k].input;
    if (rec.mode == LoadingMode::tension && !(in > 0.0))
      throw ParseError(name, sample_lines[k], "stretch must be positive");
  }
  if (rec.id.empty())
    rec.id = rec.composition_name + "_" + to_string(rec.mode) + "_" + format_double(rec.rate);
  return rec;
}

inline ExperimentRecord load_experiment_file(const fs::path& path)
{
  return parse_experiment_csv(read_file(path), path.string());
}

/// A single CSV file, or every *.csv in a directory in lexicographic order.
inline std::vector<ExperimentRecord> load_experiments(const fs::path& path)
{
  if (!fs::exists(path))
    throw ParseError(path.string(), 0, "no such file or directory");
  if (!fs::is_directory(path))
    return {load_experiment_file(path)};
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(path))
    if (e.is_regular_file() && e.path().extension() == ".csv")
      files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<ExperimentRecord> out;
  for (const auto& f : files)
    out.push_back(load_experiment_file(f));
  return out;
}

inline std::string experiment_file_name(const ExperimentRecord& rec)
{
  std::string n = rec.id;
  for (auto& ch : n)
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_' || ch == '.'))
      ch = '_';
  return n + ".csv";
}

inline void save_experiments(const std::vector<ExperimentRecord>& records, const fs::path& dir)
{
  fs::create_directories(dir);
  std::set<std::string> names;
  for (const auto& rec : records) {
    const auto n = experiment_file_name(rec);
    if (!names.insert(n).second)
      throw ConfigError("two records map to the same file name '" + n + "'");
    write_file_atomic(dir / n, experiment_to_csv(rec));
  }
}

// ---------------------------------------------------------------------------------------------------------------
// Training trace

inline std::string trace_to_csv(const TrainingTrace& trace)
{
  std::ostringstream out;
  out << "# schema=" << kSchemaVersion << "\n";
  out << "epoch,stage,train_loss,val_loss,l0_loss,fc_active,nc_active,ncfc_active\n";
  for (const auto& r : trace.rows)
    out << r.epoch << "," << r.stage << "," << format_double(r.train_loss) << "," << format_double(r.val_loss) << ","
        << format_double(r.l0_loss) << "," << r.fc_active << "," << r.nc_active << "," << r.ncfc_active << "\n";
  return out.str();
}

inline TrainingTrace parse_trace_csv(const std::string& text, const std::string& name = "<memory>")
{
  std::istringstream in(text);
  std::string raw;
  std::size_t line = 0;
  TrainingTrace t;
  while (std::getline(in, raw)) {
    ++line;
    const auto s = detail::trim(raw);
    if (line == 1) {
      if (s != "# schema=" + std::to_string(kSchemaVersion))
        throw ParseError(name, line, "expected schema header");
      continue;
    }
    if (line == 2)
      continue;
    if (s.empty())
      continue;
    std::vector<std::string> c;
    std::stringstream row(s);
    std::string cell;
    while (std::getline(row, cell, ','))
      c.push_back(cell);
    if (c.size() != 8)
      throw ParseError(name, line, "expected 8 columns");
    TraceRow r;
    r.epoch = static_cast<long>(detail::parse_number(c[0], name, line, "epoch"));
    r.stage = static_cast<int>(detail::parse_number(c[1], name, line, "stage"));
    r.train_loss = detail::parse_number(c[2], name, line, "train_loss");
    r.val_loss = detail::parse_number(c[3], name, line, "val_loss");
    r.l0_loss = detail::parse_number(c[4], name, line, "l0_loss");
    r.fc_active = static_cast<long>(detail::parse_number(c[5], name, line, "fc_active"));
    r.nc_active = static_cast<long>(detail::parse_number(c[6], name, line, "nc_active"));
    r.ncfc_active = static_cast<long>(detail::parse_number(c[7], name, line, "ncfc_active"));
    t.rows.push_back(r);
  }
  return t;
}

// ---------------------------------------------------------------------------------------------------------------
// Run configuration

struct RunConfig
{
  TrainingSchedule schedule{};
  QlvForm qlv_form = QlvForm::convolution;
  CouplingTransform coupling = CouplingTransform::softplus;
  int quadrature_order = kDefaultQuadratureOrder;
  std::uint64_t seed = 0;
  std::string output_dir; // empty: caller decides
};

inline json config_to_json(const RunConfig& c)
{
  const auto& s = c.schedule;
  json j;
  j["epochs"] = s.epochs;
  j["batches_per_experiment"] = s.batches_per_experiment;
  j["min_cycles"] = s.min_cycles;
  j["max_cycles"] = s.max_cycles;
  j["convergence_tolerance"] = s.convergence_tolerance;
  j["lr_picnn"] = s.lr_picnn;
  j["lr_gamma"] = s.lr_gamma;
  j["loss_targets"] = {{"tension", s.targets.tension},
                       {"torsion", s.targets.torsion},
                       {"fc", s.targets.fc},
                       {"nc", s.targets.nc},
                       {"ncfc", s.targets.ncfc}};
  j["torsion_rate"] = s.torsion_rate;
  j["per_sample_mean"] = s.per_sample_mean;
  j["train_fraction"] = s.train_fraction;
  j["threads"] = s.threads;
  j["pooled_batches"] = s.pooled_batches;
  j["sampled_gates_from_stage"] = s.sampled_gates_from_stage;
  j["full_loss_estimate"] = s.full_loss_estimate;
  j["qlv_form"] = to_string(c.qlv_form);
  j["coupling"] = to_string(c.coupling);
  j["quadrature_order"] = c.quadrature_order;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  return j;
}

namespace detail {

template <class T>
T json_get(const json& j, const std::string& key, const std::string& where)
{
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + ": bad value for '" + key + "': " + e.what());
  }
}

inline void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where)
{
  if (!j.is_object())
    throw ConfigError(where + " must be a JSON object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k))
      throw ConfigError(where + ": unknown key '" + k + "'");
}

inline QlvForm parse_qlv_form(const std::string& s)
{
  if (s == "convolution")
    return QlvForm::convolution;
  if (s == "multiplier")
    return QlvForm::multiplier;
  throw ConfigError("unknown qlv_form '" + s + "'");
}

inline CouplingTransform parse_coupling(const std::string& s)
{
  if (s == "softplus")
    return CouplingTransform::softplus;
  if (s == "linear")
    return CouplingTransform::linear;
  throw ConfigError("unknown coupling '" + s + "'");
}

} // namespace detail

/// Overrides on top of the defaults; unknown keys are rejected.
inline RunConfig config_from_json(const json& j)
{
  static const std::set<std::string> keys{"epochs",         "batches_per_experiment", "min_cycles",  "max_cycles",
                                          "convergence_tolerance", "lr_picnn",       "lr_gamma",    "loss_targets",
                                          "torsion_rate",   "per_sample_mean",        "train_fraction", "threads",
                                          "qlv_form",       "coupling",               "quadrature_order", "seed",
                                          "output_dir",     "pooled_batches",         "sampled_gates_from_stage",
                                          "full_loss_estimate"};
  detail::reject_unknown(j, keys, "config");
  RunConfig c;
  auto& s = c.schedule;
  const std::string w = "config";
  if (j.contains("epochs")) {
    const auto e = detail::json_get<std::vector<int>>(j, "epochs", w);
    if (e.size() != 7)
      throw ConfigError("config: 'epochs' needs 7 entries");
    std::copy(e.begin(), e.end(), s.epochs.begin());
  }
  if (j.contains("batches_per_experiment"))
    s.batches_per_experiment = detail::json_get<int>(j, "batches_per_experiment", w);
  if (j.contains("min_cycles"))
    s.min_cycles = detail::json_get<int>(j, "min_cycles", w);
  if (j.contains("max_cycles"))
    s.max_cycles = detail::json_get<int>(j, "max_cycles", w);
  if (j.contains("convergence_tolerance"))
    s.convergence_tolerance = detail::json_get<double>(j, "convergence_tolerance", w);
  if (j.contains("lr_picnn"))
    s.lr_picnn = detail::json_get<double>(j, "lr_picnn", w);
  if (j.contains("lr_gamma"))
    s.lr_gamma = detail::json_get<double>(j, "lr_gamma", w);
  if (j.contains("loss_targets")) {
    const auto& t = j.at("loss_targets");
    detail::reject_unknown(t, {"tension", "torsion", "fc", "nc", "ncfc"}, "config.loss_targets");
    const std::string wt = "config.loss_targets";
    if (t.contains("tension"))
      s.targets.tension = detail::json_get<double>(t, "tension", wt);
    if (t.contains("torsion"))
      s.targets.torsion = detail::json_get<double>(t, "torsion", wt);
    if (t.contains("fc"))
      s.targets.fc = detail::json_get<double>(t, "fc", wt);
    if (t.contains("nc"))
      s.targets.nc = detail::json_get<double>(t, "nc", wt);
    if (t.contains("ncfc"))
      s.targets.ncfc = detail::json_get<double>(t, "ncfc", wt);
  }
  if (j.contains("torsion_rate"))
    s.torsion_rate = detail::json_get<double>(j, "torsion_rate", w);
  if (j.contains("per_sample_mean"))
    s.per_sample_mean = detail::json_get<bool>(j, "per_sample_mean", w);
  if (j.contains("train_fraction"))
    s.train_fraction = detail::json_get<double>(j, "train_fraction", w);
  if (j.contains("threads"))
    s.threads = detail::json_get<int>(j, "threads", w);
  if (j.contains("pooled_batches"))
    s.pooled_batches = detail::json_get<bool>(j, "pooled_batches", w);
  if (j.contains("sampled_gates_from_stage"))
    s.sampled_gates_from_stage = detail::json_get<int>(j, "sampled_gates_from_stage", w);
  if (j.contains("full_loss_estimate"))
    s.full_loss_estimate = detail::json_get<bool>(j, "full_loss_estimate", w);
  if (j.contains("qlv_form"))
    c.qlv_form = detail::parse_qlv_form(detail::json_get<std::string>(j, "qlv_form", w));
  if (j.contains("coupling"))
    c.coupling = detail::parse_coupling(detail::json_get<std::string>(j, "coupling", w));
  if (j.contains("quadrature_order"))
    c.quadrature_order = detail::json_get<int>(j, "quadrature_order", w);
  if (j.contains("seed"))
    c.seed = detail::json_get<std::uint64_t>(j, "seed", w);
  if (j.contains("output_dir"))
    c.output_dir = detail::json_get<std::string>(j, "output_dir", w);
  s.validate();
  if (c.quadrature_order < 1)
    throw ConfigError("config: quadrature_order must be positive");
  return c;
}

/// "paper-defaults" or a path to a JSON file.
inline RunConfig load_run_config(const std::string& spec)
{
  if (spec == "paper-defaults" || spec.empty())
    return {};
  json j;
  try {
    j = json::parse(read_file(spec));
  } catch (const json::parse_error& e) {
    throw ConfigError(spec + ": " + e.what());
  }
  return config_from_json(j);
}

// ---------------------------------------------------------------------------------------------------------------
// Model checkpoints

struct ModelBundle
{
  PicnnModel model;
  QlvModel qlv;
  std::optional<json> config;
};

namespace detail {

inline json matrix_to_json(const Matrix& m)
{
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const json& j, Eigen::Index rows, Eigen::Index cols, const std::string& what)
{
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
    throw ConfigError(what + ": expected " + std::to_string(rows) + " rows");
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw ConfigError(what + ": expected " + std::to_string(cols) + " columns in row " + std::to_string(r));
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (!row[static_cast<std::size_t>(c)].is_number())
        throw ConfigError(what + ": non-numeric entry");
      m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
  }
  return m;
}

} // namespace detail

inline json model_to_json(const PicnnModel& model, const QlvModel& qlv, const std::optional<json>& config = std::nullopt)
{
  const auto& a = model.architecture();
  const auto& h = model.hyper();
  json j;
  j["schema_version"] = kSchemaVersion;
  j["architecture"] = {{"convex_widths", a.convex_widths},
                       {"nc_widths", a.nc_widths},
                       {"coupling_width", a.coupling_width},
                       {"coupling", to_string(a.coupling)}};
  j["l0"] = {{"gamma", h.gamma_gate},
             {"zeta", h.zeta},
             {"beta", h.beta},
             {"log_alpha_init_std", h.log_alpha_init_std},
             {"mc_samples", h.mc_samples}};
  json mats = json::array();
  for (const auto& m : model.matrices())
    mats.push_back({{"name", m.name},
                    {"group", to_string(m.group)},
                    {"constraint", to_string(m.constraint)},
                    {"rows", m.theta_bar.rows()},
                    {"cols", m.theta_bar.cols()},
                    {"theta_bar", detail::matrix_to_json(m.theta_bar)},
                    {"log_alpha", detail::matrix_to_json(m.log_alpha)}});
  j["matrices"] = std::move(mats);
  std::vector<double> hidden(qlv.mlp.hidden.data(), qlv.mlp.hidden.data() + qlv.mlp.hidden.size());
  std::vector<double> output(qlv.mlp.output.data(), qlv.mlp.output.data() + qlv.mlp.output.size());
  j["qlv"] = {{"tau", qlv.tau}, {"form", to_string(qlv.form)}, {"gamma_hidden", hidden}, {"gamma_output", output}};
  if (config)
    j["config"] = *config;
  return j;
}

inline ModelBundle model_from_json(const json& j)
{
  try {
    if (j.at("schema_version").get<int>() != kSchemaVersion)
      throw ConfigError("unsupported model schema_version " + j.at("schema_version").dump());
    const auto& ja = j.at("architecture");
    PicnnArchitecture a;
    a.convex_widths = ja.at("convex_widths").get<std::vector<int>>();
    a.nc_widths = ja.at("nc_widths").get<std::vector<int>>();
    a.coupling_width = ja.at("coupling_width").get<int>();
    a.coupling = detail::parse_coupling(ja.at("coupling").get<std::string>());
    const auto& jl = j.at("l0");
    L0Hyper h;
    h.gamma_gate = jl.at("gamma").get<double>();
    h.zeta = jl.at("zeta").get<double>();
    h.beta = jl.at("beta").get<double>();
    h.log_alpha_init_std = jl.at("log_alpha_init_std").get<double>();
    h.mc_samples = jl.at("mc_samples").get<int>();
    PicnnModel model(a, h);
    const auto& jm = j.at("matrices");
    if (!jm.is_array() || jm.size() != model.matrices().size())
      throw ConfigError("model file holds " + std::to_string(jm.size()) + " matrices, architecture implies " +
                        std::to_string(model.matrices().size()));
    for (std::size_t i = 0; i < jm.size(); ++i) {
      auto& m = model.matrices()[i];
      const auto& e = jm[i];
      if (e.at("name").get<std::string>() != m.name)
        throw ConfigError("matrix " + std::to_string(i) + " is '" + e.at("name").get<std::string>() + "', expected '" +
                          m.name + "'");
      if (e.at("group").get<std::string>() != to_string(m.group) ||
          e.at("constraint").get<std::string>() != to_string(m.constraint))
        throw ConfigError("group or constraint mismatch in matrix '" + m.name + "'");
      if (e.at("rows").get<Eigen::Index>() != m.theta_bar.rows() || e.at("cols").get<Eigen::Index>() != m.theta_bar.cols())
        throw ConfigError("shape mismatch in matrix '" + m.name + "'");
      m.theta_bar = detail::matrix_from_json(e.at("theta_bar"), m.theta_bar.rows(), m.theta_bar.cols(), m.name);
      m.log_alpha = detail::matrix_from_json(e.at("log_alpha"), m.log_alpha.rows(), m.log_alpha.cols(), m.name);
      if (m.constraint == Constraint::nonnegative && (m.theta_bar.array() < 0.0).any())
        throw ConfigError("matrix '" + m.name + "' violates its non-negativity constraint");
    }
    QlvModel q;
    const auto& jq = j.at("qlv");
    q.tau = jq.at("tau").get<double>();
    q.form = detail::parse_qlv_form(jq.at("form").get<std::string>());
    const auto hid = jq.at("gamma_hidden").get<std::vector<double>>();
    const auto out = jq.at("gamma_output").get<std::vector<double>>();
    if (hid.empty() || hid.size() != out.size())
      throw ConfigError("gamma MLP hidden and output sizes differ");
    q.mlp.hidden = Eigen::Map<const Eigen::VectorXd>(hid.data(), static_cast<Eigen::Index>(hid.size()));
    q.mlp.output = Eigen::Map<const Eigen::RowVectorXd>(out.data(), static_cast<Eigen::Index>(out.size()));
    std::optional<json> cfg;
    if (j.contains("config"))
      cfg = j.at("config");
    return {std::move(model), std::move(q), std::move(cfg)};
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed model file: ") + e.what());
  }
}

inline std::string model_to_string(const PicnnModel& model, const QlvModel& qlv,
                                   const std::optional<json>& config = std::nullopt)
{
  return model_to_json(model, qlv, config).dump(1) + "\n";
}

inline void save_model(const fs::path& path, const PicnnModel& model, const QlvModel& qlv,
                       const std::optional<json>& config = std::nullopt)
{
  write_file_atomic(path, model_to_string(model, qlv, config));
}

inline ModelBundle load_model(const fs::path& path)
{
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return model_from_json(j);
}

// ---------------------------------------------------------------------------------------------------------------
// Metric table

struct MetricRow
{
  std::string id;
  std::string composition;
  LoadingMode mode = LoadingMode::tension;
  double rate = 0.0;
  DataRole role = DataRole::train;
  MetricReport report;
};

inline std::string metric_table(const std::vector<MetricRow>& rows)
{
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-12s %-8s %10s %-9s %-19s %10s %10s\n", "composition", "mode", "rate", "unit",
                "role", "R2", "sMAPE(%)");
  out << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-12s %-8s %10g %-9s %-19s %10.4f %10.3f\n", r.composition.c_str(),
                  to_string(r.mode), r.rate, r.mode == LoadingMode::tension ? "1/s" : "deg/min", to_string(r.role),
                  r.report.r_squared, r.report.smape);
    out << buf;
  }
  return out.str();
}

inline std::string metric_csv(const std::vector<MetricRow>& rows)
{
  std::ostringstream out;
  out << "id,composition,mode,rate,role,r_squared,smape,n_points,n_filtered_zero\n";
  for (const auto& r : rows)
    out << r.id << "," << r.composition << "," << to_string(r.mode) << "," << format_double(r.rate) << ","
        << to_string(r.role) << "," << format_double(r.report.r_squared) << "," << format_double(r.report.smape) << ","
        << r.report.n_points << "," << r.report.n_filtered_zero << "\n";
  return out.str();
}

} // namespace picnn
