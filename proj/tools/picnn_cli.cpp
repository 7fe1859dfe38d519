// Command-line front end: synth, train, predict, eval, plot, inspect.

#include <picnn/evaluation.hpp>
#include <picnn/expression.hpp>
#include <picnn/io.hpp>
#include <picnn/plot.hpp>
#include <picnn/reference_material.hpp>
#include <picnn/training.hpp>

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

using namespace picnn;

namespace {

std::string default_output_dir()
{
  if (const char* env = std::getenv("PICNN_OUTPUT_DIR"); env && *env)
    return env;
  return "picnn-out";
}

struct LoadedModel
{
  bool reference = false;
  std::optional<ModelBundle> bundle;

  [[nodiscard]] Predictor predictor() const
  {
    if (reference)
      return reference_predictor();
    return model_predictor(bundle->model, bundle->qlv);
  }
};

LoadedModel load_model_arg(const std::string& spec)
{
  LoadedModel m;
  if (spec == "reference")
    m.reference = true;
  else
    m.bundle = load_model(spec);
  return m;
}

std::vector<double> parse_list(const std::string& s)
{
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty())
      out.push_back(detail::parse_number(item, "argument", 0, "list entry"));
  return out;
}

std::vector<std::string> parse_names(const std::string& s)
{
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty())
      out.push_back(item);
  return out;
}

int cmd_synth(double noise, std::uint64_t seed, const std::string& out, const std::string& comps,
              const std::string& tension, const std::string& torsion, const std::string& form)
{
  SynthesisSettings s;
  s.noise_std = noise;
  s.seed = seed;
  if (!comps.empty())
    s.compositions = parse_names(comps);
  if (!tension.empty())
    s.tension_rates = parse_list(tension);
  if (!torsion.empty())
    s.torsion_rates = parse_list(torsion);
  s.qlv_form = detail::parse_qlv_form(form);
  const auto records = synthesize_dataset(s);
  save_experiments(records, out);
  std::cout << "wrote " << records.size() << " records to " << out << "\n";
  return 0;
}

int cmd_train(const std::string& data, const std::string& config, std::optional<std::uint64_t> seed,
              std::optional<int> threads, const std::string& out_override)
{
  auto cfg = load_run_config(config);
  if (seed)
    cfg.seed = *seed;
  if (threads)
    cfg.schedule.threads = *threads;
  if (!out_override.empty())
    cfg.output_dir = out_override;
  else if (cfg.output_dir.empty())
    cfg.output_dir = default_output_dir();
  const auto records = load_experiments(data);
  const fs::path out = cfg.output_dir;
  const json snapshot = config_to_json(cfg);

  TrainingOptions opt;
  opt.architecture.coupling = cfg.coupling;
  opt.qlv_form = cfg.qlv_form;
  opt.quadrature_order = cfg.quadrature_order;
  opt.on_stage_end = [&](int stage, const PicnnModel& m, const QlvModel& q) {
    save_model(out / "checkpoints" / ("stage_" + std::to_string(stage) + ".json"), m, q, snapshot);
  };
  long last_stage = -1;
  opt.on_epoch = [&](const TraceRow& r) {
    if (r.stage != last_stage) {
      std::cerr << "stage " << r.stage << "\n";
      last_stage = r.stage;
    }
  };
  const auto res = run_schedule(records, cfg.schedule, cfg.seed, opt);
  save_model(out / "model.json", res.model, res.qlv, snapshot);
  write_file_atomic(out / "trace.csv", trace_to_csv(res.trace));
  write_file_atomic(out / "config.json", snapshot.dump(1) + "\n");
  const auto counts = res.model.count_active_parameters();
  std::cout << "trained " << res.trace.rows.size() << " epochs (" << res.cycles << " alternation cycles); active fc "
            << counts.fc << ", nc " << counts.nc << ", ncfc " << counts.ncfc << "\n"
            << "model: " << (out / "model.json").string() << "\n";
  return 0;
}

int cmd_predict(const std::string& model, const std::string& data, const std::string& out)
{
  const auto m = load_model_arg(model);
  const auto records = load_experiments(data);
  const auto predict = m.predictor();
  std::vector<ExperimentRecord> preds;
  for (const auto& rec : records)
    preds.push_back(predicted_record(rec, predict));
  save_experiments(preds, out);
  std::cout << "wrote " << preds.size() << " predictions to " << out << "\n";
  return 0;
}

int cmd_eval(const std::string& model, const std::string& data, const std::string& csv)
{
  const auto m = load_model_arg(model);
  const auto rows = evaluate_records(load_experiments(data), m.predictor());
  std::cout << metric_table(rows);
  if (!csv.empty())
    write_file_atomic(csv, metric_csv(rows));
  return 0;
}

int cmd_plot(const std::string& model, const std::string& data, const std::string& out)
{
  const auto m = load_model_arg(model);
  const auto records = load_experiments(data);
  const auto predict = m.predictor();
  std::map<std::string, int> colors;
  for (const auto& e : kCompositionTable)
    colors.emplace(std::string(e.name), static_cast<int>(colors.size()));
  std::map<std::pair<LoadingMode, double>, PlotSpec> plots;
  for (const auto& rec : records) {
    auto& spec = plots[{rec.mode, rec.rate}];
    if (spec.title.empty()) {
      char title[96];
      std::snprintf(title, sizeof title, "%s, rate %g %s", to_string(rec.mode), rec.rate, rec.rate_unit());
      spec.title = title;
      spec.x_label = rec.mode == LoadingMode::tension ? "stretch" : "angle of twist (deg)";
      spec.y_label = rec.mode == LoadingMode::tension ? "sigma11 (MPa)" : "T L / Jp (MPa)";
    }
    const int color = colors.emplace(rec.composition_name, static_cast<int>(colors.size())).first->second;
    const double scale = rec.mode == LoadingMode::torsion ? rec.geometry.length / rec.geometry.polar_moment() : 1.0;
    PlotSeries data_pts{rec.composition_name + " data", {}, {}, true, color};
    PlotSeries model_line{rec.composition_name + " model", {}, {}, false, color};
    const auto y = predict(rec);
    for (std::size_t k = 0; k < rec.samples.size(); ++k) {
      data_pts.x.push_back(rec.samples[k].input);
      data_pts.y.push_back(rec.samples[k].output * scale);
      model_line.x.push_back(rec.samples[k].input);
      model_line.y.push_back(y[k] * scale);
    }
    spec.series.push_back(std::move(data_pts));
    spec.series.push_back(std::move(model_line));
  }
  for (const auto& [key, spec] : plots) {
    char name[64];
    std::snprintf(name, sizeof name, "%s_%g.svg", to_string(key.first), key.second);
    write_file_atomic(fs::path(out) / name, render_svg(spec));
    std::cout << (fs::path(out) / name).string() << "\n";
  }
  return 0;
}

int cmd_inspect(const std::string& model, bool expression)
{
  const auto m = load_model_arg(model);
  const PicnnModel net = m.reference ? reference_picnn() : m.bundle->model;
  const QlvModel qlv = m.reference ? reference_qlv() : m.bundle->qlv;
  const auto counts = net.count_active_parameters();
  const auto expected = net.expected_l0_by_group();
  std::printf("weights      %ld\n", static_cast<long>(net.weight_count()));
  std::printf("active fc    %ld\nactive nc    %ld\nactive ncfc  %ld\nactive total %ld\n", counts.fc, counts.nc,
              counts.ncfc, counts.total());
  std::printf("expected L0  %.3f (fc %.3f, nc %.3f, ncfc %.3f)\n", expected[0] + expected[1] + expected[2],
              expected[0], expected[1], expected[2]);
  std::printf("qlv          tau %g s, form %s\n", qlv.tau, to_string(qlv.form));
  for (const auto& e : kCompositionTable)
    std::printf("  gamma(%-5s c=%-6g) = %.6f\n", std::string(e.name).c_str(), e.c, qlv.relax_coeff(e.c));
  if (expression)
    std::cout << "\n" << format_expression(render_expression(net));
  return 0;
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"pICNN-QLV constitutive model discovery"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth", "generate a dataset from the reference material");
  double noise = 0.0;
  std::uint64_t synth_seed = 0;
  std::string synth_out = default_output_dir() + "/data";
  std::string comps, tension_rates, torsion_rates, synth_form = "convolution";
  synth->add_option("--noise", noise, "Gaussian noise std relative to each curve's range")->check(CLI::NonNegativeNumber);
  synth->add_option("--seed", synth_seed, "noise seed");
  synth->add_option("--out", synth_out, "output directory");
  synth->add_option("--compositions", comps, "comma-separated composition names");
  synth->add_option("--tension-rates", tension_rates, "comma-separated stretch rates (1/s)");
  synth->add_option("--torsion-rates", torsion_rates, "comma-separated twist rates (deg/min)");
  synth->add_option("--qlv-form", synth_form, "convolution or multiplier")->check(CLI::IsMember({"convolution", "multiplier"}));

  auto* train = app.add_subcommand("train", "run the staged training schedule");
  std::string train_data, config = "paper-defaults", train_out;
  std::optional<std::uint64_t> train_seed;
  std::optional<int> threads;
  train->add_option("--data", train_data, "experiment CSV file or directory")->required();
  train->add_option("--config", config, "'paper-defaults' or a JSON run configuration");
  train->add_option("--seed", train_seed, "overrides the configured seed");
  train->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  train->add_option("--out", train_out, "output directory (overrides the configuration)");

  auto* predict = app.add_subcommand("predict", "write model responses for every record");
  std::string model, data, out;
  predict->add_option("--model", model, "model JSON or 'reference'")->required();
  predict->add_option("--data", data, "experiment CSV file or directory")->required();
  predict->add_option("--out", out, "output directory")->required();

  auto* eval = app.add_subcommand("eval", "R2 and sMAPE per record");
  std::string csv;
  eval->add_option("--model", model, "model JSON or 'reference'")->required();
  eval->add_option("--data", data, "experiment CSV file or directory")->required();
  eval->add_option("--csv", csv, "also write the table as CSV");

  auto* plot = app.add_subcommand("plot", "SVG plots of data and model curves");
  plot->add_option("--model", model, "model JSON or 'reference'")->required();
  plot->add_option("--data", data, "experiment CSV file or directory")->required();
  plot->add_option("--out", out, "output directory")->required();

  auto* inspect = app.add_subcommand("inspect", "active parameters and surviving terms");
  bool expression = false;
  inspect->add_option("--model", model, "model JSON or 'reference'")->required();
  inspect->add_flag("--expression", expression, "print the surviving terms as an expression");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*synth)
      return cmd_synth(noise, synth_seed, synth_out, comps, tension_rates, torsion_rates, synth_form);
    if (*train)
      return cmd_train(train_data, config, train_seed, threads, train_out);
    if (*predict)
      return cmd_predict(model, data, out);
    if (*eval)
      return cmd_eval(model, data, csv);
    if (*plot)
      return cmd_plot(model, data, out);
    if (*inspect)
      return cmd_inspect(model, expression);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
