// Command-line front end for the calibration pipeline. One executable, one
// subcommand per pipeline stage; reports go to stdout as JSON, diagnostics
// to stderr. Exit codes: 0 ok, 1 validation error, 2 I/O error.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "thermo/dataset.hpp"
#include "thermo/freeform.hpp"
#include "thermo/inference.hpp"
#include "thermo/metrics.hpp"
#include "thermo/net.hpp"
#include "thermo/scaling.hpp"
#include "thermo/synth.hpp"
#include "thermo/training.hpp"

namespace {

using nlohmann::json;
using namespace thermo;

// Floating-point output is rendered with 12 significant digits so reruns
// produce byte-identical reports.
double round12(double v) {
  if (!std::isfinite(v)) return v;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return std::strtod(buf, nullptr);
}

json round_floats(const json& j) {
  if (j.is_number_float()) return round12(j.get<double>());
  if (j.is_object()) {
    json out = json::object();
    for (auto it = j.begin(); it != j.end(); ++it) out[it.key()] = round_floats(it.value());
    return out;
  }
  if (j.is_array()) {
    json out = json::array();
    for (const auto& v : j) out.push_back(round_floats(v));
    return out;
  }
  return j;
}

void emit(const json& j) { std::cout << round_floats(j).dump() << "\n"; }

std::uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path + " for digest");
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[8192];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ull;
    }
    if (!in) break;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

struct ManifestWriter {
  std::string path;
  std::string command;
  json config = json::object();
  std::vector<std::string> inputs;
  std::vector<std::string> artifacts;
  std::uint64_t seed = 0;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  void write() const {
    if (path.empty()) return;
    json digests = json::object();
    for (const auto& in : inputs) digests[in] = hex64(fnv1a64_file(in));
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                      .count();
    json m = {{"command", command},
              {"config", config},
              {"input_digests", digests},
              {"seed", seed},
              {"artifacts", artifacts},
              {"duration_seconds", secs}};
    std::string tmp = path + ".tmp";
    {
      std::ofstream out(tmp);
      if (!out) throw IoError("cannot write " + tmp);
      out << round_floats(m).dump(2) << "\n";
    }
    std::filesystem::rename(tmp, path);
  }
};

struct CommonTaskArgs {
  std::vector<std::string> task_paths;
  std::string format = "binary";
};

std::vector<TaskDataset> load_tasks(const CommonTaskArgs& args) {
  if (args.task_paths.empty()) throw std::invalid_argument("no task files given");
  FileFormat fmt = parse_format(args.format);
  std::vector<TaskDataset> tasks;
  for (const auto& p : args.task_paths) {
    TaskDataset ds = load_task(p, fmt);
    auto violations = validate_dataset(ds);
    if (!violations.empty()) {
      throw std::invalid_argument(p + ": " + violations.front());
    }
    tasks.push_back(std::move(ds));
  }
  return tasks;
}

void add_task_flags(CLI::App* cmd, CommonTaskArgs& args) {
  cmd->add_option("--task", args.task_paths, "Task dataset file (repeatable)")
      ->required();
  cmd->add_option("--format", args.format, "Dataset file format: jsonl|binary");
}

struct TrainFlags {
  TrainConfig cfg;
  std::uint32_t burnin_flag = 0;
  bool burnin_set = false;

  TrainConfig resolve() const {
    TrainConfig c = cfg;
    if (burnin_set) c.burnin = burnin_flag;
    return c;
  }
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
  cmd->add_option("--batch-size", f.cfg.batch_size, "Minibatch size N_b");
  cmd->add_option("--iterations", f.cfg.iterations, "Optimizer iterations M");
  cmd->add_option("--checkpoint-every", f.cfg.checkpoint_every,
                  "Checkpoint period m'");
  cmd->add_option("--burnin", f.burnin_flag,
                  "Iterations before checkpointing starts (default M/10)")
      ->each([&f](const std::string&) { f.burnin_set = true; });
  cmd->add_option("--lr", f.cfg.learning_rate, "AdamW learning rate");
  cmd->add_option("--weight-decay", f.cfg.weight_decay, "AdamW weight decay");
  cmd->add_option("--lambda-reg", f.cfg.lambda_reg, "Prior weight in the loss");
  cmd->add_option("--alpha0", f.cfg.prior.shape, "Gamma prior shape");
  cmd->add_option("--beta0", f.cfg.prior.scale, "Gamma prior scale");
  cmd->add_option("--epsilon", f.cfg.epsilon, "Posterior variance constant");
  cmd->add_option("--dev-fraction", f.cfg.dev_fraction, "Dev split fraction");
  cmd->add_option("--seed", f.cfg.seed, "Random seed");
  cmd->add_option("--hidden-dim", f.cfg.hidden_dim, "Hidden layer width");
}

json train_config_json(const TrainConfig& c) {
  return {{"batch_size", c.batch_size},
          {"iterations", c.iterations},
          {"checkpoint_every", c.checkpoint_every},
          {"burnin", c.resolved_burnin()},
          {"learning_rate", c.learning_rate},
          {"weight_decay", c.weight_decay},
          {"lambda_reg", c.lambda_reg},
          {"alpha0", c.prior.shape},
          {"beta0", c.prior.scale},
          {"epsilon", c.epsilon},
          {"dev_fraction", c.dev_fraction},
          {"seed", c.seed},
          {"hidden_dim", c.hidden_dim}};
}

json report_json(const CalibrationReport& r) {
  return json::parse(r.to_json_string());
}

json fit_json(const TemperatureFit& fit) {
  return {{"tau", fit.tau},
          {"final_nll", fit.final_nll},
          {"method", fit.method},
          {"boundary_hit", fit.boundary_hit}};
}

int run(int argc, char** argv) {
  CLI::App app{"Thermometer: multi-task temperature calibration for stored "
               "feature/logit datasets"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Flat key=value config file");
  std::string manifest_path;
  app.add_option("--manifest", manifest_path,
                 "Write a run manifest (JSON) to this path");

  // synth-gen
  auto* synth_cmd = app.add_subcommand("synth-gen", "Generate a synthetic suite");
  SynthConfig synth_cfg;
  std::string synth_out = ".";
  std::string synth_fmt = "binary";
  synth_cmd->add_option("--tasks", synth_cfg.num_tasks, "Number of tasks");
  synth_cmd->add_option("--records", synth_cfg.records_per_task, "Records per task");
  synth_cmd->add_option("--dim", synth_cfg.feature_dim, "Feature dimension");
  synth_cmd->add_option("--classes", synth_cfg.num_classes, "Number of classes");
  synth_cmd->add_option("--temp-lo", synth_cfg.temp_lo, "Planted temperature low end");
  synth_cmd->add_option("--temp-hi", synth_cfg.temp_hi, "Planted temperature high end");
  synth_cmd->add_option("--scale", synth_cfg.logit_scale, "Logit scale");
  synth_cmd->add_option("--seed", synth_cfg.seed, "Random seed");
  synth_cmd->add_option("--out-dir", synth_out, "Output directory");
  synth_cmd->add_option("--format", synth_fmt, "Output format: jsonl|binary");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train the recognition network");
  CommonTaskArgs train_tasks;
  TrainFlags train_flags;
  std::string checkpoint_out = "thermometer.ckpt";
  std::string train_log;
  add_task_flags(train_cmd, train_tasks);
  add_train_flags(train_cmd, train_flags);
  train_cmd->add_option("--out", checkpoint_out, "Checkpoint output path");
  train_cmd->add_option("--log", train_log, "Training log JSON output path");

  // predict-temp
  auto* predict_cmd = app.add_subcommand("predict-temp",
                                         "Predict a task temperature from features");
  CommonTaskArgs predict_tasks;
  std::string predict_ckpt;
  double predict_eps = 0.01;
  std::size_t predict_limit = 0;
  add_task_flags(predict_cmd, predict_tasks);
  predict_cmd->add_option("--checkpoint", predict_ckpt, "Trained checkpoint")->required();
  predict_cmd->add_option("--epsilon", predict_eps, "Posterior variance constant");
  predict_cmd->add_option("--limit", predict_limit, "Use only the first N records");

  // baseline
  auto* baseline_cmd = app.add_subcommand("baseline", "Fit TS or TS-CV");
  CommonTaskArgs baseline_tasks;
  std::string baseline_method = "ts";
  add_task_flags(baseline_cmd, baseline_tasks);
  baseline_cmd->add_option("--method", baseline_method, "ts | ts-cv");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Score one task at a temperature");
  CommonTaskArgs eval_tasks;
  double eval_tau = 0.0;
  std::string eval_ckpt;
  bool eval_sample_wise = false;
  add_task_flags(eval_cmd, eval_tasks);
  eval_cmd->add_option("--tau", eval_tau, "Fixed temperature to apply");
  eval_cmd->add_option("--checkpoint", eval_ckpt, "Predict the temperature with this checkpoint");
  eval_cmd->add_flag("--sample-wise", eval_sample_wise,
                     "Scale each record by its own predicted temperature");

  // leave-one-out
  auto* loo_cmd = app.add_subcommand("leave-one-out",
                                     "Rotate held-out evaluation over all tasks");
  CommonTaskArgs loo_tasks;
  TrainFlags loo_flags;
  add_task_flags(loo_cmd, loo_tasks);
  add_train_flags(loo_cmd, loo_flags);

  // bound
  auto* bound_cmd = app.add_subcommand("bound", "Evaluate the concentration bound");
  BoundInputs bound_inputs;
  bound_cmd->add_option("--c", bound_inputs.psi_sup, "Sup of psi")->required();
  bound_cmd->add_option("--v", bound_inputs.psi_variance, "Variance bound")->required();
  bound_cmd->add_option("--n", bound_inputs.n_samples, "Sample count")->required();
  bound_cmd->add_option("--lipschitz", bound_inputs.lipschitz,
                        "Lipschitz constant of CE vs temperature");

  // convert-freeform
  auto* conv_cmd = app.add_subcommand("convert-freeform",
                                      "Build Yes/No self-check labels from generations");
  std::string conv_in, conv_out, conv_name = "freeform";
  std::string conv_fmt = "binary";
  conv_cmd->add_option("--in", conv_in, "Input JSONL of generation records")->required();
  conv_cmd->add_option("--out", conv_out, "Output dataset path")->required();
  conv_cmd->add_option("--name", conv_name, "Task name");
  conv_cmd->add_option("--format", conv_fmt, "Output format: jsonl|binary");

  // report
  auto* report_cmd = app.add_subcommand("report",
                                        "Emit one report per (task, method)");
  CommonTaskArgs report_tasks;
  double report_tau = 0.0;
  std::string report_ckpt;
  add_task_flags(report_cmd, report_tasks);
  report_cmd->add_option("--tau", report_tau, "Also report at this fixed temperature");
  report_cmd->add_option("--checkpoint", report_ckpt, "Also report thermometer rows");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);  // prints help or the parse error
    return code == 0 ? 0 : 1;
  }

  ManifestWriter manifest;
  manifest.path = manifest_path;

  if (*synth_cmd) {
    manifest.command = "synth-gen";
    manifest.seed = synth_cfg.seed;
    manifest.config = {{"tasks", synth_cfg.num_tasks},
                       {"records", synth_cfg.records_per_task},
                       {"dim", synth_cfg.feature_dim},
                       {"classes", synth_cfg.num_classes},
                       {"temp_lo", synth_cfg.temp_lo},
                       {"temp_hi", synth_cfg.temp_hi},
                       {"scale", synth_cfg.logit_scale},
                       {"seed", synth_cfg.seed},
                       {"format", synth_fmt},
                       {"out_dir", synth_out}};
    FileFormat fmt = parse_format(synth_fmt);
    auto suite = generate_suite(synth_cfg);
    json files = json::array();
    for (const auto& ds : suite) {
      std::string ext = fmt == FileFormat::jsonl ? ".jsonl" : ".thrm";
      std::string path = (std::filesystem::path(synth_out) / (ds.name + ext)).string();
      save_task(ds, path, fmt);
      manifest.artifacts.push_back(path);
      files.push_back({{"path", path},
                       {"task", ds.name},
                       {"planted_temperature", *ds.planted_temperature}});
    }
    emit({{"files", files}});
  } else if (*train_cmd) {
    TrainConfig cfg = train_flags.resolve();
    manifest.command = "train";
    manifest.seed = cfg.seed;
    manifest.inputs = train_tasks.task_paths;
    manifest.config = train_config_json(cfg);
    auto tasks = load_tasks(train_tasks);
    TrainResult result = train(tasks, cfg);
    save_params(result.best, checkpoint_out);
    manifest.artifacts.push_back(checkpoint_out);

    json checkpoints = json::array();
    double best_loss = INFINITY;
    std::uint32_t best_iter = 0;
    for (const auto& ck : result.history) {
      checkpoints.push_back({{"iteration", ck.iteration},
                             {"validation_loss", ck.validation_loss}});
      if (ck.validation_loss < best_loss) {
        best_loss = ck.validation_loss;
        best_iter = ck.iteration;
      }
    }
    if (!train_log.empty()) {
      json log = {{"config", train_config_json(cfg)},
                  {"iteration_losses", result.iteration_losses},
                  {"checkpoints", checkpoints}};
      std::ofstream out(train_log);
      if (!out) throw IoError("cannot write " + train_log);
      out << round_floats(log).dump() << "\n";
      manifest.artifacts.push_back(train_log);
    }
    emit({{"checkpoint", checkpoint_out},
          {"best_iteration", best_iter},
          {"best_validation_loss", best_loss},
          {"checkpoints", checkpoints}});
  } else if (*predict_cmd) {
    manifest.command = "predict-temp";
    manifest.inputs = predict_tasks.task_paths;
    manifest.inputs.push_back(predict_ckpt);
    manifest.config = {{"epsilon", predict_eps}, {"limit", predict_limit}};
    auto tasks = load_tasks(predict_tasks);
    ThermometerParams params = load_params(predict_ckpt);
    for (const auto& ds : tasks) {
      std::vector<std::vector<float>> features;
      for (const auto& r : ds.records) {
        features.push_back(r.features);
        if (predict_limit > 0 && features.size() >= predict_limit) break;
      }
      PosteriorSummary s = predict_task_temperature(params, features, predict_eps);
      emit({{"task", ds.name},
            {"mean", s.mean},
            {"variance", s.variance},
            {"n_samples", s.n_samples},
            {"epsilon", s.epsilon}});
    }
  } else if (*baseline_cmd) {
    manifest.command = "baseline";
    manifest.inputs = baseline_tasks.task_paths;
    manifest.config = {{"method", baseline_method}};
    auto tasks = load_tasks(baseline_tasks);
    TemperatureFit fit;
    if (baseline_method == "ts") {
      if (tasks.size() != 1) {
        throw std::invalid_argument("ts baseline takes exactly one task");
      }
      fit = fit_temperature_scaling(tasks[0]);
    } else if (baseline_method == "ts-cv") {
      fit = fit_ts_cv(tasks);
    } else {
      throw std::invalid_argument("unknown baseline method: " + baseline_method);
    }
    emit(fit_json(fit));
  } else if (*eval_cmd) {
    manifest.command = "eval";
    manifest.inputs = eval_tasks.task_paths;
    manifest.config = {{"tau", eval_tau},
                       {"checkpoint", eval_ckpt},
                       {"sample_wise", eval_sample_wise}};
    auto tasks = load_tasks(eval_tasks);
    std::optional<ThermometerParams> params;
    if (!eval_ckpt.empty()) params = load_params(eval_ckpt);
    for (const auto& ds : tasks) {
      LabelVector labels;
      for (const auto& r : ds.records) labels.push_back(r.label);
      if (params && eval_sample_wise) {
        ProbMatrix probs = sample_wise_calibrate(ds, *params);
        emit(report_json(
            make_report(probs, labels, ds.name, "thermometer-sample-wise", std::nullopt)));
      } else if (params) {
        PosteriorSummary s = predict_task_temperature(*params, ds);
        auto [probs, report] = calibrate_dataset(ds, s.mean, "thermometer");
        emit(report_json(report));
      } else {
        double tau = eval_tau > 0.0 ? eval_tau : 1.0;
        auto [probs, report] = calibrate_dataset(
            ds, tau, eval_tau > 0.0 ? "fixed" : "vanilla");
        emit(report_json(report));
      }
    }
  } else if (*loo_cmd) {
    TrainConfig cfg = loo_flags.resolve();
    manifest.command = "leave-one-out";
    manifest.seed = cfg.seed;
    manifest.inputs = loo_tasks.task_paths;
    manifest.config = train_config_json(cfg);
    auto tasks = load_tasks(loo_tasks);
    LooResult result = run_leave_one_out(tasks, cfg);
    for (const auto& row : result.rows) emit(report_json(row.report));

    // Table-style summary: mean and twice the standard error across tasks
    for (const std::string method : {"vanilla", "thermometer", "ts", "ts-cv"}) {
      std::vector<double> eces;
      for (const auto& row : result.rows) {
        if (row.method == method) eces.push_back(row.report.ece);
      }
      double mean = 0.0;
      for (double e : eces) mean += e;
      mean /= static_cast<double>(eces.size());
      double var = 0.0;
      for (double e : eces) var += (e - mean) * (e - mean);
      double se = eces.size() > 1
                      ? std::sqrt(var / static_cast<double>(eces.size() - 1) /
                                  static_cast<double>(eces.size()))
                      : 0.0;
      emit({{"summary", method}, {"mean_ece", mean}, {"two_se", 2.0 * se}});
    }
  } else if (*bound_cmd) {
    manifest.command = "bound";
    manifest.config = {{"c", bound_inputs.psi_sup},
                       {"v", bound_inputs.psi_variance},
                       {"n", bound_inputs.n_samples},
                       {"lipschitz", bound_inputs.lipschitz}};
    BernsteinBound b = bernstein_bound(bound_inputs);
    emit({{"deviation_bound", b.deviation_bound},
          {"ce_bound", b.ce_bound},
          {"failure_probability", b.failure_probability}});
  } else if (*conv_cmd) {
    manifest.command = "convert-freeform";
    manifest.inputs = {conv_in};
    manifest.config = {{"name", conv_name}, {"format", conv_fmt}};
    TaskDataset ds = convert_freeform(conv_in, conv_name);
    auto violations = validate_dataset(ds);
    if (!violations.empty()) {
      throw std::invalid_argument("converted dataset invalid: " + violations.front());
    }
    save_task(ds, conv_out, parse_format(conv_fmt));
    manifest.artifacts.push_back(conv_out);
    emit({{"out", conv_out},
          {"records", ds.records.size()},
          {"yes_fraction",
           ds.records.empty()
               ? 0.0
               : static_cast<double>(std::count_if(
                     ds.records.begin(), ds.records.end(),
                     [](const CalibrationRecord& r) { return r.label == 0; })) /
                     static_cast<double>(ds.records.size())}});
  } else if (*report_cmd) {
    manifest.command = "report";
    manifest.inputs = report_tasks.task_paths;
    manifest.config = {{"tau", report_tau}, {"checkpoint", report_ckpt}};
    auto tasks = load_tasks(report_tasks);
    std::optional<ThermometerParams> params;
    if (!report_ckpt.empty()) params = load_params(report_ckpt);
    for (const auto& ds : tasks) {
      auto [vp, vanilla] = calibrate_dataset(ds, 1.0, "vanilla");
      vanilla.temperature_used.reset();
      emit(report_json(vanilla));
      if (report_tau > 0.0) {
        emit(report_json(calibrate_dataset(ds, report_tau, "fixed").second));
      }
      if (params) {
        PosteriorSummary s = predict_task_temperature(*params, ds);
        emit(report_json(calibrate_dataset(ds, s.mean, "thermometer").second));
      }
    }
  }

  manifest.write();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
