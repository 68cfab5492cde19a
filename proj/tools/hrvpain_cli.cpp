// SPDX-License-Identifier: Apache-2.0
#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hrvpain/config.hpp"
#include "hrvpain/dataset.hpp"
#include "hrvpain/error.hpp"
#include "hrvpain/experiments.hpp"
#include "hrvpain/hrv.hpp"
#include "hrvpain/models.hpp"
#include "hrvpain/qrs.hpp"
#include "hrvpain/report.hpp"

namespace fs = std::filesystem;
using namespace hrvpain;

namespace {

enum ExitCode { kOk = 0, kCheckFailed = 1, kConfigError = 2, kDataError = 3, kNumericalError = 4 };

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::string out;
};

void add_common(CLI::App* cmd, CommonOptions& o, const std::string& out_help) {
  cmd->add_option("--config", o.config_path, "JSON config file")->check(CLI::ExistingFile);
  cmd->add_option("--set", o.overrides, "Override a config key (dotted.key=value); repeatable");
  cmd->add_option("--seed", o.seed, "Run seed");
  cmd->add_option("--workers", o.workers, "Parallel LOSO folds");
  cmd->add_option("--out", o.out, out_help)->required();
}

ExperimentConfig resolve_config(const CommonOptions& o) {
  ExperimentConfig cfg = o.config_path.empty() ? ExperimentConfig{} : ExperimentConfig::load(o.config_path);
  cfg.apply_overrides(o.overrides);
  if (o.seed) cfg.seed = *o.seed;
  if (o.workers) cfg.workers = *o.workers;
  cfg.validate();
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path.string());
  os << text;
}

void echo_config(const ExperimentConfig& cfg, const fs::path& dir) {
  write_text(dir / "effective_config.json", cfg.to_json().dump(2) + "\n");
}

// Directory that receives the echoed config when --out names a file.
fs::path sidecar_dir(const fs::path& out) {
  return out.has_parent_path() ? out.parent_path() : fs::path(".");
}

int cmd_synth_cohort(const CommonOptions& o, std::size_t subjects, bool raw) {
  const ExperimentConfig cfg = resolve_config(o);
  const fs::path dir(o.out);
  fs::create_directories(dir);
  const SyntheticCohort cohort = generate_synthetic_cohort(subjects, cfg.seed);
  write_feature_csv(cohort.dataset, dir / "features.csv");
  std::cout << "wrote " << cohort.dataset.records.size() << " windows for " << subjects << " subjects to "
            << (dir / "features.csv").string() << "\n";
  if (raw) {
    const fs::path csv = export_raw_cohort(cohort, cfg.seed, dir);
    std::cout << "wrote raw ECG layout to " << csv.string() << "\n";
  }
  echo_config(cfg, dir);
  return kOk;
}

int cmd_extract(const CommonOptions& o, const std::string& input) {
  const ExperimentConfig cfg = resolve_config(o);
  const Dataset raw = load_dataset(input);
  if (raw.has_features()) throw DataError(input + " is a feature cache, not a raw-ECG dataset");
  const ExtractionResult res = extract_features(raw, cfg.detector, cfg.features);
  const fs::path out(o.out);
  write_feature_csv(res.dataset, out);
  std::string rejects = "subject_id,window_id,reason\n";
  for (const auto& r : res.rejects) rejects += r.subject_id + "," + r.window_id + "," + r.reason + "\n";
  fs::path rej_path = out;
  rej_path += ".rejects.csv";
  write_text(rej_path, rejects);
  echo_config(cfg, sidecar_dir(out));
  std::cout << "features: " << res.dataset.records.size() << " windows, rejects: " << res.rejects.size() << "\n";
  return kOk;
}

int cmd_detect(const CommonOptions& o, const std::string& input, double sample_rate, const std::string& stages) {
  const ExperimentConfig cfg = resolve_config(o);
  EcgRecord rec;
  rec.samples = read_samples(input);
  rec.sample_rate = sample_rate;
  const QrsResult q = detect_qrs(rec, cfg.detector);

  std::ostringstream os;
  os << "beats: " << q.r_indices.size() << "\n";
  os << "searchback: " << q.searchback_count << "\n";
  os << "rejected_twave: " << q.rejected_twave_count << "\n";
  os << "r_indices:";
  for (auto r : q.r_indices) os << ' ' << r;
  os << "\nibis_ms:";
  std::vector<double> ibis;
  for (std::size_t i = 1; i < q.r_indices.size(); ++i) {
    ibis.push_back(1000.0 * static_cast<double>(q.r_indices[i] - q.r_indices[i - 1]) / sample_rate);
  }
  char buf[64];
  for (double v : ibis) {
    std::snprintf(buf, sizeof buf, " %.3f", v);
    os << buf;
  }
  os << "\n";
  if (!ibis.empty()) {
    double mean = 0;
    for (double v : ibis) mean += v;
    mean /= static_cast<double>(ibis.size());
    std::snprintf(buf, sizeof buf, "%.2f", 60000.0 / mean);
    os << "mean_hr_bpm: " << buf << "\n";
  }
  std::cout << os.str();
  write_text(o.out, os.str());

  if (!stages.empty()) {
    const PanTompkinsStages st = preprocess(rec, cfg.detector);
    std::string csv = "raw,bandpassed,derivative,squared,integrated\n";
    for (std::size_t i = 0; i < rec.samples.size(); ++i) {
      char line[160];
      std::snprintf(line, sizeof line, "%.10g,%.10g,%.10g,%.10g,%.10g\n", rec.samples[i], st.bandpassed[i],
                    st.derivative[i], st.squared[i], st.integrated[i]);
      csv += line;
    }
    write_text(stages, csv);
  }
  echo_config(cfg, sidecar_dir(o.out));
  return kOk;
}

Batch random_batch(std::size_t input_dim, std::size_t pain_classes, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Batch b;
  b.x.resize(static_cast<Eigen::Index>(input_dim), static_cast<Eigen::Index>(n));
  for (Eigen::Index j = 0; j < b.x.cols(); ++j) {
    for (Eigen::Index i = 0; i < b.x.rows(); ++i) b.x(i, j) = normal(rng);
  }
  for (std::size_t i = 0; i < n; ++i) {
    b.pain.push_back(static_cast<int>(rng() % pain_classes));
    b.age.push_back(static_cast<int>(rng() % 36));
    b.gender.push_back(static_cast<int>(rng() % 2));
  }
  return b;
}

int cmd_gradcheck(const CommonOptions& o, double corrupt) {
  const ExperimentConfig cfg = resolve_config(o);
  struct Case {
    std::string name;
    Method method;
    std::size_t classes;
    LossForm form;
  };
  const std::vector<Case> cases{
      {"ST-NN binary", Method::StNn, 2, cfg.mtl.loss_form},
      {"ST-NN 5-class", Method::StNn, 5, cfg.mtl.loss_form},
      {"MT-NN+T(GA) kendall-corrected", Method::MtNnTGA, 2, LossForm::KendallCorrected},
      {"MT-NN+T(GA) paper-literal", Method::MtNnTGA, 2, LossForm::PaperLiteral},
  };
  bool all_ok = true;
  bool numerical = false;
  nlohmann::json log = nlohmann::json::array();
  for (std::size_t k = 0; k < cases.size(); ++k) {
    const auto& c = cases[k];
    const NetworkConfig nc = cfg.network_config(c.method, c.classes);
    PainNetwork net = PainNetwork::build(nc, cfg.seed + k);
    if (auto off = net.task_weight_offset()) {
      // Nonzero task weights so the exp terms are exercised.
      for (std::size_t i = 0; i < 3; ++i) net.params()[*off + i] = 0.3 - 0.25 * static_cast<double>(i);
    }
    const Batch batch = random_batch(nc.input_dim, c.classes, 16, cfg.seed + 100 + k);
    TrainConfig tc = cfg.train_config();
    tc.loss_form = c.form;
    GradCheckOptions opt;
    opt.seed = cfg.seed + k;
    opt.corrupt_factor = corrupt;
    const GradCheckReport rep = gradient_check(net, batch, tc.loss_spec(), opt);
    std::printf("%-32s checked=%zu kinks=%zu max_rel_error=%.3e %s\n", c.name.c_str(), rep.checked,
                rep.kinks_skipped, rep.max_rel_error, rep.passed ? "PASS" : "FAIL");
    if (!rep.failure.empty()) std::printf("  %s\n", rep.failure.c_str());
    all_ok = all_ok && rep.passed;
    numerical = numerical || rep.numerical_failure;
    log.push_back({{"case", c.name},
                   {"checked", rep.checked},
                   {"kinks_skipped", rep.kinks_skipped},
                   {"max_rel_error", rep.max_rel_error},
                   {"passed", rep.passed},
                   {"failure", rep.failure}});
  }
  const fs::path dir(o.out);
  write_text(dir / "gradcheck.json", log.dump(2) + "\n");
  echo_config(cfg, dir);
  std::printf("gradcheck: %s\n", all_ok ? "PASS" : "FAIL");
  if (numerical) return kNumericalError;
  return all_ok ? kOk : kCheckFailed;
}

int cmd_train(const CommonOptions& o, const std::string& data, const std::string& task_name,
              const std::string& method_name) {
  const ExperimentConfig cfg = resolve_config(o);
  const TaskKind task = parse_task(task_name);
  const Method method = parse_method(method_name);
  const Dataset ds = load_dataset(data);
  if (!ds.has_features()) throw DataError(data + " has no HRV features; run extract-features first");
  TrainedModel model = train_on_dataset(ds, task, method, cfg);
  const fs::path out(o.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  model.session.checkpoint(cfg.training_hash()).save(out);
  nlohmann::json meta{{"task", to_string(task)},
                      {"method", to_string(method)},
                      {"windows", model.windows},
                      {"train_accuracy", model.train_accuracy},
                      {"config_hash", cfg.training_hash()},
                      {"normalizer", {{"mean", model.normalizer.mean}, {"std", model.normalizer.std}}}};
  fs::path meta_path = out;
  meta_path += ".json";
  write_text(meta_path, meta.dump(2) + "\n");
  echo_config(cfg, sidecar_dir(out));
  std::printf("trained %s on %s: %zu windows, training accuracy %.2f%%\n", std::string(to_string(method)).c_str(),
              std::string(to_string(task)).c_str(), model.windows, model.train_accuracy);
  return kOk;
}

int cmd_run_matrix(const CommonOptions& o, const std::string& data, std::string run_id) {
  const ExperimentConfig cfg = resolve_config(o);
  const Dataset ds = load_dataset(data);
  if (!ds.has_features()) throw DataError(data + " has no HRV features; run extract-features first");
  if (run_id.empty()) run_id = cfg.training_hash() + "-s" + std::to_string(cfg.seed);
  const fs::path dir = fs::path(o.out) / run_id;
  const MatrixResult res = run_matrix(ds, cfg, [](const MatrixCell& c) {
    if (c.report) {
      std::fprintf(stderr, "%s / %s / %s / %s: %.2f%%\n", std::string(to_string(c.scheme)).c_str(), c.group.c_str(),
                   std::string(to_string(c.method)).c_str(), std::string(to_string(c.task)).c_str(),
                   c.report->pooled_accuracy);
    } else {
      std::fprintf(stderr, "%s / %s / %s / %s: error: %s\n", std::string(to_string(c.scheme)).c_str(),
                   c.group.c_str(), std::string(to_string(c.method)).c_str(),
                   std::string(to_string(c.task)).c_str(), c.error.c_str());
    }
  });
  write_run(res, cfg, dir);
  const auto rows = matrix_rows(res);
  std::cout << render_tables(rows) << render_comparisons(rows);
  std::cout << "results in " << dir.string() << "\n";
  return kOk;
}

int cmd_report(const std::string& run_dir) {
  const auto rows = parse_matrix_csv(fs::path(run_dir) / "matrix.csv");
  std::cout << render_tables(rows) << render_comparisons(rows);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ECG to pain-intensity classification: QRS detection, HRV features, ST/MT networks, LOSO"};
  app.require_subcommand(1);

  CommonOptions synth_o, extract_o, detect_o, grad_o, train_o, matrix_o;

  auto* synth = app.add_subcommand("synth-cohort", "Generate a synthetic cohort with an injected pain effect");
  add_common(synth, synth_o, "Output directory");
  std::size_t n_subjects = 12;
  bool raw = false;
  synth->add_option("--subjects", n_subjects, "Number of subjects")->check(CLI::Range(2, 1000));
  synth->add_flag("--raw", raw, "Also write raw ECG files and raw.csv");

  auto* extract = app.add_subcommand("extract-features", "Detect beats and compute HRV features for a raw dataset");
  add_common(extract, extract_o, "Output feature CSV (rejects go to <out>.rejects.csv)");
  std::string extract_in;
  extract->add_option("--input", extract_in, "Raw-layout dataset CSV")->required()->check(CLI::ExistingFile);

  auto* detect = app.add_subcommand("detect", "Run QRS detection on one samples file");
  add_common(detect, detect_o, "Output text report");
  std::string detect_in, stages;
  double sample_rate = 512.0;
  detect->add_option("--input", detect_in, "Samples file")->required()->check(CLI::ExistingFile);
  detect->add_option("--sample-rate", sample_rate, "Sampling rate in Hz");
  detect->add_option("--stages", stages, "Write raw and intermediate filter stages to this CSV");

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of the network gradients");
  add_common(grad, grad_o, "Output directory");
  double corrupt = 1.0;
  grad->add_option("--corrupt-gradient", corrupt)->group("");

  auto* train = app.add_subcommand("train", "Train one network on a whole feature dataset and save a checkpoint");
  add_common(train, train_o, "Checkpoint path");
  std::string train_data, task_name = "NPvsP4", method_name = "ST-NN";
  train->add_option("--data", train_data, "Feature CSV")->required()->check(CLI::ExistingFile);
  train->add_option("--task", task_name, "NPvsP1..NPvsP4 or MC");
  train->add_option("--method", method_name, "ST-NN, ST-NN+F(G), ..., MT-NN+T(GA)");

  auto* matrix = app.add_subcommand("run-matrix", "LOSO over schemes x groups x methods x tasks");
  add_common(matrix, matrix_o, "Results root; the run goes to <out>/<run-id>/");
  std::string matrix_data, run_id;
  matrix->add_option("--data", matrix_data, "Feature CSV")->required()->check(CLI::ExistingFile);
  matrix->add_option("--run-id", run_id, "Run directory name (default: <config hash>-s<seed>)");

  auto* report = app.add_subcommand("report", "Render tables from a finished run");
  std::string report_dir;
  report->add_option("--run", report_dir, "Run directory containing matrix.csv")->required()->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (*synth) return cmd_synth_cohort(synth_o, n_subjects, raw);
    if (*extract) return cmd_extract(extract_o, extract_in);
    if (*detect) return cmd_detect(detect_o, detect_in, sample_rate, stages);
    if (*grad) return cmd_gradcheck(grad_o, corrupt);
    if (*train) return cmd_train(train_o, train_data, task_name, method_name);
    if (*matrix) return cmd_run_matrix(matrix_o, matrix_data, run_id);
    if (*report) return cmd_report(report_dir);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kNumericalError;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kDataError;
  }
  return kConfigError;
}
