// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "hrvpain/config.hpp"
#include "hrvpain/dataset.hpp"
#include "hrvpain/error.hpp"

using namespace hrvpain;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / "hrvpain_tests" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream os(p);
  os << text;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::string feature_rows(const std::string& subject, const char* gender, int age, int n) {
  static const char* labels[] = {"NP", "P1", "P2", "P3", "P4"};
  std::string out;
  for (int i = 0; i < n; ++i) {
    out += subject + "," + gender + "," + std::to_string(age) + "," + labels[i % 5] + ",w" + std::to_string(i) +
           ",800,20,15,0.5,1.3,75\n";
  }
  return out;
}

}  // namespace

TEST_CASE("config round trip and defaults") {
  const ExperimentConfig d;
  CHECK(d.nn.epochs == 300);
  CHECK(d.nn.warmup_epochs == 50);
  CHECK(d.nn.learning_rate == 1e-3);
  CHECK(d.nn.weight_decay == 0.1);
  CHECK(d.nn.label_smoothing == 0.1);
  CHECK(d.nn.ema);
  CHECK(d.mtl.loss_form == LossForm::KendallCorrected);
  const auto back = ExperimentConfig::from_json(d.to_json());
  CHECK(back.to_json() == d.to_json());
}

TEST_CASE("unknown config keys are rejected") {
  CHECK_THROWS_AS(ExperimentConfig::from_json({{"epochs", 3}}), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json({{"nn", {{"epoch", 3}}}}), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json({{"detector", {{"foo", 1}}}}), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json({{"methods", {"ST-NN", "XGBoost"}}}), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json({{"nn", {{"epochs", "many"}}}}), ConfigError);
}

TEST_CASE("overrides") {
  ExperimentConfig c;
  // A lone epochs override below the default warmup is invalid.
  CHECK_THROWS_AS(c.apply_override("nn.epochs=12"), ConfigError);
  c.apply_overrides({"nn.epochs=12", "nn.warmup_epochs=2"});
  c.apply_override("loss_form=paper-literal");
  c.apply_override("c2=0.5");
  c.apply_override(R"x(methods=["ST-NN","MT-NN+T(GA)"])x");
  c.apply_override("detector.refractory_ms=220");
  CHECK(c.nn.epochs == 12);
  CHECK(c.mtl.loss_form == LossForm::PaperLiteral);
  CHECK(c.mtl.c2 == 0.5);
  CHECK(c.methods == std::vector<Method>{Method::StNn, Method::MtNnTGA});
  CHECK(c.detector.refractory_ms == 220);
  CHECK_THROWS_AS(c.apply_override("nn.nonsense=1"), ConfigError);
  CHECK_THROWS_AS(c.apply_override("no_equals_sign"), ConfigError);
  CHECK_THROWS_AS(c.apply_override("nn..epochs=1"), ConfigError);
  // Individually invalid steps are fine when the final result is valid.
  ExperimentConfig d;
  d.apply_overrides({"nn.epochs=10", "nn.warmup_epochs=2"});
  CHECK(d.nn.epochs == 10);
  CHECK_THROWS_AS(d.apply_overrides({"nn.epochs=2"}), ConfigError);
}

TEST_CASE("config file loading") {
  const auto dir = scratch("cfg");
  write(dir / "ok.json", R"({"seed": 9, "nn": {"epochs": 20, "warmup_epochs": 4}})");
  const auto c = ExperimentConfig::load(dir / "ok.json");
  CHECK(c.seed == 9);
  CHECK(c.nn.epochs == 20);
  CHECK(c.nn.learning_rate == 1e-3);
  write(dir / "bad.json", "{ not json");
  CHECK_THROWS_AS(ExperimentConfig::load(dir / "bad.json"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::load(dir / "missing.json"), ConfigError);
}

TEST_CASE("training hash covers training settings only") {
  ExperimentConfig a;
  ExperimentConfig b = a;
  b.workers = 8;
  b.methods = {Method::MtNnTA};
  b.tasks = {TaskKind::MultiClass};
  CHECK(a.training_hash() == b.training_hash());
  b.nn.learning_rate = 2e-3;
  CHECK(a.training_hash() != b.training_hash());
  CHECK(a.training_hash().size() == 16);
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
}

TEST_CASE("augmented methods change only the input dimension") {
  const ExperimentConfig c;
  auto base = c.network_config(Method::StNn, 2).to_json();
  for (Method m : {Method::StNnFG, Method::StNnFA, Method::StNnFGA}) {
    auto j = c.network_config(m, 2).to_json();
    CHECK(j["input_dim"] != base["input_dim"]);
    j["input_dim"] = base["input_dim"];
    CHECK(j == base);
  }
  CHECK(c.network_config(Method::StNnFGA, 2).input_dim == 8);
  CHECK(c.network_config(Method::StNnFG, 2).input_dim == 7);
}

TEST_CASE("feature CSV loading") {
  const auto dir = scratch("load");
  write(dir / "two.csv", std::string(kFeatureCsvHeader) + "\n" + feature_rows("A", "M", 30, 5) +
                             feature_rows("B", "F", 50, 5));
  const auto ds = load_dataset(dir / "two.csv");
  CHECK(ds.records.size() == 10);
  CHECK(ds.subjects().size() == 2);
  CHECK(ds.has_features());

  write(dir / "young.csv", std::string(kFeatureCsvHeader) + "\n" + feature_rows("A", "M", 30, 3) +
                               feature_rows("B", "F", 19, 1));
  try {
    load_dataset(dir / "young.csv");
    FAIL("expected a DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 5") != std::string::npos);
  }

  write(dir / "dup.csv", std::string(kFeatureCsvHeader) + "\n" + feature_rows("A", "M", 30, 2) +
                             feature_rows("A", "M", 30, 1));
  CHECK_THROWS_AS(load_dataset(dir / "dup.csv"), DataError);
  write(dir / "mixed.csv", std::string(kFeatureCsvHeader) + "\n" + feature_rows("A", "M", 30, 1) +
                               "A,F,30,P1,w9,800,20,15,0.5,1.3,75\n");
  CHECK_THROWS_AS(load_dataset(dir / "mixed.csv"), DataError);
  write(dir / "label.csv", std::string(kFeatureCsvHeader) + "\nA,M,30,P5,w0,800,20,15,0.5,1.3,75\n");
  CHECK_THROWS_AS(load_dataset(dir / "label.csv"), DataError);
  write(dir / "header.csv", "a,b,c\n");
  CHECK_THROWS_AS(load_dataset(dir / "header.csv"), DataError);
}

TEST_CASE("cohort-sized file loads") {
  const auto dir = scratch("big");
  std::string text = std::string(kFeatureCsvHeader) + "\n";
  for (int s = 0; s < 87; ++s) {
    text += feature_rows("S" + std::to_string(s), s < 44 ? "M" : "F", 20 + s % 46, 100);
  }
  write(dir / "biovid_shaped.csv", text);
  const auto ds = load_dataset(dir / "biovid_shaped.csv");
  CHECK(ds.subjects().size() == 87);
  CHECK(ds.records.size() == 8700);
}

TEST_CASE("synthetic cohort construction") {
  const auto c = generate_synthetic_cohort(6, 3);
  const auto subjects = c.dataset.subjects();
  CHECK(subjects.size() == 6);
  CHECK(c.dataset.records.size() == 600);
  for (const auto& s : subjects) {
    for (auto n : s.label_counts) CHECK(n == 20);
  }
  const auto again = generate_synthetic_cohort(6, 3);
  const auto dir = scratch("cohort");
  write_feature_csv(c.dataset, dir / "a.csv");
  write_feature_csv(again.dataset, dir / "b.csv");
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
  const auto reread = load_dataset(dir / "a.csv");
  write_feature_csv(reread, dir / "c.csv");
  CHECK(slurp(dir / "a.csv") == slurp(dir / "c.csv"));
  CHECK_THROWS_AS(generate_synthetic_cohort(1, 3), ConfigError);
}

TEST_CASE("raw export and feature extraction") {
  CohortOptions opt;
  opt.windows_per_class = 2;
  const auto c = generate_synthetic_cohort(2, 5, opt);
  const auto dir = scratch("raw");
  const auto csv = export_raw_cohort(c, 5, dir, opt);
  const auto raw = load_dataset(csv);
  CHECK_FALSE(raw.has_features());
  const auto res = extract_features(raw, {}, {});
  CHECK(res.rejects.empty());
  CHECK(res.dataset.records.size() == raw.records.size());
  // Extracted features track the generator's IBIs.
  for (std::size_t i = 0; i < res.dataset.records.size(); ++i) {
    CHECK(res.dataset.records[i].features->mean_ibi_ms ==
          doctest::Approx(c.dataset.records[i].features->mean_ibi_ms).epsilon(0.01));
  }
  const auto again = extract_features(raw, {}, {});
  write_feature_csv(res.dataset, dir / "f1.csv");
  write_feature_csv(again.dataset, dir / "f2.csv");
  CHECK(slurp(dir / "f1.csv") == slurp(dir / "f2.csv"));
}

TEST_CASE("windows with too few beats are rejected with a reason") {
  const auto dir = scratch("rejects");
  SyntheticEcgSpec spec;
  spec.noise_std = 0.01;
  spec.rr_intervals_ms = {1000, 1000, 1000, 1000};
  write_samples(generate_synthetic_ecg(spec, 1).record.samples, dir / "ok.txt");
  // Two beats and a long flat tail: two detections only.
  spec.rr_intervals_ms = {1000, 1000};
  auto two = generate_synthetic_ecg(spec, 2).record.samples;
  two.resize(2048, 0.0);
  write_samples(two, dir / "two.txt");
  write_samples(std::vector<double>(3000, 0.25), dir / "flat.txt");
  write(dir / "raw.csv", std::string(kRawCsvHeader) + "\nA,M,30,NP,w0,512,ok.txt\nA,M,30,P1,w1,512,two.txt\n" +
                             "A,M,30,P2,w2,512,flat.txt\n");
  const auto res = extract_features(load_dataset(dir / "raw.csv"), {}, {});
  CHECK(res.dataset.records.size() == 1);
  REQUIRE(res.rejects.size() == 2);
  CHECK(res.rejects[0].window_id == "w1");
  CHECK(res.rejects[0].reason == "insufficient-beats");
  CHECK(res.rejects[1].reason == "flat-line");

  write(dir / "allbad.csv", std::string(kRawCsvHeader) + "\nA,M,30,NP,w0,512,flat.txt\n");
  CHECK_THROWS_AS(extract_features(load_dataset(dir / "allbad.csv"), {}, {}), DataError);
}

TEST_CASE("samples files") {
  const auto dir = scratch("samples");
  write(dir / "hdr.csv", "ecg,other\n1.5,9\n-2,9\n");
  CHECK(read_samples(dir / "hdr.csv") == std::vector<double>{1.5, -2});
  write(dir / "bad.txt", "1\nabc\n");
  CHECK_THROWS_AS(read_samples(dir / "bad.txt"), DataError);
  CHECK_THROWS_AS(read_samples(dir / "none.txt"), DataError);
}
