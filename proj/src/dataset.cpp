// SPDX-License-Identifier: Apache-2.0
#include "hrvpain/dataset.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "hrvpain/error.hpp"

namespace hrvpain {

namespace fs = std::filesystem;

std::vector<SubjectInfo> Dataset::subjects() const {
  std::vector<SubjectInfo> out;
  std::map<std::string, std::size_t> index;
  for (const auto& r : records) {
    auto [it, inserted] = index.try_emplace(r.subject_id, out.size());
    if (inserted) out.push_back({r.subject_id, r.gender, r.age, {}});
    ++out[it->second].label_counts[static_cast<std::size_t>(r.label)];
  }
  return out;
}

bool Dataset::has_features() const {
  for (const auto& r : records) {
    if (!r.features) return false;
  }
  return !records.empty();
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

[[noreturn]] void row_error(std::size_t line, const std::string& what) {
  throw DataError("line " + std::to_string(line) + ": " + what);
}

double parse_double(const std::string& s, std::size_t line, const char* field) {
  double v = 0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
    row_error(line, std::string("invalid ") + field + " '" + s + "'");
  }
  return v;
}

int parse_int(const std::string& s, std::size_t line, const char* field) {
  int v = 0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) row_error(line, std::string("invalid ") + field + " '" + s + "'");
  return v;
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

Dataset load_dataset(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open dataset " + path.string());
  std::string line;
  if (!std::getline(is, line)) throw DataError("dataset " + path.string() + " is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const bool feature_mode = line == kFeatureCsvHeader;
  const bool raw_mode = line == kRawCsvHeader;
  if (!feature_mode && !raw_mode) throw DataError("line 1: unrecognised header '" + line + "'");
  const std::size_t n_fields = feature_mode ? 11 : 7;

  Dataset ds;
  std::set<std::pair<std::string, std::string>> keys;
  std::map<std::string, std::pair<Gender, int>> demographics;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv(line);
    if (f.size() != n_fields) {
      row_error(lineno, "expected " + std::to_string(n_fields) + " fields, got " + std::to_string(f.size()));
    }
    WindowRecord r;
    r.subject_id = f[0];
    if (r.subject_id.empty()) row_error(lineno, "empty subject_id");
    try {
      r.gender = parse_gender(f[1]);
      r.label = parse_pain_label(f[3]);
    } catch (const DataError& e) {
      row_error(lineno, e.what());
    }
    r.age = parse_int(f[2], lineno, "age");
    if (r.age < kMinAge || r.age > kMaxAge) {
      row_error(lineno, "age " + std::to_string(r.age) + " outside [20, 65]");
    }
    r.window_id = f[4];
    if (r.window_id.empty()) row_error(lineno, "empty window_id");
    if (!keys.emplace(r.subject_id, r.window_id).second) {
      row_error(lineno, "duplicate (subject, window) key (" + r.subject_id + ", " + r.window_id + ")");
    }
    const auto [it, inserted] = demographics.try_emplace(r.subject_id, r.gender, r.age);
    if (!inserted && (it->second.first != r.gender || it->second.second != r.age)) {
      row_error(lineno, "subject " + r.subject_id + " has inconsistent gender/age");
    }
    if (feature_mode) {
      std::array<double, kBaseFeatureCount> v{};
      for (std::size_t k = 0; k < kBaseFeatureCount; ++k) v[k] = parse_double(f[5 + k], lineno, "feature");
      r.features = FeatureVector::from_base(v);
    } else {
      r.sample_rate = parse_double(f[5], lineno, "sample_rate");
      if (!(r.sample_rate > 0)) row_error(lineno, "sample_rate must be positive");
      if (f[6].empty()) row_error(lineno, "empty samples_path");
      fs::path p(f[6]);
      r.samples_path = p.is_absolute() ? p : path.parent_path() / p;
    }
    ds.records.push_back(std::move(r));
  }
  if (ds.records.empty()) throw DataError("dataset " + path.string() + " has no rows");
  return ds;
}

void write_feature_csv(const Dataset& dataset, const fs::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path.string());
  os << kFeatureCsvHeader << '\n';
  for (const auto& r : dataset.records) {
    if (!r.features) throw DataError("record " + r.subject_id + "/" + r.window_id + " has no features");
    os << r.subject_id << ',' << to_string(r.gender) << ',' << r.age << ',' << to_string(r.label)
       << ',' << r.window_id;
    for (double v : r.features->base()) os << ',' << fmt_double(v);
    os << '\n';
  }
}

std::vector<double> read_samples(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open samples file " + path.string());
  std::vector<double> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto first = line.substr(0, line.find(','));
    double v = 0;
    const auto* end = first.data() + first.size();
    const auto [ptr, ec] = std::from_chars(first.data(), end, v);
    if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
      if (lineno == 1 && out.empty()) continue;  // header
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": invalid sample '" + first + "'");
    }
    out.push_back(v);
  }
  if (out.empty()) throw DataError("samples file " + path.string() + " has no samples");
  return out;
}

void write_samples(const std::vector<double>& samples, const fs::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path.string());
  for (double v : samples) os << fmt_double(v) << '\n';
}

SyntheticCohort generate_synthetic_cohort(std::size_t n_subjects, std::uint64_t seed,
                                          const CohortOptions& options) {
  if (n_subjects < 2) throw ConfigError("a synthetic cohort needs at least 2 subjects");
  if (options.windows_per_class == 0 || options.beats_per_window < 4) {
    throw ConfigError("cohort needs >= 1 window per class and >= 4 beats per window");
  }
  static constexpr std::array<std::pair<int, int>, 3> kBins{{{20, 35}, {36, 50}, {51, 65}}};

  SyntheticCohort out;
  out.dataset.provenance = Provenance::SyntheticCohort;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  for (std::size_t s = 0; s < n_subjects; ++s) {
    const Gender gender = s % 2 == 0 ? Gender::Male : Gender::Female;
    const auto [lo, hi] = kBins[(s / 2) % 3];
    const int age = lo + static_cast<int>(unif(rng) * (hi - lo + 1));
    char id[32];
    std::snprintf(id, sizeof id, "S%03zu", s + 1);
    const double base_ibi = 860.0 + options.subject_spread_ms * unit(rng);
    const double base_sd = 25.0 + 10.0 * (unif(rng) - 0.5);

    for (int level = 0; level < 5; ++level) {
      for (std::size_t w = 0; w < options.windows_per_class; ++w) {
        const double mean = base_ibi - level * options.ibi_shift_ms + 8.0 * unit(rng);
        const double sd = base_sd * (1.0 - 0.15 * level);
        std::vector<double> rr(options.beats_per_window);
        for (double& v : rr) v = std::max(300.0, mean + sd * unit(rng));

        WindowRecord r;
        r.subject_id = id;
        r.gender = gender;
        r.age = std::min(hi, age);
        r.label = static_cast<PainLabel>(level);
        char wid[32];
        std::snprintf(wid, sizeof wid, "w%03zu", level * options.windows_per_class + w);
        r.window_id = wid;
        r.sample_rate = options.sample_rate;
        // The first interval only places the first beat.
        r.features = compute_features(IbiSeries{{rr.begin() + 1, rr.end()}});
        out.dataset.records.push_back(std::move(r));
        out.rr_intervals_ms.push_back(std::move(rr));
      }
    }
  }
  return out;
}

fs::path export_raw_cohort(const SyntheticCohort& cohort, std::uint64_t seed, const fs::path& dir,
                           const CohortOptions& options) {
  fs::create_directories(dir / "ecg");
  const fs::path csv = dir / "raw.csv";
  std::ofstream os(csv, std::ios::binary);
  if (!os) throw DataError("cannot write " + csv.string());
  os << kRawCsvHeader << '\n';
  for (std::size_t i = 0; i < cohort.dataset.records.size(); ++i) {
    const auto& r = cohort.dataset.records[i];
    SyntheticEcgSpec spec;
    spec.rr_intervals_ms = cohort.rr_intervals_ms[i];
    spec.noise_std = options.noise_std;
    spec.sample_rate = options.sample_rate;
    const auto ecg = generate_synthetic_ecg(spec, mix(seed ^ (i + 1)));
    const std::string rel = "ecg/" + r.subject_id + "_" + r.window_id + ".txt";
    write_samples(ecg.record.samples, dir / rel);
    os << r.subject_id << ',' << to_string(r.gender) << ',' << r.age << ',' << to_string(r.label)
       << ',' << r.window_id << ',' << fmt_double(options.sample_rate) << ',' << rel << '\n';
  }
  return csv;
}

ExtractionResult extract_features(const Dataset& raw, const DetectorConfig& detector,
                                  const FeatureOptions& features) {
  ExtractionResult out;
  out.dataset.provenance = raw.provenance;
  for (const auto& r : raw.records) {
    if (!r.samples_path) throw DataError("record " + r.subject_id + "/" + r.window_id + " has no samples path");
    EcgRecord ecg;
    ecg.samples = read_samples(*r.samples_path);
    ecg.sample_rate = r.sample_rate;
    ecg.subject_id = r.subject_id;
    ecg.gender = r.gender;
    ecg.age = r.age;
    ecg.pain_label = r.label;
    try {
      const QrsResult q = detect_qrs(ecg, detector);
      const IbiSeries ibis = compute_ibis(q.r_indices, ecg.sample_rate);
      WindowRecord rec = r;
      rec.samples_path.reset();
      rec.features = compute_features(ibis, features);
      out.dataset.records.push_back(std::move(rec));
    } catch (const InsufficientBeatsError&) {
      out.rejects.push_back({r.subject_id, r.window_id, "insufficient-beats"});
    } catch (const FlatLineError&) {
      out.rejects.push_back({r.subject_id, r.window_id, "flat-line"});
    } catch (const DataError& e) {
      out.rejects.push_back({r.subject_id, r.window_id, e.what()});
    }
  }
  if (out.dataset.records.empty()) throw DataError("every window was rejected during feature extraction");
  return out;
}

}  // namespace hrvpain
