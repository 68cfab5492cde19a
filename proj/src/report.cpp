// SPDX-License-Identifier: Apache-2.0
#include "hrvpain/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "hrvpain/error.hpp"

namespace hrvpain {

namespace fs = std::filesystem;

namespace {

constexpr const char* kMatrixHeader =
    "scheme,group,method,task,accuracy,windows,folds,skipped_folds,config_hash,seed,status";

std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string csv_safe(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path.string());
  os << text;
}

}  // namespace

std::string path_component(std::string_view name) {
  std::string out;
  for (char c : name) {
    if (c == ' ' || c == '/' || c == '\\') {
      out.push_back('_');
    } else if (c == '(' || c == ')') {
      continue;
    } else {
      out.push_back(c);
    }
  }
  return out;
}

std::vector<MatrixRow> matrix_rows(const MatrixResult& result) {
  std::vector<MatrixRow> rows;
  for (const auto& c : result.cells) {
    MatrixRow r;
    r.scheme = std::string(to_string(c.scheme));
    r.group = c.group;
    r.method = std::string(to_string(c.method));
    r.task = std::string(to_string(c.task));
    r.config_hash = result.config_hash;
    if (c.report) {
      r.accuracy = c.report->pooled_accuracy;
      r.windows = c.report->total_windows;
      r.folds = c.report->folds.size();
      r.skipped_folds = c.report->skipped_folds;
      r.seed = c.report->seed;
      r.status = "ok";
    } else {
      r.status = c.error;
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string render_matrix_csv(const std::vector<MatrixRow>& rows) {
  std::ostringstream os;
  os << kMatrixHeader << '\n';
  for (const auto& r : rows) {
    os << r.scheme << ',' << r.group << ',' << r.method << ',' << r.task << ','
       << (r.accuracy ? fmt2(*r.accuracy) : "") << ',' << r.windows << ',' << r.folds << ','
       << r.skipped_folds << ',' << r.config_hash << ',' << r.seed << ',' << csv_safe(r.status) << '\n';
  }
  return os.str();
}

std::vector<MatrixRow> parse_matrix_csv(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open " + path.string());
  std::string line;
  std::getline(is, line);
  if (line != kMatrixHeader) throw DataError(path.string() + ": not a matrix.csv file");
  std::vector<MatrixRow> rows;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (line.back() == ',') f.emplace_back();
    if (f.size() != 11) throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected 11 fields");
    MatrixRow r;
    r.scheme = f[0];
    r.group = f[1];
    r.method = f[2];
    r.task = f[3];
    try {
      if (!f[4].empty()) r.accuracy = std::stod(f[4]);
      r.windows = std::stoul(f[5]);
      r.folds = std::stoul(f[6]);
      r.skipped_folds = std::stoul(f[7]);
      r.seed = std::stoull(f[9]);
    } catch (const std::exception&) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": malformed numeric field");
    }
    r.config_hash = f[8];
    r.status = f[10];
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string render_tables(const std::vector<MatrixRow>& rows) {
  std::vector<std::string> schemes;
  for (const auto& r : rows) {
    if (std::find(schemes.begin(), schemes.end(), r.scheme) == schemes.end()) schemes.push_back(r.scheme);
  }
  std::ostringstream os;
  for (const auto& scheme : schemes) {
    // Row keys in first-appearance order; task columns in canonical order.
    std::vector<std::pair<std::string, std::string>> keys;
    std::map<std::pair<std::string, std::string>, std::map<std::string, std::string>> cells;
    std::vector<std::string> tasks;
    for (const auto& r : rows) {
      if (r.scheme != scheme) continue;
      const auto key = std::make_pair(r.group, r.method);
      if (!cells.count(key)) keys.push_back(key);
      cells[key][r.task] = r.accuracy ? fmt2(*r.accuracy) : "ERR";
      if (std::find(tasks.begin(), tasks.end(), r.task) == tasks.end()) tasks.push_back(r.task);
    }
    std::sort(tasks.begin(), tasks.end(), [](const std::string& a, const std::string& b) {
      return parse_task(a) < parse_task(b);
    });

    std::vector<std::string> header{"Group", "Algorithm", "Aux."};
    for (const auto& t : tasks) header.emplace_back(task_title(parse_task(t)));
    std::vector<std::vector<std::string>> table;
    for (const auto& key : keys) {
      const Method m = parse_method(key.second);
      std::vector<std::string> line{key.first, std::string(method_algorithm(m)), std::string(method_aux(m))};
      for (const auto& t : tasks) {
        const auto it = cells[key].find(t);
        line.push_back(it == cells[key].end() ? "-" : it->second);
      }
      table.push_back(std::move(line));
    }
    std::vector<std::size_t> width(header.size());
    for (std::size_t i = 0; i < header.size(); ++i) width[i] = header[i].size();
    for (const auto& line : table) {
      for (std::size_t i = 0; i < line.size(); ++i) width[i] = std::max(width[i], line[i].size());
    }
    auto emit = [&](const std::vector<std::string>& line) {
      for (std::size_t i = 0; i < line.size(); ++i) {
        if (i) os << " | ";
        os << line[i] << std::string(width[i] - line[i].size(), ' ');
      }
      os << '\n';
    };
    os << "Scheme: " << scheme << " (% accuracy, pooled over held-out windows)\n";
    emit(header);
    std::size_t total = 0;
    for (auto w : width) total += w;
    os << std::string(total + 3 * (width.size() - 1), '-') << '\n';
    for (const auto& line : table) emit(line);
    os << '\n';
  }
  return os.str();
}

std::string render_comparisons(const std::vector<MatrixRow>& rows) {
  std::map<std::pair<std::string, std::string>, std::vector<MethodRow>> by_group;
  std::vector<std::pair<std::string, std::string>> order;
  for (const auto& r : rows) {
    if (!r.accuracy) continue;
    const auto key = std::make_pair(r.scheme, r.group);
    if (!by_group.count(key)) order.push_back(key);
    auto& methods = by_group[key];
    auto it = std::find_if(methods.begin(), methods.end(), [&](const MethodRow& m) { return m.method == r.method; });
    if (it == methods.end()) {
      methods.push_back({r.method, {}});
      it = methods.end() - 1;
    }
    it->accuracy[r.task] = *r.accuracy;
  }
  std::ostringstream os;
  for (const auto& key : order) {
    const auto& methods = by_group[key];
    try {
      const auto cmp = compare_methods(methods);
      os << "Mean over tasks, " << key.first << " / " << key.second << ":\n";
      for (const auto& [m, mean] : cmp.means) os << "  " << m << ": " << fmt2(mean) << '\n';
      if (methods.size() > 1) {
        for (const auto& [m, mean] : cmp.means) {
          if (m == cmp.means.front().first) continue;
          os << "  " << m << " - " << cmp.means.front().first << ": " << fmt2(mean - cmp.means.front().second) << '\n';
        }
      }
    } catch (const Error& e) {
      os << "Mean over tasks, " << key.first << " / " << key.second << ": " << e.what() << '\n';
    }
  }
  return os.str();
}

void write_run(const MatrixResult& result, const ExperimentConfig& config, const fs::path& run_dir) {
  fs::create_directories(run_dir);
  const auto rows = matrix_rows(result);
  write_text(run_dir / "matrix.csv", render_matrix_csv(rows));
  write_text(run_dir / "matrix.txt", render_tables(rows) + render_comparisons(rows));
  write_text(run_dir / "effective_config.json", config.to_json().dump(2) + "\n");
  for (const auto& c : result.cells) {
    if (!c.report) continue;
    const fs::path dir = run_dir / "folds" / path_component(c.group) /
                         std::string(to_string(c.task));
    fs::create_directories(dir);
    write_text(dir / (path_component(to_string(c.method)) + ".json"), c.report->to_json().dump(2) + "\n");
  }
}

}  // namespace hrvpain
