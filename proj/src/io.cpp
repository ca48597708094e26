#include "wcv/io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "wcv/error.hpp"

namespace wcv::io {

namespace {

[[noreturn]] void parse_fail(const fs::path& file, std::size_t line, const std::string& msg) {
  throw Error(ErrorCode::ParseError, file.string() + ":" + std::to_string(line) + ": " + msg);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

bool parse_number(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  errno = 0;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && errno == 0 && std::isfinite(out);
}

bool parse_label(const std::string& s, int& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  errno = 0;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (end != s.c_str() + s.size() || errno != 0 || v < 0 || v > 1'000'000) return false;
  out = static_cast<int>(v);
  return true;
}

// Non-empty, non-comment lines with their 1-based line numbers.
std::vector<std::pair<std::size_t, std::string>> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, path.string() + ": cannot open file");
  std::vector<std::pair<std::size_t, std::string>> out;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    out.emplace_back(no, t);
  }
  return out;
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, path.string() + ": cannot open file");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

std::string instance_file_name(std::size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "gmm_%05zu.json", k);
  return buf;
}

nlohmann::json doubles(const std::vector<double>& v) {
  nlohmann::json a = nlohmann::json::array();
  for (const double x : v) a.push_back(std::isnan(x) ? nlohmann::json(nullptr) : nlohmann::json(x));
  return a;
}

nlohmann::json matrix_rows(const Eigen::MatrixXd& m) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    a.push_back(std::move(row));
  }
  return a;
}

void append_trace_rows(std::string& out, const std::string& fold, const std::vector<double>& fisher,
                       const std::vector<double>& grassmann) {
  for (std::size_t t = 0; t < fisher.size(); ++t) {
    const double g = t < grassmann.size() ? grassmann[t] : std::nan("");
    out += fold + "," + std::to_string(t) + "," + format_double(fisher[t]) + "," + format_double(g) + "\n";
  }
}

std::string trace_header(bool orthonormal, const nlohmann::json& config) {
  return std::string("# projection: ") + (orthonormal ? "orthonormal" : "non-orthonormal") + "\n# config: " +
         config.dump() + "\nfold,iteration,fisher_ratio,grassmann_distance\n";
}

}  // namespace

Eigen::MatrixXd read_points_csv(const fs::path& path) {
  const auto lines = read_lines(path);
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto cells = split(lines[i].second);
    std::vector<double> row(cells.size());
    bool numeric = true;
    for (std::size_t c = 0; c < cells.size(); ++c) numeric = numeric && parse_number(cells[c], row[c]);
    if (!numeric) {
      if (i == 0) continue;  // header
      parse_fail(path, lines[i].first, "expected finite numbers");
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      parse_fail(path, lines[i].first, "expected " + std::to_string(rows.front().size()) + " columns, found " +
                                           std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorCode::EmptyCloud, path.string() + ": no points");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  }
  return m;
}

std::vector<DataCloud> read_manifest(const fs::path& manifest) {
  const auto lines = read_lines(manifest);
  const fs::path base = manifest.parent_path();
  std::vector<DataCloud> clouds;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto cells = split(lines[i].second);
    if (i == 0 && cells.size() == 3 && cells[0] == "id") continue;
    if (cells.size() != 3) parse_fail(manifest, lines[i].first, "expected id,path,label");
    int label = 0;
    if (!parse_label(cells[2], label)) parse_fail(manifest, lines[i].first, "invalid label '" + cells[2] + "'");
    if (cells[0].empty()) parse_fail(manifest, lines[i].first, "empty id");
    const fs::path p = fs::path(cells[1]).is_absolute() ? fs::path(cells[1]) : base / cells[1];
    clouds.push_back({cells[0], read_points_csv(p), label});
  }
  if (clouds.empty()) throw Error(ErrorCode::ParseError, manifest.string() + ": no instances");
  validate_clouds(clouds);
  return clouds;
}

std::vector<DataCloud> read_long_csv(const fs::path& path) {
  const auto lines = read_lines(path);
  std::vector<std::string> ids;
  std::vector<int> labels;
  std::vector<std::vector<std::vector<double>>> points;
  std::unordered_map<std::string, std::size_t> index;
  std::size_t width = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto cells = split(lines[i].second);
    if (cells.size() < 3) parse_fail(path, lines[i].first, "expected id,label and at least one feature");
    std::vector<double> row(cells.size() - 2);
    bool numeric = true;
    for (std::size_t c = 2; c < cells.size(); ++c) numeric = numeric && parse_number(cells[c], row[c - 2]);
    int label = 0;
    const bool label_ok = parse_label(cells[1], label);
    if (i == 0 && (!numeric || !label_ok)) continue;  // header
    if (!label_ok) parse_fail(path, lines[i].first, "invalid label '" + cells[1] + "'");
    if (!numeric) parse_fail(path, lines[i].first, "expected finite numbers");
    if (width == 0) width = row.size();
    if (row.size() != width) parse_fail(path, lines[i].first, "inconsistent number of features");
    auto [it, fresh] = index.emplace(cells[0], ids.size());
    if (fresh) {
      ids.push_back(cells[0]);
      labels.push_back(label);
      points.emplace_back();
    } else if (labels[it->second] != label) {
      parse_fail(path, lines[i].first, "label of '" + cells[0] + "' changes");
    }
    points[it->second].push_back(std::move(row));
  }
  if (ids.empty()) throw Error(ErrorCode::ParseError, path.string() + ": no instances");
  std::vector<DataCloud> clouds;
  for (std::size_t k = 0; k < ids.size(); ++k) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(points[k].size()), static_cast<Eigen::Index>(width));
    for (std::size_t r = 0; r < points[k].size(); ++r) {
      for (std::size_t c = 0; c < width; ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = points[k][r][c];
    }
    clouds.push_back({ids[k], std::move(m), labels[k]});
  }
  return clouds;
}

void write_files(const FileSet& files) {
  for (const auto& [path, text] : files) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw Error(ErrorCode::InvalidInput, "cannot write " + tmp.string());
      out << text;
      if (!out.flush()) throw Error(ErrorCode::InvalidInput, "cannot write " + tmp.string());
    }
    fs::rename(tmp, path);
  }
}

FileSet gmm_set_files(const fs::path& dir, const std::vector<LabeledSample>& samples, const nlohmann::json& config) {
  FileSet files;
  nlohmann::json entries = nlohmann::json::array();
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const std::string name = instance_file_name(k);
    nlohmann::json j = to_json(samples[k].distribution);
    j["id"] = samples[k].id;
    j["label"] = samples[k].label;
    j["format"] = "wcv.gmm.v1";
    files[dir / name] = dump(j);
    entries.push_back({{"id", samples[k].id}, {"label", samples[k].label}, {"file", name}});
  }
  files[dir / "index.json"] = dump({{"format", "wcv.gmm_set.v1"}, {"config", config}, {"instances", entries}});
  return files;
}

std::vector<LabeledSample> read_gmm_set(const fs::path& path) {
  const fs::path index_path = fs::is_directory(path) ? path / "index.json" : path;
  const nlohmann::json index = read_json(index_path);
  if (index.value("format", "") != "wcv.gmm_set.v1" || !index.contains("instances") || !index["instances"].is_array()) {
    throw Error(ErrorCode::ParseError, index_path.string() + ": not a GMM set index");
  }
  std::vector<LabeledSample> out;
  for (const auto& e : index["instances"]) {
    try {
      const fs::path file = index_path.parent_path() / e.at("file").get<std::string>();
      const nlohmann::json j = read_json(file);
      const auto id = e.at("id").get<std::string>();
      const int label = e.at("label").get<int>();
      if (j.value("id", id) != id || j.value("label", label) != label) {
        throw Error(ErrorCode::IdMismatch, file.string() + ": id or label differs from the index");
      }
      if (label < 0) throw Error(ErrorCode::ParseError, file.string() + ": negative label");
      try {
        out.push_back({id, gmm_from_json(j), label});
      } catch (const Error& err) {
        throw Error(ErrorCode::ParseError, file.string() + ": " + err.what());
      }
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorCode::ParseError, index_path.string() + ": " + ex.what());
    }
  }
  if (out.empty()) throw Error(ErrorCode::ParseError, index_path.string() + ": no instances");
  return out;
}

nlohmann::json report_to_json(const EvaluationReport& report) {
  nlohmann::json folds = nlohmann::json::array();
  for (const auto& f : report.folds) {
    char hash[17];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(f.training_hash));
    nlohmann::json j = {{"index", f.index}, {"id", f.id}, {"true_label", f.true_label}, {"skipped", f.skipped},
                        {"training_hash", hash}};
    if (f.skipped) {
      j["skip_reason"] = f.skip_reason;
    } else {
      j["posterior"] = doubles(std::vector<double>(f.posterior.data(), f.posterior.data() + f.posterior.size()));
      j["predicted_label"] = f.predicted;
    }
    if (!f.fisher_trace.empty()) {
      j["fisher_trace"] = doubles(f.fisher_trace);
      j["grassmann_trace"] = doubles(f.grassmann_trace);
      j["iterations"] = f.iterations;
      j["converged"] = f.converged;
      j["best_iteration"] = f.best_iteration;
      j["projection"] = matrix_rows(f.projection);
    }
    folds.push_back(std::move(j));
  }
  auto num = [](double x) { return std::isnan(x) ? nlohmann::json(nullptr) : nlohmann::json(x); };
  return {{"num_classes", report.num_classes},
          {"folds_total", report.folds.size()},
          {"folds_skipped", report.skipped},
          {"accuracy", num(report.accuracy)},
          {"auc", num(report.auc)},
          {"folds", folds}};
}

std::string traces_csv(const std::vector<FoldOutcome>& folds, bool orthonormal, const nlohmann::json& config) {
  std::string out = trace_header(orthonormal, config);
  for (const auto& f : folds) append_trace_rows(out, std::to_string(f.index), f.fisher_trace, f.grassmann_trace);
  return out;
}

std::string trace_csv(const OtafResult& result, bool orthonormal, const nlohmann::json& config) {
  std::string out = trace_header(orthonormal, config);
  append_trace_rows(out, "all", result.fisher_trace, result.grassmann_trace);
  return out;
}

std::string format_double(double x) {
  if (std::isnan(x)) return "NA";
  if (std::isinf(x)) return x > 0 ? "Inf" : "-Inf";
  char buf[40];
  for (int precision = 15; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

}  // namespace wcv::io
