#pragma once

// File formats: data-cloud CSVs, serialized GMM sets, evaluation reports and
// trace CSVs. Parse failures throw ParseError with file:line context.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "wcv/evaluation.hpp"
#include "wcv/gmm_build.hpp"

namespace wcv::io {

namespace fs = std::filesystem;

/// Manifest CSV with columns id,path,label (header optional). Each path is
/// resolved against the manifest's directory and names a CSV of points, one
/// row per point (header optional).
std::vector<DataCloud> read_manifest(const fs::path& manifest);

/// Long-format CSV: id,label,x1,...,xd, one row per point (header optional).
/// Instances appear in order of first occurrence.
std::vector<DataCloud> read_long_csv(const fs::path& path);

/// Points of one instance file.
Eigen::MatrixXd read_points_csv(const fs::path& path);

/// Output files held in memory until every one of them has been produced.
using FileSet = std::map<fs::path, std::string>;

/// Writes every file (creating parent directories); each goes to a temporary
/// name first and is renamed into place.
void write_files(const FileSet& files);

/// index.json plus one JSON file per instance, relative to `dir`.
FileSet gmm_set_files(const fs::path& dir, const std::vector<LabeledSample>& samples, const nlohmann::json& config);
/// Reads a set written by gmm_set_files; `path` is the directory or its index.json.
std::vector<LabeledSample> read_gmm_set(const fs::path& path);

nlohmann::json report_to_json(const EvaluationReport& report);

/// Tidy trace CSV whose comment header names the projection mode and echoes
/// the config. Rows cover every fold's OTAF trace; NaN is written as NA.
std::string traces_csv(const std::vector<FoldOutcome>& folds, bool orthonormal, const nlohmann::json& config);
/// Same layout for a single fit (fold column = "all").
std::string trace_csv(const OtafResult& result, bool orthonormal, const nlohmann::json& config);

/// Shortest round-trip decimal for doubles, "NA" for NaN.
std::string format_double(double x);

/// Serialized JSON text with a trailing newline.
std::string dump(const nlohmann::json& j);

}  // namespace wcv::io
