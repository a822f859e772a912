#pragma once

#include <string>
#include <vector>

namespace spectra {

/// Markdown table of a training step log (subsampled to ~20 rows).
std::string render_log_table(const std::string& csv_path);

/// Markdown table with one row per eval report JSON.
std::string render_eval_table(const std::vector<std::string>& json_paths);

/// Markdown table of a merge-ratio CSV.
std::string render_ratio_table(const std::string& csv_path);

}  // namespace spectra
