#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace wbsgd {

struct PlotScripts {
  std::vector<std::filesystem::path> scripts;
  std::string message;  // set when nothing was written
};

/// Writes matplotlib scripts next to the CSVs of an experiment or batch-study
/// output directory. The scripts locate their CSVs relative to their own
/// path. Throws wbsgd::Error naming the column when a CSV lacks one the
/// scripts need.
PlotScripts emit_plots(const std::filesystem::path& csv_dir);

}  // namespace wbsgd
