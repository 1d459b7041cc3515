#include "wbsgd/plots.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "wbsgd/errors.hpp"

namespace wbsgd {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> read_header(const fs::path& file) {
  std::ifstream is(file);
  if (!is) throw Error("cannot read " + file.string());
  std::string line;
  std::getline(is, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> cols;
  std::stringstream ss(line);
  for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
  return cols;
}

void require_columns(const fs::path& file, const std::vector<std::string>& needed) {
  const auto cols = read_header(file);
  for (const auto& n : needed)
    if (std::find(cols.begin(), cols.end(), n) == cols.end())
      throw Error("missing column '" + n + "' in " + file.string());
}

std::string py_list(const std::vector<std::string>& items) {
  std::string s = "[";
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) s += ", ";
    s += '"' + items[i] + '"';
  }
  return s + "]";
}

void write_script(const fs::path& file, const std::string& body, std::vector<fs::path>& out) {
  std::ofstream os(file);
  if (!os) throw Error("cannot write " + file.string());
  os << body;
  out.push_back(file);
}

const char* kPrelude = R"(#!/usr/bin/env python3
import csv
import glob
import math
import os
from collections import defaultdict

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))


def read_rows(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def mean_curve(key, metric):
    sums = defaultdict(float)
    counts = defaultdict(int)
    for path in sorted(glob.glob(os.path.join(HERE, "traces", key, "trial_*.csv"))):
        for row in read_rows(path):
            it = int(row["iteration"])
            sums[it] += float(row[metric])
            counts[it] += 1
    its = sorted(sums)
    return its, [sums[i] / counts[i] for i in its]

)";

}  // namespace

PlotScripts emit_plots(const fs::path& csv_dir) {
  PlotScripts result;
  if (!fs::is_directory(csv_dir)) throw Error("not a directory: " + csv_dir.string());

  std::vector<std::string> keys;
  std::string metric;
  const fs::path traces = csv_dir / "traces";
  if (fs::is_directory(traces)) {
    for (const auto& entry : fs::directory_iterator(traces)) {
      if (!entry.is_directory()) continue;
      bool any = false;
      for (const auto& f : fs::directory_iterator(entry.path())) {
        if (f.path().extension() != ".csv") continue;
        const auto cols = read_header(f.path());
        const bool gap = std::find(cols.begin(), cols.end(), "objective_gap") != cols.end();
        const std::string m = gap ? "objective_gap" : "l2_error";
        require_columns(f.path(), {"trial", "iteration", m, "flops_shared", "flops_single"});
        if (metric.empty()) metric = m;
        any = true;
      }
      if (any) keys.push_back(entry.path().filename().string());
    }
  }
  std::sort(keys.begin(), keys.end());
  const fs::path summary = csv_dir / "summary.csv";
  const fs::path study = csv_dir / "batch_study.csv";

  if (keys.empty() && !fs::exists(study)) {
    result.message = "no trace CSVs under " + traces.string() + "; no plot scripts written";
    return result;
  }

  if (!keys.empty()) {
    std::string body = kPrelude;
    body += "KEYS = " + py_list(keys) + "\nMETRIC = \"" + metric + "\"\n\n";
    body += R"(fig, ax = plt.subplots(figsize=(7, 5))
for key in KEYS:
    its, vals = mean_curve(key, METRIC)
    ax.semilogy(its, vals, label=key)
ax.set_xlabel("iteration")
ax.set_ylabel("mean " + METRIC.replace("_", " "))
ax.legend(fontsize="small")
fig.tight_layout()
fig.savefig(os.path.join(HERE, "curves.png"), dpi=150)
)";
    write_script(csv_dir / "plot_curves.py", body, result.scripts);
  }

  if (fs::exists(summary)) {
    require_columns(summary, {"config", "iterations_median", "speedup_vs_baseline"});
    std::string body = kPrelude;
    body += R"(rows = [r for r in read_rows(os.path.join(HERE, "summary.csv"))
        if math.isfinite(float(r["speedup_vs_baseline"]))]
fig, ax = plt.subplots(figsize=(8, 4))
ax.bar(range(len(rows)), [float(r["speedup_vs_baseline"]) for r in rows])
ax.set_xticks(range(len(rows)))
ax.set_xticklabels([r["config"] for r in rows], rotation=60, ha="right", fontsize="small")
ax.set_ylabel("iterations to target: baseline / config")
fig.tight_layout()
fig.savefig(os.path.join(HERE, "ratios.png"), dpi=150)
)";
    write_script(csv_dir / "plot_ratios.py", body, result.scripts);
  }

  auto matching = [&](const std::string& strategy, const std::string& mode) {
    std::vector<std::string> out;
    const std::string tag = "_" + strategy + "_" + mode + "_";
    for (const auto& k : keys)
      if (k.find(tag) != std::string::npos) out.push_back(k);
    return out;
  };
  const auto rw = matching("random", "weighted");
  const auto sw = matching("sequential", "weighted");
  const auto su = matching("sequential", "uniform");
  if (!rw.empty() && !sw.empty() && !su.empty()) {
    std::string body = kPrelude;
    body += "PANELS = [\n    (\"random batches, weighted\", " + py_list(rw) +
            "),\n    (\"sequential batches, weighted\", " + py_list(sw) +
            "),\n    (\"sequential batches, uniform\", " + py_list(su) + "),\n]\n";
    body += "METRIC = \"" + metric + "\"\n\n";
    body += R"(fig, axes = plt.subplots(3, 1, figsize=(7, 11), sharex=True, sharey=True)
for ax, (title, keys) in zip(axes, PANELS):
    for key in keys:
        its, vals = mean_curve(key, METRIC)
        ax.semilogy(its, vals, label=key)
    ax.set_title(title)
    ax.set_ylabel("mean " + METRIC.replace("_", " "))
    ax.legend(fontsize="small")
axes[-1].set_xlabel("iteration")
fig.tight_layout()
fig.savefig(os.path.join(HERE, "strategies.png"), dpi=150)
)";
    write_script(csv_dir / "plot_strategies.py", body, result.scripts);
  }

  if (fs::exists(study)) {
    require_columns(study, {"batch_size", "flops_shared_median", "flops_single_median"});
    std::string body = kPrelude;
    body += R"(rows = read_rows(os.path.join(HERE, "batch_study.csv"))
b = [int(r["batch_size"]) for r in rows]
fig, ax = plt.subplots(figsize=(6, 4))
ax.plot(b, [float(r["flops_shared_median"]) for r in rows], "o-", label="shared over b cores")
ax.plot(b, [float(r["flops_single_median"]) for r in rows], "s-", label="single node")
ax.set_xscale("log", base=2)
ax.set_yscale("log")
ax.set_xlabel("batch size")
ax.set_ylabel("median flops to target")
ax.legend()
fig.tight_layout()
fig.savefig(os.path.join(HERE, "batch_study.png"), dpi=150)
)";
    write_script(csv_dir / "plot_batch_study.py", body, result.scripts);
  }
  return result;
}

}  // namespace wbsgd
