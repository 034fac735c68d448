#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tsdiff/model.hpp"

namespace tsdiff {

enum class SolverKind { SDE_VIEW, ODE_VIEW, BATCHED, SDE_EM, RANDOM_ODE, VARIANCE, VARIANCE_SDE };

// One solver of a plan. `param` is the batch size (BATCHED), the step h
// (SDE_EM, RANDOM_ODE, VARIANCE_SDE) or the burn-in fraction (VARIANCE).
struct SolverChoice {
  SolverKind kind = SolverKind::SDE_VIEW;
  double param = 0.0;

  bool discrete() const;
  std::string label() const;  // e.g. "BATCHED(100)", "SDE_EM(0.0001)"
};

// Parses "SDE_VIEW", "BATCHED(100)", "SDE_EM(1e-4)", ...
SolverChoice parse_solver(const std::string& text);

// "regret" or "R_<k>(<t>)" with a 1-based arm index.
struct Functional {
  enum class Kind { REGRET, OCCUPATION } kind = Kind::REGRET;
  int arm = 0;  // 0-based
  double time = 1.0;

  std::string label() const;
};

Functional parse_functional(const std::string& text);

struct ExperimentPlan {
  BanditSpec spec;
  std::vector<std::int64_t> horizons;
  std::vector<SolverChoice> solvers;
  std::int64_t replications = 1;
  std::uint64_t master_seed = 0;
  std::vector<Functional> functionals;
  std::filesystem::path output_dir = "tsdiff_out";
  unsigned workers = 0;            // 0 = hardware concurrency
  std::int64_t path_samples = 0;  // columnar paths written per cell
};

// Every problem with the plan; empty means runnable.
std::vector<std::string> validate_plan(const ExperimentPlan& plan);

ExperimentPlan plan_from_json(const nlohmann::json& j);
nlohmann::json plan_to_json(const ExperimentPlan& plan);
ExperimentPlan load_plan(const std::filesystem::path& file);

// Output directory after the TSDIFF_OUTPUT_DIR override.
std::filesystem::path effective_output_dir(const ExperimentPlan& plan);

// A (solver, n) pair. Limit solvers have a single cell with n = 0.
struct Cell {
  std::size_t index = 0;
  SolverChoice solver;
  std::int64_t n = 0;

  std::string label() const;
};

std::vector<Cell> enumerate_cells(const ExperimentPlan& plan);

struct CellRecord {
  Cell cell;
  bool ok = false;
  std::string error;
  double wall_seconds = 0.0;
  std::int64_t replications = 0;
  // functional label -> file name relative to the manifest directory
  std::vector<std::pair<std::string, std::string>> files;
  std::vector<std::string> path_files;
};

struct Manifest {
  std::filesystem::path directory;
  std::string spec_hash;
  std::uint64_t master_seed = 0;
  nlohmann::json plan;
  std::vector<CellRecord> cells;
  double wall_seconds = 0.0;

  bool complete() const;
  nlohmann::json to_json() const;
  static Manifest from_json(const nlohmann::json& j, std::filesystem::path directory);
  static Manifest load(const std::filesystem::path& file);
};

// Runs every cell into plan.output_dir and writes manifest.json there. A
// failing cell is recorded with its error and leaves no distribution files;
// the remaining cells still run.
Manifest run_experiment(const ExperimentPlan& plan);

// Functional values of one replication, in plan.functionals order.
std::vector<double> run_replication(const ExperimentPlan& plan, const Cell& cell, std::int64_t rep);

enum class OutputFormat { CSV, JSON };
OutputFormat parse_format(const std::string& text);

struct SummaryRow {
  std::string cell;
  std::string solver;
  std::int64_t n = 0;
  std::string functional;
  std::int64_t count = 0;
  double mean = 0.0;
  double sd = 0.0;
  std::vector<double> quantiles;  // at summary_levels()
};

const std::vector<double>& summary_levels();
std::vector<SummaryRow> summarize(const Manifest& manifest);

struct Histogram {
  std::string cell;
  std::string functional;
  std::vector<double> edges;  // bins + 1
  std::vector<std::int64_t> counts;
};

std::vector<Histogram> histograms(const Manifest& manifest, int bins = 50);

// Writes summary.csv or summary.json (plus histogram data when requested)
// next to the manifest and returns the written paths.
std::vector<std::filesystem::path> emit_results(const Manifest& manifest, OutputFormat format,
                                                bool include_plot_data);

}  // namespace tsdiff
