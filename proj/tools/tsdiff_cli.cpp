#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "tsdiff/analysis.hpp"
#include "tsdiff/experiment.hpp"

namespace {

tsdiff::EmpiricalDistribution read_distribution(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open " + file);
  return tsdiff::EmpiricalDistribution::read(in);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Thompson sampling diffusion-limit experiments"};
  app.require_subcommand(1);

  std::string plan_file;
  auto* run = app.add_subcommand("run", "Run every cell of a plan and write a manifest");
  run->add_option("plan", plan_file, "Plan file (JSON)")->required()->check(CLI::ExistingFile);

  std::string manifest_file;
  std::string format = "csv";
  bool plot_data = false;
  auto* summarize = app.add_subcommand("summarize", "Summary statistics of a finished run");
  summarize->add_option("manifest", manifest_file, "manifest.json of a run")->required()->check(CLI::ExistingFile);
  summarize->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  summarize->add_flag("--plot-data", plot_data, "Also write binned histograms");

  std::string dist_a, dist_b;
  double threshold = 0.05;
  auto* compare = app.add_subcommand("compare", "Two-sample KS distance between distribution files");
  compare->add_option("a", dist_a, "First distribution file")->required()->check(CLI::ExistingFile);
  compare->add_option("b", dist_b, "Second distribution file")->required()->check(CLI::ExistingFile);
  compare->add_option("--threshold", threshold, "Pass if the statistic is below this value")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      auto plan = tsdiff::load_plan(plan_file);
      plan.output_dir = tsdiff::effective_output_dir(plan);
      const auto manifest = tsdiff::run_experiment(plan);
      for (const auto& c : manifest.cells) {
        std::cout << c.cell.label() << ": " << (c.ok ? "ok" : "FAILED: " + c.error) << " (" << c.wall_seconds
                  << " s)\n";
      }
      std::cout << "manifest: " << (plan.output_dir / "manifest.json").string() << '\n';
      return manifest.complete() ? 0 : 1;
    }
    if (*summarize) {
      const auto manifest = tsdiff::Manifest::load(manifest_file);
      for (const auto& path : tsdiff::emit_results(manifest, tsdiff::parse_format(format), plot_data)) {
        std::cerr << "wrote " << path.string() << '\n';
      }
      std::ifstream summary(manifest.directory / (format == "csv" ? "summary.csv" : "summary.json"));
      std::cout << summary.rdbuf();
      return 0;
    }
    if (*compare) {
      const auto verdict = tsdiff::ks_two_sample(read_distribution(dist_a), read_distribution(dist_b), threshold);
      std::cout << "ks_statistic=" << verdict.statistic << " threshold=" << verdict.threshold << ' '
                << (verdict.pass ? "PASS" : "FAIL") << '\n';
      return verdict.pass ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
