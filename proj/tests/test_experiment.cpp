#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "tsdiff/analysis.hpp"
#include "tsdiff/experiment.hpp"
#include "tsdiff/parallel.hpp"

using namespace tsdiff;
namespace fs = std::filesystem;

namespace {

struct ScratchDir {
  fs::path path;
  explicit ScratchDir(const std::string& name) : path(fs::temp_directory_path() / ("tsdiff_test_" + name)) {
    fs::remove_all(path);
  }
  ~ScratchDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

ExperimentPlan small_plan(const fs::path& dir) {
  ExperimentPlan plan;
  plan.spec = BanditSpec::two_arm(1.0, 1.0);
  plan.horizons = {50, 200};
  plan.solvers = {parse_solver("SDE_VIEW"), parse_solver("ODE_VIEW"), parse_solver("SDE_EM(1e-3)")};
  plan.replications = 40;
  plan.master_seed = 2024;
  plan.functionals = {parse_functional("regret"), parse_functional("R_2(0.5)")};
  plan.output_dir = dir;
  return plan;
}

}  // namespace

TEST_CASE("solver and functional labels parse and print") {
  CHECK(parse_solver("SDE_VIEW").kind == SolverKind::SDE_VIEW);
  CHECK(parse_solver("BATCHED(100)").param == 100.0);
  CHECK(parse_solver("SDE_EM(1e-4)").label() == "SDE_EM(1e-04)");
  CHECK(parse_solver(" VARIANCE( 0.05 ) ").kind == SolverKind::VARIANCE);
  CHECK(parse_solver("VARIANCE_SDE(1e-4)").kind == SolverKind::VARIANCE_SDE);
  CHECK_THROWS(parse_solver("BATCHED"));
  CHECK_THROWS(parse_solver("BATCHED(2.5)"));
  CHECK_THROWS(parse_solver("SDE_VIEW(3)"));
  CHECK_THROWS(parse_solver("UCB"));

  const auto f = parse_functional("R_2(0.5)");
  CHECK(f.kind == Functional::Kind::OCCUPATION);
  CHECK(f.arm == 1);
  CHECK(f.time == 0.5);
  CHECK(f.label() == "R_2(0.5)");
  CHECK(parse_functional("regret").label() == "regret");
  CHECK_THROWS(parse_functional("R_0(1)"));
  CHECK_THROWS(parse_functional("R_1(2)"));
  CHECK_THROWS(parse_functional("mean"));
}

TEST_CASE("plan validation reports every problem") {
  ExperimentPlan plan = small_plan("unused");
  CHECK(validate_plan(plan).empty());
  plan.replications = 0;
  plan.solvers.push_back(parse_solver("BATCHED(10)"));
  plan.solvers.push_back(parse_solver("VARIANCE(0.1)"));
  plan.functionals.push_back(parse_functional("R_3(1)"));
  const auto errors = validate_plan(plan);
  CHECK(errors.size() >= 3);
  CHECK_THROWS_AS(run_experiment(plan), std::invalid_argument);

  ExperimentPlan batched = small_plan("unused");
  batched.solvers = {parse_solver("BATCHED(10)")};
  const auto batch_errors = validate_plan(batched);
  REQUIRE(batch_errors.size() == 1);
  CHECK(batch_errors[0].find("BATCHED(10)_n50") != std::string::npos);
}

TEST_CASE("plan json round trip and unknown keys") {
  const auto plan = small_plan("out");
  const auto j = plan_to_json(plan);
  const auto back = plan_from_json(j);
  CHECK(plan_to_json(back) == j);
  auto bad = j;
  bad["replicates"] = 3;
  CHECK_THROWS(plan_from_json(bad));
}

TEST_CASE("one cell with one replication") {
  ScratchDir dir("single");
  ExperimentPlan plan;
  plan.spec = BanditSpec::two_arm(1.0, 1.0);
  plan.horizons = {20};
  plan.solvers = {parse_solver("SDE_VIEW")};
  plan.replications = 1;
  plan.functionals = {parse_functional("regret")};
  plan.output_dir = dir.path;
  const auto m = run_experiment(plan);
  REQUIRE(m.cells.size() == 1);
  CHECK(m.cells[0].ok);
  REQUIRE(m.cells[0].files.size() == 1);
  CHECK(fs::exists(dir.path / m.cells[0].files[0].second));
  CHECK(fs::exists(dir.path / "manifest.json"));
  const auto loaded = Manifest::load(dir.path / "manifest.json");
  CHECK(loaded.cells.size() == 1);
  CHECK(summarize(loaded).at(0).count == 1);
}

TEST_CASE("reruns and worker counts give byte-identical distributions") {
  ScratchDir a("rerun_a"), b("rerun_b"), c("rerun_c");
  auto plan = small_plan(a.path);
  plan.workers = 1;
  const auto ma = run_experiment(plan);
  plan.output_dir = b.path;
  const auto mb = run_experiment(plan);
  plan.output_dir = c.path;
  plan.workers = 4;
  const auto mc = run_experiment(plan);
  REQUIRE(ma.cells.size() == 5);
  for (std::size_t i = 0; i < ma.cells.size(); ++i) {
    REQUIRE(ma.cells[i].files.size() == 2);
    for (std::size_t f = 0; f < 2; ++f) {
      const auto& name = ma.cells[i].files[f].second;
      CHECK(name == mb.cells[i].files[f].second);
      const auto text = slurp(a.path / name);
      CHECK(text == slurp(b.path / name));
      CHECK(text == slurp(c.path / name));
    }
  }
}

TEST_CASE("every replication lands in exactly one distribution file") {
  ScratchDir dir("counts");
  const auto plan = small_plan(dir.path);
  const auto m = run_experiment(plan);
  CHECK(m.complete());
  CHECK(m.spec_hash == spec_hash_hex(plan.spec));
  for (const auto& c : m.cells) {
    for (const auto& [functional, file] : c.files) {
      std::ifstream in(dir.path / file);
      const auto d = EmpiricalDistribution::read(in);
      CHECK(static_cast<std::int64_t>(d.count()) == plan.replications);
      CHECK(d.provenance().master_seed == plan.master_seed);
      CHECK(d.provenance().source == c.cell.label());
      CHECK(d.provenance().spec_hash == m.spec_hash);
    }
  }
  // Distribution values are the per-replication functionals.
  const auto cells = enumerate_cells(plan);
  std::vector<double> direct;
  for (std::int64_t r = 0; r < plan.replications; ++r) direct.push_back(run_replication(plan, cells[1], r)[0]);
  std::ifstream in(dir.path / m.cells[1].files[0].second);
  CHECK(EmpiricalDistribution::read(in).sorted() == EmpiricalDistribution(direct).sorted());
}

TEST_CASE("a failing cell leaves the others intact") {
  ScratchDir dir("partial");
  auto plan = small_plan(dir.path);
  plan.solvers = {parse_solver("SDE_VIEW")};
  plan.horizons = {30, 40};
  // Occupy the first cell's output name with a non-empty directory.
  const fs::path blocker = dir.path / "c0_SDE_VIEW_n30__regret.dist";
  fs::create_directories(blocker / "keep");
  const auto m = run_experiment(plan);
  REQUIRE(m.cells.size() == 2);
  CHECK_FALSE(m.cells[0].ok);
  CHECK_FALSE(m.cells[0].error.empty());
  CHECK(m.cells[0].files.empty());
  CHECK(m.cells[1].ok);
  CHECK_FALSE(m.complete());
  const auto loaded = Manifest::load(dir.path / "manifest.json");
  CHECK_FALSE(loaded.cells[0].ok);
  CHECK(loaded.cells[1].ok);
  CHECK(summarize(loaded).size() == 2);
  for (const auto& entry : fs::directory_iterator(dir.path))
    CHECK(entry.path().extension() != ".tmp");
}

TEST_CASE("summaries: header-only, constant zeros and format equivalence") {
  ScratchDir empty("empty"), zeros("zeros");
  auto plan = small_plan(empty.path);
  plan.functionals.clear();
  const auto m0 = run_experiment(plan);
  emit_results(m0, OutputFormat::CSV, false);
  CHECK(slurp(empty.path / "summary.csv") == "cell,solver,n,functional,count,mean,sd,q01,q05,q25,q50,q75,q95,q99\n");

  plan = small_plan(zeros.path);
  plan.spec = BanditSpec::two_arm(0.0, 1.0);
  const auto m1 = run_experiment(plan);
  const auto rows = summarize(m1);
  for (const auto& r : rows)
    if (r.functional == "regret")
      for (double q : r.quantiles) CHECK(q == 0.0);

  plan.spec = BanditSpec::two_arm(1.0, 1.0);
  const auto m2 = run_experiment(plan);
  emit_results(m2, OutputFormat::CSV, true);
  emit_results(m2, OutputFormat::JSON, true);
  CHECK(fs::exists(zeros.path / "histograms.csv"));
  std::ifstream json_in(zeros.path / "summary.json");
  const auto j = nlohmann::json::parse(json_in);
  std::ifstream csv_in(zeros.path / "summary.csv");
  std::string line;
  std::getline(csv_in, line);
  std::size_t row = 0;
  const char* keys[] = {"mean", "sd", "q01", "q05", "q25", "q50", "q75", "q95", "q99"};
  while (std::getline(csv_in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    REQUIRE(cells.size() == 14);
    const auto& jr = j["rows"][row++];
    CHECK(cells[0] == jr["cell"].get<std::string>());
    CHECK(cells[3] == jr["functional"].get<std::string>());
    CHECK(std::stoll(cells[4]) == jr["count"].get<std::int64_t>());
    for (std::size_t k = 0; k < 9; ++k) CHECK(std::strtod(cells[5 + k].c_str(), nullptr) == jr[keys[k]].get<double>());
  }
  CHECK(row == j["rows"].size());
  CHECK(j["histograms"].size() == row);
  for (const auto& h : j["histograms"]) {
    std::int64_t total = 0;
    for (const auto& c : h["counts"]) total += c.get<std::int64_t>();
    CHECK(total == plan.replications);
  }
  CHECK_THROWS(parse_format("xml"));
}

TEST_CASE("output directory override") {
  auto plan = small_plan("from_plan");
  unsetenv("TSDIFF_OUTPUT_DIR");
  CHECK(effective_output_dir(plan) == fs::path("from_plan"));
  setenv("TSDIFF_OUTPUT_DIR", "/tmp/elsewhere", 1);
  CHECK(effective_output_dir(plan) == fs::path("/tmp/elsewhere"));
  unsetenv("TSDIFF_OUTPUT_DIR");
}

TEST_CASE("variance and batched cells run through the runner") {
  ScratchDir dir("variants");
  ExperimentPlan plan;
  plan.spec = BanditSpec::two_arm(1.0, 1.0);
  plan.spec.variance_mode = VarianceMode::ADAPTIVE;
  plan.spec.arm_sd = {1.0, 2.0};
  plan.spec.burn_in = 0.05;
  plan.horizons = {400};
  plan.solvers = {parse_solver("VARIANCE(0.05)"), parse_solver("VARIANCE_SDE(1e-3)")};
  plan.replications = 5;
  plan.functionals = {parse_functional("regret")};
  plan.output_dir = dir.path;
  plan.path_samples = 1;
  const auto m = run_experiment(plan);
  CHECK(m.complete());
  for (const auto& c : m.cells) {
    REQUIRE(c.path_files.size() == 1);
    CHECK(fs::file_size(dir.path / c.path_files[0]) > 0);
  }

  plan.spec = BanditSpec::two_arm(1.0, 1.0);
  plan.solvers = {parse_solver("BATCHED(20)"), parse_solver("RANDOM_ODE(1e-3)")};
  plan.path_samples = 0;
  CHECK(run_experiment(plan).complete());
}

TEST_CASE("parallel map keeps results in index order and propagates errors") {
  const auto squares = parallel_map(100, 4, [](std::size_t i) { return static_cast<int>(i * i); });
  for (std::size_t i = 0; i < 100; ++i) CHECK(squares[i] == static_cast<int>(i * i));
  CHECK_THROWS_AS(parallel_map(50, 3,
                               [](std::size_t i) {
                                 if (i == 17) throw std::runtime_error("boom");
                                 return 0;
                               }),
                  std::runtime_error);
}
