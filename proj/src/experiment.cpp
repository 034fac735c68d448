#include "tsdiff/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>
#include <stdexcept>

#include "tsdiff/analysis.hpp"
#include "tsdiff/dynamics.hpp"
#include "tsdiff/format.hpp"
#include "tsdiff/limit.hpp"
#include "tsdiff/parallel.hpp"
#include "tsdiff/rng.hpp"

namespace tsdiff {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct KindName {
  SolverKind kind;
  const char* name;
  bool has_param;
};

constexpr KindName kKinds[] = {
    {SolverKind::SDE_VIEW, "SDE_VIEW", false},   {SolverKind::ODE_VIEW, "ODE_VIEW", false},
    {SolverKind::BATCHED, "BATCHED", true},      {SolverKind::SDE_EM, "SDE_EM", true},
    {SolverKind::RANDOM_ODE, "RANDOM_ODE", true}, {SolverKind::VARIANCE, "VARIANCE", true},
    {SolverKind::VARIANCE_SDE, "VARIANCE_SDE", true},
};

const KindName& kind_entry(SolverKind kind) {
  for (const auto& k : kKinds)
    if (k.kind == kind) return k;
  throw std::logic_error("unknown solver kind");
}

double parse_number(const std::string& text, const std::string& context) {
  char* end = nullptr;
  const double x = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size() || !std::isfinite(x))
    throw std::invalid_argument("malformed number '" + text + "' in " + context);
  return x;
}

std::string sanitize(const std::string& text) {
  std::string out = text;
  for (char& c : out) {
    const bool keep = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                      c == '.' || c == '-' || c == '_';
    if (!keep) c = '_';
  }
  return out;
}

std::string join(const std::vector<std::string>& items, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? sep : "") + items[i];
  return out;
}

BanditSpec cell_spec(const ExperimentPlan& plan, const Cell& cell) {
  BanditSpec spec = plan.spec;
  if (cell.solver.kind == SolverKind::VARIANCE) spec.burn_in = cell.solver.param;
  return spec;
}

HorizonSpec cell_horizon(const Cell& cell) {
  HorizonSpec h;
  h.n = cell.n;
  h.batch_size = cell.solver.kind == SolverKind::BATCHED ? static_cast<std::int64_t>(cell.solver.param) : 1;
  return h;
}

double evaluate(const Functional& f, const PathBundle& bundle, const BanditSpec& spec) {
  if (f.kind == Functional::Kind::REGRET) return rescaled_regret(bundle, spec);
  return bundle.occupation(f.arm, f.time);
}

double evaluate(const Functional& f, const LimitPath& path, const BanditSpec& spec) {
  if (f.kind == Functional::Kind::REGRET) return rescaled_regret(path, spec);
  return path.occupation(f.arm, f.time);
}

struct Outcome {
  std::vector<double> values;
  std::string columnar;  // filled for the first plan.path_samples replications
};

Outcome run_outcome(const ExperimentPlan& plan, const Cell& cell, std::int64_t rep) {
  const BanditSpec spec = cell_spec(plan, cell);
  const HorizonSpec horizon = cell_horizon(cell);
  const std::uint64_t seed = derive_seed(plan.master_seed, cell.index, static_cast<std::uint64_t>(rep));
  const bool keep_path = rep < plan.path_samples;
  Outcome out;
  out.values.reserve(plan.functionals.size());

  auto finish = [&](const auto& path) {
    for (const auto& f : plan.functionals) out.values.push_back(evaluate(f, path, spec));
    if (keep_path) {
      std::ostringstream text;
      write_columnar(text, path);
      out.columnar = text.str();
    }
  };

  switch (cell.solver.kind) {
    case SolverKind::SDE_VIEW: finish(simulate_sde_view(spec, horizon, seed)); break;
    case SolverKind::ODE_VIEW: finish(simulate_ode_view(spec, horizon, seed)); break;
    case SolverKind::BATCHED: finish(simulate_batched(spec, horizon, seed)); break;
    case SolverKind::VARIANCE: finish(simulate_variance_adaptive(spec, horizon, seed).bundle); break;
    case SolverKind::SDE_EM: finish(solve_sde(spec, cell.solver.param, seed)); break;
    case SolverKind::RANDOM_ODE: finish(solve_random_ode(spec, cell.solver.param, seed)); break;
    case SolverKind::VARIANCE_SDE: finish(solve_sde_variance_start(spec, cell.solver.param, seed)); break;
  }
  return out;
}

void write_atomically(const fs::path& target, const std::string& content) {
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw std::runtime_error("cannot replace " + target.string() + ": " + ec.message());
  }
}

const char* kLevelNames[] = {"q01", "q05", "q25", "q50", "q75", "q95", "q99"};

std::vector<double> load_sample(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open distribution file " + file.string());
  Provenance prov;
  return read_sample(in, prov);
}

std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + '"';
}

}  // namespace

bool SolverChoice::discrete() const {
  return kind == SolverKind::SDE_VIEW || kind == SolverKind::ODE_VIEW || kind == SolverKind::BATCHED ||
         kind == SolverKind::VARIANCE;
}

std::string SolverChoice::label() const {
  const auto& entry = kind_entry(kind);
  if (!entry.has_param) return entry.name;
  return std::string(entry.name) + "(" + format_double(param) + ")";
}

SolverChoice parse_solver(const std::string& text) {
  static const std::regex pattern(R"(^\s*([A-Z_]+)\s*(?:\(\s*([^)]*?)\s*\))?\s*$)");
  std::smatch m;
  if (!std::regex_match(text, m, pattern)) throw std::invalid_argument("malformed solver '" + text + "'");
  const std::string name = m[1];
  for (const auto& entry : kKinds) {
    if (name != entry.name) continue;
    SolverChoice choice;
    choice.kind = entry.kind;
    if (entry.has_param != m[2].matched)
      throw std::invalid_argument("solver " + name + (entry.has_param ? " needs a parameter" : " takes no parameter"));
    if (entry.has_param) choice.param = parse_number(m[2], "solver " + text);
    if (choice.kind == SolverKind::BATCHED &&
        (choice.param < 1.0 || choice.param != std::floor(choice.param)))
      throw std::invalid_argument("BATCHED needs a positive integer batch size");
    return choice;
  }
  throw std::invalid_argument("unknown solver '" + name + "'");
}

std::string Functional::label() const {
  if (kind == Kind::REGRET) return "regret";
  return "R_" + std::to_string(arm + 1) + "(" + format_double(time) + ")";
}

Functional parse_functional(const std::string& text) {
  if (text == "regret") return {};
  static const std::regex pattern(R"(^R_([0-9]+)\(([^)]*)\)$)");
  std::smatch m;
  if (!std::regex_match(text, m, pattern))
    throw std::invalid_argument("unknown functional '" + text + "' (expected regret or R_<k>(<t>))");
  Functional f;
  f.kind = Functional::Kind::OCCUPATION;
  f.arm = std::stoi(m[1]) - 1;
  f.time = parse_number(m[2], "functional " + text);
  if (f.arm < 0) throw std::invalid_argument("functional arm index is 1-based");
  if (!(f.time >= 0.0 && f.time <= 1.0)) throw std::invalid_argument("functional time must lie in [0, 1]");
  return f;
}

std::vector<std::string> validate_plan(const ExperimentPlan& plan) {
  std::vector<std::string> errors;
  for (const auto& v : validate_spec(plan.spec)) errors.push_back("spec: " + v);
  if (plan.solvers.empty()) errors.push_back("at least one solver required");
  if (plan.replications < 1) errors.push_back("replications must be at least 1");
  if (plan.path_samples < 0) errors.push_back("path_samples must be nonnegative");
  for (const auto& f : plan.functionals)
    if (f.kind == Functional::Kind::OCCUPATION && f.arm >= plan.spec.arms)
      errors.push_back("functional " + f.label() + " names an arm beyond spec.arms");

  const bool known = plan.spec.variance_mode == VarianceMode::KNOWN_UNIT;
  bool any_discrete = false;
  for (const auto& s : plan.solvers) {
    const bool variance = s.kind == SolverKind::VARIANCE || s.kind == SolverKind::VARIANCE_SDE;
    if (variance && known) errors.push_back(s.label() + " needs variance_mode ADAPTIVE or MISSPECIFIED_UNIT");
    if (!variance && !known) errors.push_back(s.label() + " needs variance_mode KNOWN_UNIT");
    if (!s.discrete() && !(s.param > 0.0 && s.param <= 1e-3))
      errors.push_back(s.label() + ": step must lie in (0, 1e-3]");
    if (s.discrete()) any_discrete = true;
  }
  if (any_discrete && plan.horizons.empty()) errors.push_back("discrete solvers need at least one horizon");
  for (auto n : plan.horizons)
    if (n < 1) errors.push_back("horizon n must be positive");
  if (!errors.empty()) return errors;

  for (const auto& cell : enumerate_cells(plan)) {
    if (!cell.solver.discrete()) {
      if (cell.solver.kind == SolverKind::VARIANCE_SDE && !(plan.spec.burn_in > 0.0 && plan.spec.burn_in < 1.0))
        errors.push_back(cell.label() + ": burn_in must lie in (0, 1)");
      continue;
    }
    const HorizonSpec horizon = cell_horizon(cell);
    for (const auto& v : validate_spec(cell_spec(plan, cell), horizon)) errors.push_back(cell.label() + ": " + v);
    if (cell.solver.kind == SolverKind::BATCHED && horizon.batch_size > 1 && horizon.batch_size * 10 > horizon.n)
      errors.push_back(cell.label() + ": batch size must be at most n / 10 (o(n) batching)");
  }
  return errors;
}

ExperimentPlan plan_from_json(const json& j) {
  static const std::vector<std::string> allowed = {"spec", "horizons", "solvers", "replications", "master_seed",
                                                   "functionals", "output_dir", "workers", "path_samples"};
  for (const auto& item : j.items())
    if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end())
      throw std::invalid_argument("unknown plan key '" + item.key() + "'");
  ExperimentPlan plan;
  plan.spec = j.at("spec").get<BanditSpec>();
  plan.horizons = j.value("horizons", std::vector<std::int64_t>{});
  for (const auto& s : j.at("solvers")) plan.solvers.push_back(parse_solver(s.get<std::string>()));
  plan.replications = j.at("replications").get<std::int64_t>();
  plan.master_seed = j.value("master_seed", std::uint64_t{0});
  for (const auto& f : j.value("functionals", std::vector<std::string>{})) plan.functionals.push_back(parse_functional(f));
  plan.output_dir = j.value("output_dir", std::string("tsdiff_out"));
  plan.workers = j.value("workers", 0u);
  plan.path_samples = j.value("path_samples", std::int64_t{0});
  return plan;
}

json plan_to_json(const ExperimentPlan& plan) {
  json j;
  j["spec"] = plan.spec;
  j["horizons"] = plan.horizons;
  std::vector<std::string> solvers, functionals;
  for (const auto& s : plan.solvers) solvers.push_back(s.label());
  for (const auto& f : plan.functionals) functionals.push_back(f.label());
  j["solvers"] = solvers;
  j["replications"] = plan.replications;
  j["master_seed"] = plan.master_seed;
  j["functionals"] = functionals;
  j["output_dir"] = plan.output_dir.string();
  j["workers"] = plan.workers;
  j["path_samples"] = plan.path_samples;
  return j;
}

ExperimentPlan load_plan(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open plan " + file.string());
  return plan_from_json(json::parse(in));
}

fs::path effective_output_dir(const ExperimentPlan& plan) {
  if (const char* env = std::getenv("TSDIFF_OUTPUT_DIR"); env && *env) return env;
  return plan.output_dir;
}

std::string Cell::label() const {
  return solver.discrete() ? solver.label() + "_n" + std::to_string(n) : solver.label();
}

std::vector<Cell> enumerate_cells(const ExperimentPlan& plan) {
  std::vector<Cell> cells;
  for (const auto& s : plan.solvers) {
    if (s.discrete()) {
      for (auto n : plan.horizons) cells.push_back({cells.size(), s, n});
    } else {
      cells.push_back({cells.size(), s, 0});
    }
  }
  return cells;
}

bool Manifest::complete() const {
  return std::all_of(cells.begin(), cells.end(), [](const CellRecord& c) { return c.ok; });
}

json Manifest::to_json() const {
  json j;
  j["spec_hash"] = spec_hash;
  j["master_seed"] = master_seed;
  j["complete"] = complete();
  j["wall_seconds"] = wall_seconds;
  j["plan"] = plan;
  json cells_json = json::array();
  for (const auto& c : cells) {
    json cj;
    cj["index"] = c.cell.index;
    cj["label"] = c.cell.label();
    cj["solver"] = c.cell.solver.label();
    cj["n"] = c.cell.n;
    cj["status"] = c.ok ? "ok" : "failed";
    if (!c.ok) cj["error"] = c.error;
    cj["wall_seconds"] = c.wall_seconds;
    cj["replications"] = c.replications;
    json files = json::array();
    for (const auto& [functional, file] : c.files) files.push_back({{"functional", functional}, {"file", file}});
    cj["files"] = files;
    cj["path_files"] = c.path_files;
    cells_json.push_back(cj);
  }
  j["cells"] = cells_json;
  return j;
}

Manifest Manifest::from_json(const json& j, fs::path directory) {
  Manifest m;
  m.directory = std::move(directory);
  m.spec_hash = j.at("spec_hash").get<std::string>();
  m.master_seed = j.at("master_seed").get<std::uint64_t>();
  m.wall_seconds = j.value("wall_seconds", 0.0);
  m.plan = j.value("plan", json::object());
  for (const auto& cj : j.at("cells")) {
    CellRecord c;
    c.cell.index = cj.at("index").get<std::size_t>();
    c.cell.solver = parse_solver(cj.at("solver").get<std::string>());
    c.cell.n = cj.at("n").get<std::int64_t>();
    c.ok = cj.at("status").get<std::string>() == "ok";
    c.error = cj.value("error", std::string());
    c.wall_seconds = cj.value("wall_seconds", 0.0);
    c.replications = cj.value("replications", std::int64_t{0});
    for (const auto& f : cj.value("files", json::array()))
      c.files.emplace_back(f.at("functional").get<std::string>(), f.at("file").get<std::string>());
    c.path_files = cj.value("path_files", std::vector<std::string>{});
    m.cells.push_back(std::move(c));
  }
  return m;
}

Manifest Manifest::load(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open manifest " + file.string());
  return from_json(json::parse(in), file.parent_path());
}

std::vector<double> run_replication(const ExperimentPlan& plan, const Cell& cell, std::int64_t rep) {
  return run_outcome(plan, cell, rep).values;
}

Manifest run_experiment(const ExperimentPlan& plan) {
  if (const auto errors = validate_plan(plan); !errors.empty())
    throw std::invalid_argument("invalid plan: " + join(errors, "; "));

  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  Manifest manifest;
  manifest.directory = plan.output_dir;
  manifest.spec_hash = spec_hash_hex(plan.spec);
  manifest.master_seed = plan.master_seed;
  manifest.plan = plan_to_json(plan);
  fs::create_directories(plan.output_dir);

  for (const auto& cell : enumerate_cells(plan)) {
    CellRecord record;
    record.cell = cell;
    const auto cell_start = Clock::now();
    std::vector<fs::path> written;
    try {
      const auto outcomes = parallel_map(static_cast<std::size_t>(plan.replications), plan.workers,
                                         [&](std::size_t rep) { return run_outcome(plan, cell, static_cast<std::int64_t>(rep)); });
      const std::string prefix = "c" + std::to_string(cell.index) + "_" + sanitize(cell.label());
      const Provenance prov{manifest.spec_hash, cell.label(), plan.master_seed};
      for (std::size_t f = 0; f < plan.functionals.size(); ++f) {
        std::vector<double> sample;
        sample.reserve(outcomes.size());
        for (const auto& o : outcomes) sample.push_back(o.values[f]);
        std::sort(sample.begin(), sample.end());
        std::ostringstream text;
        write_sample(text, sample, prov);
        const std::string name = prefix + "__" + sanitize(plan.functionals[f].label()) + ".dist";
        write_atomically(plan.output_dir / name, text.str());
        written.push_back(plan.output_dir / name);
        record.files.emplace_back(plan.functionals[f].label(), name);
      }
      for (std::size_t r = 0; r < outcomes.size() && static_cast<std::int64_t>(r) < plan.path_samples; ++r) {
        const std::string name = prefix + "__path_" + std::to_string(r) + ".csv";
        write_atomically(plan.output_dir / name, outcomes[r].columnar);
        written.push_back(plan.output_dir / name);
        record.path_files.push_back(name);
      }
      record.ok = true;
      record.replications = plan.replications;
    } catch (const std::exception& e) {
      for (const auto& p : written) {
        std::error_code ec;
        fs::remove(p, ec);
      }
      record.ok = false;
      record.error = e.what();
      record.files.clear();
      record.path_files.clear();
    }
    record.wall_seconds = std::chrono::duration<double>(Clock::now() - cell_start).count();
    manifest.cells.push_back(std::move(record));
  }

  manifest.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  write_atomically(plan.output_dir / "manifest.json", manifest.to_json().dump(2) + "\n");
  return manifest;
}

OutputFormat parse_format(const std::string& text) {
  if (text == "csv" || text == "CSV") return OutputFormat::CSV;
  if (text == "json" || text == "JSON") return OutputFormat::JSON;
  throw std::invalid_argument("unknown format '" + text + "' (expected csv or json)");
}

const std::vector<double>& summary_levels() {
  static const std::vector<double> levels = {0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99};
  return levels;
}

std::vector<SummaryRow> summarize(const Manifest& manifest) {
  std::vector<SummaryRow> rows;
  for (const auto& c : manifest.cells) {
    if (!c.ok) continue;
    for (const auto& [functional, file] : c.files) {
      const auto sample = load_sample(manifest.directory / file);
      if (sample.empty()) throw std::runtime_error("empty distribution file " + file);
      SummaryRow row;
      row.cell = c.cell.label();
      row.solver = c.cell.solver.label();
      row.n = c.cell.n;
      row.functional = functional;
      row.count = static_cast<std::int64_t>(sample.size());
      double sum = 0.0;
      for (double x : sample) sum += x;
      row.mean = sum / static_cast<double>(sample.size());
      double ss = 0.0;
      for (double x : sample) ss += (x - row.mean) * (x - row.mean);
      row.sd = sample.size() > 1 ? std::sqrt(ss / static_cast<double>(sample.size() - 1)) : 0.0;
      for (double q : summary_levels()) row.quantiles.push_back(nearest_rank(sample, q));
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::vector<Histogram> histograms(const Manifest& manifest, int bins) {
  if (bins < 1) throw std::invalid_argument("histogram needs at least one bin");
  std::vector<Histogram> out;
  for (const auto& c : manifest.cells) {
    if (!c.ok) continue;
    for (const auto& [functional, file] : c.files) {
      const auto sample = load_sample(manifest.directory / file);
      Histogram h;
      h.cell = c.cell.label();
      h.functional = functional;
      const double lo = sample.front();
      const double hi = sample.back();
      const int used = hi > lo ? bins : 1;
      const double width = (hi - lo) / used;
      for (int b = 0; b <= used; ++b) h.edges.push_back(b == used ? hi : lo + width * b);
      h.counts.assign(static_cast<std::size_t>(used), 0);
      for (double x : sample) {
        int b = width > 0.0 ? static_cast<int>((x - lo) / width) : 0;
        ++h.counts[static_cast<std::size_t>(std::clamp(b, 0, used - 1))];
      }
      out.push_back(std::move(h));
    }
  }
  return out;
}

std::vector<fs::path> emit_results(const Manifest& manifest, OutputFormat format, bool include_plot_data) {
  const auto rows = summarize(manifest);
  std::vector<fs::path> written;

  if (format == OutputFormat::CSV) {
    std::ostringstream csv;
    csv << "cell,solver,n,functional,count,mean,sd";
    for (const char* name : kLevelNames) csv << ',' << name;
    csv << '\n';
    for (const auto& r : rows) {
      csv << csv_field(r.cell) << ',' << csv_field(r.solver) << ',' << r.n << ',' << csv_field(r.functional) << ','
          << r.count << ',' << format_double(r.mean) << ',' << format_double(r.sd);
      for (double q : r.quantiles) csv << ',' << format_double(q);
      csv << '\n';
    }
    written.push_back(manifest.directory / "summary.csv");
    write_atomically(written.back(), csv.str());
    if (include_plot_data) {
      std::ostringstream hist;
      hist << "cell,functional,bin,lower,upper,count\n";
      for (const auto& h : histograms(manifest)) {
        for (std::size_t b = 0; b < h.counts.size(); ++b)
          hist << csv_field(h.cell) << ',' << csv_field(h.functional) << ',' << b << ',' << format_double(h.edges[b])
               << ',' << format_double(h.edges[b + 1]) << ',' << h.counts[b] << '\n';
      }
      written.push_back(manifest.directory / "histograms.csv");
      write_atomically(written.back(), hist.str());
    }
    return written;
  }

  json j;
  j["spec_hash"] = manifest.spec_hash;
  j["rows"] = json::array();
  for (const auto& r : rows) {
    json row = {{"cell", r.cell}, {"solver", r.solver}, {"n", r.n}, {"functional", r.functional},
                {"count", r.count}, {"mean", r.mean}, {"sd", r.sd}};
    for (std::size_t q = 0; q < r.quantiles.size(); ++q) row[kLevelNames[q]] = r.quantiles[q];
    j["rows"].push_back(row);
  }
  if (include_plot_data) {
    j["histograms"] = json::array();
    for (const auto& h : histograms(manifest))
      j["histograms"].push_back({{"cell", h.cell}, {"functional", h.functional}, {"edges", h.edges}, {"counts", h.counts}});
  }
  written.push_back(manifest.directory / "summary.json");
  write_atomically(written.back(), j.dump(2) + "\n");
  return written;
}

}  // namespace tsdiff
