#include "cli.hpp"

#include "incentive/ccpo.hpp"
#include "incentive/config.hpp"
#include "incentive/crm.hpp"
#include "incentive/evalbench.hpp"
#include "incentive/io.hpp"
#include "incentive/isorates.hpp"
#include "incentive/rng.hpp"
#include "incentive/simgen.hpp"
#include "incentive/sire.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

namespace incentive::cli {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// Typed access to one table of the config. Every value read (including
// defaults) is copied into `resolved`; keys never read are reported by
// finish().
class Section {
 public:
  Section(const json* node, std::string path, json* resolved)
      : node_(node), path_(std::move(path)), resolved_(resolved) {
    if (node_ != nullptr && !node_->is_object()) fail_type("", "a table");
  }

  std::string key_path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  bool has(const std::string& key) const { return node_ != nullptr && node_->contains(key); }

  template <typename T>
  T get(const std::string& key, T fallback) {
    std::optional<T> v = opt<T>(key);
    if (!v) {
      (*resolved_)[key] = fallback;
      return fallback;
    }
    return *v;
  }

  template <typename T>
  std::optional<T> opt(const std::string& key) {
    used_.insert(key);
    if (!has(key)) return std::nullopt;
    T value = convert<T>(node_->at(key), key);
    (*resolved_)[key] = node_->at(key);
    return value;
  }

  template <typename T>
  T required(const std::string& key) {
    auto v = opt<T>(key);
    if (!v) throw ValidationError(key_path(key) + ": required key is missing");
    return *v;
  }

  Section sub(const std::string& key) {
    used_.insert(key);
    json& child = (*resolved_)[key];
    if (!child.is_object()) child = json::object();
    return Section(has(key) ? &node_->at(key) : nullptr, key_path(key), &child);
  }

  void finish() const {
    if (node_ == nullptr) return;
    for (const auto& [key, value] : node_->items()) {
      if (used_.count(key) == 0) throw ValidationError(key_path(key) + ": unknown key");
    }
  }

  // Runs a struct's validate() and prefixes its message with this table.
  template <typename F>
  void check(F&& fn) const {
    try {
      fn();
    } catch (const ValidationError& e) {
      throw ValidationError((path_.empty() ? std::string("config") : path_) + ": " + e.what());
    }
  }

 private:
  [[noreturn]] void fail_type(const std::string& key, const std::string& expected) const {
    throw ValidationError((key.empty() ? path_ : key_path(key)) + ": expected " + expected);
  }

  template <typename T>
  T convert(const json& v, const std::string& key) const {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) fail_type(key, "true or false");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) fail_type(key, "a string");
      return v.get<std::string>();
    } else if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) fail_type(key, "a number");
      return v.get<double>();
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)) {
        fail_type(key, "a nonnegative integer");
      }
      return v.get<std::uint64_t>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) fail_type(key, "an integer");
      return v.get<T>();
    } else {
      if (!v.is_array()) fail_type(key, "an array");
      T out;
      for (const auto& item : v) out.push_back(convert<typename T::value_type>(item, key));
      return out;
    }
  }

  const json* node_;
  std::string path_;
  json* resolved_;
  std::set<std::string> used_;
};

struct Context {
  std::string command;
  std::uint64_t seed = 0;
  fs::path out_dir;
  int jobs = 1;
  json resolved;
};

fs::path input_path(Section& s, const std::string& key) {
  const auto p = s.required<std::string>(key);
  if (!fs::exists(p)) {
    throw ValidationError(s.key_path(key) + ": input path '" + p + "' does not exist");
  }
  return p;
}

std::optional<fs::path> optional_input_path(Section& s, const std::string& key) {
  if (!s.has(key)) return std::nullopt;
  return input_path(s, key);
}

void write_output(const Context& ctx, const std::string& name, const std::string& contents) {
  io::write_file_atomic(ctx.out_dir / name, contents);
}

template <typename F>
std::string render(F&& fn) {
  std::ostringstream ss;
  fn(ss);
  return ss.str();
}

simgen::NoiseModel parse_noise(Section& s) {
  const auto name = s.get<std::string>("noise", "deterministic");
  if (name == "deterministic") return simgen::NoiseModel::kDeterministic;
  if (name == "bernoulli") return simgen::NoiseModel::kBernoulli;
  throw ValidationError(s.key_path("noise") + ": expected \"deterministic\" or \"bernoulli\"");
}

simgen::SimOptions read_sim_options(Section& s) {
  simgen::SimOptions o;
  o.noise = parse_noise(s);
  o.validation_fraction = s.get<double>("validation_fraction", o.validation_fraction);
  if (!(o.validation_fraction >= 0.0 && o.validation_fraction < 1.0)) {
    throw ValidationError(s.key_path("validation_fraction") + ": must lie in [0, 1)");
  }
  return o;
}

kernels::KernelSpec read_kernel(Section& s) {
  const auto kind = s.get<std::string>("kernel", "linear");
  if (kind == "linear") return kernels::KernelSpec::linear();
  if (kind == "rbf") {
    if (auto g = s.opt<double>("gamma")) return kernels::KernelSpec::rbf(*g);
    return kernels::KernelSpec::rbf_median();
  }
  throw ValidationError(s.key_path("kernel") + ": expected \"linear\" or \"rbf\"");
}

struct SireSettings {
  sire::SireConfig cfg;
  bool select = true;
  std::vector<double> grid = sire::kDefaultKappaGrid;
};

SireSettings read_sire(Section& s, const SireSettings& base = {}) {
  SireSettings out = base;
  auto& c = out.cfg;
  c.hidden_widths = s.get<std::vector<int>>("hidden_widths", c.hidden_widths);
  c.repr_dim = s.get<int>("repr_dim", c.repr_dim);
  c.learning_rate = s.get<double>("learning_rate", c.learning_rate);
  c.epochs = s.get<int>("epochs", c.epochs);
  c.batch_size = s.get<int>("batch_size", c.batch_size);
  c.kappa = s.get<double>("kappa", c.kappa);
  if (s.has("kernel") || s.has("gamma")) c.kernel_z = read_kernel(s);
  c.structured = s.get<bool>("structured", c.structured);
  c.min_hsic_batch = s.get<int>("min_hsic_batch", c.min_hsic_batch);
  c.increment_sharpness = s.get<double>("increment_sharpness", c.increment_sharpness);
  c.increment_init = s.get<double>("increment_init", c.increment_init);
  c.base_init = s.get<double>("base_init", c.base_init);
  c.standardize_inputs = s.get<bool>("standardize_inputs", c.standardize_inputs);
  c.bias_from_data = s.get<bool>("bias_from_data", c.bias_from_data);
  out.select = s.get<bool>("select_kappa", out.select);
  out.grid = s.get<std::vector<double>>("kappa_grid", out.grid);
  s.finish();
  s.check([&] {
    c.validate();
    require(!out.grid.empty(), "kappa_grid must not be empty");
    for (double k : out.grid) require(k >= 0.0 && std::isfinite(k), "kappa_grid values must be >= 0");
  });
  return out;
}

crm::CrmConfig read_crm(Section& s) {
  crm::CrmConfig c;
  c.epochs = s.get<int>("epochs", c.epochs);
  c.learning_rate = s.get<double>("learning_rate", c.learning_rate);
  c.batch_size = s.get<int>("batch_size", c.batch_size);
  c.eta_steps = s.get<int>("eta_steps", c.eta_steps);
  c.eta_initial = s.get<double>("eta_initial", c.eta_initial);
  c.eta_doublings = s.get<int>("eta_doublings", c.eta_doublings);
  c.propensity.iterations = s.get<int>("propensity_iterations", c.propensity.iterations);
  c.propensity.learning_rate = s.get<double>("propensity_learning_rate", c.propensity.learning_rate);
  c.propensity.l2 = s.get<double>("propensity_l2", c.propensity.l2);
  c.propensity.clip_epsilon = s.get<double>("clip_epsilon", c.propensity.clip_epsilon);
  s.check([&] { c.validate(); });
  return c;
}

evalbench::Solver read_solver(Section& s) {
  const auto name = s.get<std::string>("solver", "dp");
  if (name == "dp") return evalbench::Solver::kDp;
  if (name == "lagrangian") return evalbench::Solver::kLagrangian;
  throw ValidationError(s.key_path("solver") + ": expected \"dp\" or \"lagrangian\"");
}

// ---------------------------------------------------------------------------

std::string cmd_simulate(Context& ctx, Section& root) {
  Section s = root.sub("simulate");
  const int n_per_action = s.get<int>("n_per_action", 500);
  const bool binary = s.get<bool>("binary", false);
  const int n_test = s.get<int>("n_test", 1000);
  const auto options = read_sim_options(s);
  s.finish();
  if (n_per_action < 1) throw ValidationError("simulate.n_per_action: must be positive");
  if (n_test < 0) throw ValidationError("simulate.n_test: must be nonnegative");

  const auto gt = simgen::sample_ground_truth(derive_seed(ctx.seed, "ground_truth"));
  const auto data_seed = derive_seed(ctx.seed, "logged");
  const BanditDataset data = binary ? simgen::simulate_binary_dataset(gt, n_per_action, data_seed, options)
                                    : simgen::simulate_dataset(gt, n_per_action, data_seed, options);
  write_output(ctx, "dataset.csv", render([&](std::ostream& o) { io::write_dataset_csv(o, data); }));
  write_output(ctx, "ground_truth.json", io::ground_truth_to_json(gt).dump(1) + "\n");
  if (n_test > 0) {
    const Matrix X = simgen::sample_contexts(n_test, derive_seed(ctx.seed, "test"));
    std::vector<std::string> xh, rh;
    for (int j = 1; j <= X.cols(); ++j) xh.push_back("x" + std::to_string(j));
    for (int k = 1; k <= simgen::kNumActions; ++k) rh.push_back("f" + std::to_string(k));
    write_output(ctx, "test_contexts.csv", render([&](std::ostream& o) { io::write_matrix_csv(o, X, xh); }));
    write_output(ctx, "test_rewards.csv", render([&](std::ostream& o) {
                   io::write_matrix_csv(o, simgen::true_reward_matrix(gt, X), rh);
                 }));
  }
  return "simulate: " + std::to_string(data.size()) + " logged rows, " + std::to_string(n_test) +
         " test contexts -> " + ctx.out_dir.string();
}

std::string cmd_train(Context& ctx, Section& root) {
  Section t = root.sub("train");
  const auto dataset_path = input_path(t, "dataset");
  t.finish();
  Section s = root.sub("sire");
  SireSettings settings = read_sire(s);
  settings.cfg.seed = derive_seed(ctx.seed, "train");

  std::ifstream in(dataset_path);
  const BanditDataset data = io::read_dataset_csv(in);
  sire::RewardModel model;
  std::vector<sire::EpochRecord> log;
  std::string detail;
  if (settings.select) {
    std::vector<std::vector<sire::EpochRecord>> logs;
    auto sel = sire::select_kappa(data, settings.cfg, settings.grid, &logs);
    model = sel.models[sel.best_index];
    log = logs[sel.best_index];
    write_output(ctx, "kappa_selection.csv", render([&](std::ostream& o) {
                   o << "kappa,validation_mse,selected\n";
                   for (std::size_t i = 0; i < sel.grid.size(); ++i) {
                     o << io::format_real(sel.grid[i]) << ',' << io::format_real(sel.validation_mse[i])
                       << ',' << (i == sel.best_index ? 1 : 0) << '\n';
                   }
                 }));
    detail = "selected kappa " + io::format_real(sel.best_kappa) + ", validation MSE " +
             io::format_real(sel.validation_mse[sel.best_index]);
  } else {
    model = sire::train(data, settings.cfg, &log);
    const auto val = data.subset(Split::kValidation);
    detail = "kappa " + io::format_real(settings.cfg.kappa);
    if (val.size() > 0) detail += ", validation MSE " + io::format_real(sire::factual_mse(model, val));
  }
  write_output(ctx, "model.json", model.to_json().dump() + "\n");
  write_output(ctx, "training_log.csv", render([&](std::ostream& o) { io::write_training_log(o, log); }));
  return "train: " + std::string(model.structured ? "structured" : "unstructured") + " model, " +
         detail + " -> " + ctx.out_dir.string();
}

std::string cmd_policy(Context& ctx, Section& root) {
  Section p = root.sub("policy");
  const auto costs = p.required<std::vector<double>>("costs");
  const double budget = p.required<double>("budget");
  const auto solver = read_solver(p);
  const auto estimates = optional_input_path(p, "estimates");
  const auto model_path = optional_input_path(p, "model");
  const auto contexts_path = optional_input_path(p, "contexts");
  p.finish();
  const ccpo::CostSchedule sched{costs, budget};
  p.check([&] { sched.validate(); });

  Matrix F;
  if (estimates) {
    if (model_path || contexts_path) {
      throw ValidationError("policy.estimates: give either estimates or model + contexts, not both");
    }
    std::ifstream in(*estimates);
    F = io::read_matrix_csv(in);
  } else {
    if (!model_path) throw ValidationError("policy.estimates: required key is missing (or set policy.model)");
    if (!contexts_path) throw ValidationError("policy.contexts: required when policy.model is set");
    json mj;
    try {
      mj = json::parse(io::read_file(*model_path));
    } catch (const json::parse_error& e) {
      throw io::ParseError(model_path->string() + ": " + e.what());
    }
    const auto model = sire::RewardModel::from_json(mj);
    std::ifstream in(*contexts_path);
    F = model.predict_all(io::read_matrix_csv(in));
  }
  if (F.cols() != sched.n_actions()) {
    throw ValidationError("policy.costs: " + std::to_string(sched.n_actions()) +
                          " costs for an estimate matrix with " + std::to_string(F.cols()) + " columns");
  }
  const auto sol = solver == evalbench::Solver::kDp ? ccpo::dp_policy(F, sched)
                                                    : ccpo::lagrangian_search(F, sched);
  write_output(ctx, "solution.json", sol.to_json().dump(1) + "\n");
  return "policy: " + std::to_string(sol.assignment.size()) + " customers, avg cost " +
         io::format_real(sol.avg_cost) + ", est. reward " + io::format_real(sol.est_reward) +
         " -> " + ctx.out_dir.string();
}

std::string cmd_crm(Context& ctx, Section& root) {
  Section c = root.sub("crm");
  const auto dataset_path = input_path(c, "dataset");
  const auto costs = c.required<std::vector<double>>("costs");
  const double budget = c.required<double>("budget");
  auto lambda_grid = c.opt<std::vector<double>>("lambda_grid");
  crm::CrmConfig cfg = read_crm(c);
  c.finish();
  cfg.seed = derive_seed(ctx.seed, "crm");
  const ccpo::CostSchedule sched{costs, budget};
  c.check([&] { sched.validate(); });
  if (lambda_grid && lambda_grid->empty()) throw ValidationError("crm.lambda_grid: must not be empty");

  std::ifstream in(dataset_path);
  const BanditDataset data = io::read_dataset_csv(in);
  if (!lambda_grid) lambda_grid = crm::default_lambda_grid(data.subset(Split::kTrain));
  const auto res = crm::run_banditnet_baseline(data, sched, *lambda_grid, cfg);
  write_output(ctx, "solution.json", res.solution.to_json().dump(1) + "\n");
  write_output(ctx, "crm_diagnostics.csv", render([&](std::ostream& o) {
                 o << "lambda,eta,s,snips,avg_cost,feasible,cost_monotonicity_violations,selected\n";
                 for (std::size_t j = 0; j < res.diagnostics.size(); ++j) {
                   const auto& d = res.diagnostics[j];
                   o << io::format_real(d.lambda) << ',' << io::format_real(d.eta) << ','
                     << io::format_real(d.s) << ',' << io::format_real(d.snips) << ','
                     << io::format_real(d.avg_cost) << ',' << (d.feasible ? 1 : 0) << ','
                     << d.cost_monotonicity_violations << ',' << (j == res.selected ? 1 : 0) << '\n';
                 }
               }));
  json pj;
  pj["format"] = "incentive.softmax_policy.v1";
  pj["theta"] = json::array();
  for (Eigen::Index k = 0; k < res.policy.theta.rows(); ++k) {
    std::vector<double> row;
    for (Eigen::Index j = 0; j < res.policy.theta.cols(); ++j) row.push_back(res.policy.theta(k, j));
    pj["theta"].push_back(row);
  }
  pj["input_mean"] = std::vector<double>(res.policy.scaling.mean.data(),
                                         res.policy.scaling.mean.data() + res.policy.scaling.mean.size());
  pj["input_scale"] = std::vector<double>(res.policy.scaling.scale.data(),
                                          res.policy.scaling.scale.data() + res.policy.scaling.scale.size());
  write_output(ctx, "policy.json", pj.dump() + "\n");
  return "crm: selected lambda " + io::format_real(res.diagnostics[res.selected].lambda) + ", SNIPS " +
         io::format_real(res.solution.est_reward) + ", avg cost " + io::format_real(res.solution.avg_cost) +
         " -> " + ctx.out_dir.string();
}

std::vector<std::uint64_t> read_seeds(Section& b, std::uint64_t base) {
  if (b.has("seeds") && b.has("n_seeds")) {
    throw ValidationError(b.key_path("seeds") + ": give either seeds or n_seeds, not both");
  }
  if (b.has("seeds")) return b.required<std::vector<std::uint64_t>>("seeds");
  const int n = b.get<int>("n_seeds", 1);
  if (n < 1) throw ValidationError(b.key_path("n_seeds") + ": must be positive");
  // Seed list derived from the run seed: base, base + 1, ...
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < n; ++i) seeds.push_back(base + static_cast<std::uint64_t>(i));
  return seeds;
}

std::vector<evalbench::Method> read_methods(Section& b, const std::vector<evalbench::Method>& fallback) {
  if (!b.has("methods")) {
    std::vector<std::string> names;
    for (auto m : fallback) names.push_back(evalbench::method_name(m));
    b.get<std::vector<std::string>>("methods", names);
    return fallback;
  }
  std::vector<evalbench::Method> out;
  for (const auto& name : b.required<std::vector<std::string>>("methods")) {
    try {
      out.push_back(evalbench::parse_method(name));
    } catch (const ValidationError& e) {
      throw ValidationError(b.key_path("methods") + ": " + e.what());
    }
  }
  return out;
}

std::string summarize(const evalbench::BenchmarkResult& r) {
  long failed = 0;
  for (const auto& row : r.rows) failed += row.ok() ? 0 : 1;
  return std::to_string(r.rows.size()) + " result rows (" + std::to_string(failed) + " failed)";
}

std::string cmd_bench(Context& ctx, Section& root) {
  Section b = root.sub("bench");
  const auto kind = b.get<std::string>("kind", "simulated");
  if (kind != "simulated" && kind != "nested") {
    throw ValidationError(b.key_path("kind") + ": expected \"simulated\" or \"nested\"");
  }
  const auto seeds = read_seeds(b, ctx.seed);
  evalbench::BenchmarkResult result;

  if (kind == "simulated") {
    evalbench::BenchmarkSpec spec;
    spec.methods = read_methods(b, spec.methods);
    spec.seeds = seeds;
    spec.budgets = b.get<std::vector<double>>("budgets", spec.budgets);
    spec.costs = b.get<std::vector<double>>("costs", spec.costs);
    spec.n_per_action = b.get<int>("n_per_action", spec.n_per_action);
    spec.n_test = b.get<int>("n_test", spec.n_test);
    spec.n_probe = b.get<int>("n_probe", spec.n_probe);
    spec.binary_pehe = b.get<bool>("binary_pehe", spec.binary_pehe);
    spec.solver = read_solver(b);
    spec.sim.noise = parse_noise(b);
    b.finish();
    Section s = root.sub("sire");
    const auto sire_settings = read_sire(s);
    spec.sire = sire_settings.cfg;
    spec.kappa_grid = sire_settings.select ? sire_settings.grid : std::vector<double>{sire_settings.cfg.kappa};
    Section c = root.sub("crm");
    spec.crm = read_crm(c);
    c.finish();
    spec.jobs = ctx.jobs;
    b.check([&] { spec.validate(); });
    result = evalbench::run_benchmark(spec);
  } else {
    evalbench::NestedBenchmarkSpec spec;
    spec.methods = read_methods(b, spec.methods);
    spec.seeds = seeds;
    spec.budgets = b.get<std::vector<double>>("budgets", spec.budgets);
    b.finish();
    Section n = root.sub("nested");
    auto& d = spec.data;
    d.n_samples = n.get<int>("n_samples", d.n_samples);
    d.n_classes = n.get<int>("n_classes", d.n_classes);
    d.neg_ratio = n.get<double>("neg_ratio", d.neg_ratio);
    d.feature_dim = n.get<int>("feature_dim", d.feature_dim);
    d.costs = n.get<std::vector<double>>("costs", d.costs);
    const auto split = n.get<std::vector<double>>("split", {d.split[0], d.split[1], d.split[2]});
    if (split.size() != 3) throw ValidationError(n.key_path("split") + ": expected three fractions");
    d.split = {split[0], split[1], split[2]};
    d.class_separation = n.get<double>("class_separation", d.class_separation);
    Section ns = n.sub("sire");
    Section s = root.sub("sire");
    const auto shared = read_sire(s);
    const auto nested = read_sire(ns, shared);
    n.finish();
    spec.sire = nested.cfg;
    spec.kappa_grid = nested.select ? nested.grid : std::vector<double>{nested.cfg.kappa};
    spec.jobs = ctx.jobs;
    n.check([&] { spec.validate(); });
    result = evalbench::run_nested_benchmark(spec);
  }
  write_output(ctx, "results.csv", render([&](std::ostream& o) { result.write_csv(o); }));
  write_output(ctx, "summary.json", result.summary().dump(1) + "\n");
  write_output(ctx, "timings.csv", render([&](std::ostream& o) { result.write_timings_csv(o); }));
  return "bench (" + kind + "): " + summarize(result) + " -> " + ctx.out_dir.string();
}

std::string cmd_rates(Context& ctx, Section& root) {
  Section r = root.sub("rates");
  isorates::RateConfig cfg;
  cfg.K_grid = r.get<std::vector<int>>("K_grid", cfg.K_grid);
  cfg.n = r.get<int>("n", cfg.n);
  cfg.sigma = r.get<double>("sigma", cfg.sigma);
  cfg.trials = r.get<int>("trials", cfg.trials);
  r.finish();
  cfg.seed = derive_seed(ctx.seed, "rates");
  r.check([&] { cfg.validate(); });
  const auto table = isorates::rate_experiment(cfg);
  write_output(ctx, "rates.csv", render([&](std::ostream& o) { table.write_csv(o); }));
  return "rates: " + std::to_string(table.rows.size()) + " K values x " + std::to_string(cfg.trials) +
         " trials -> " + ctx.out_dir.string();
}

const std::set<std::string> kTopLevel{"command", "seed", "out", "jobs", "simulate", "sire", "train",
                                      "policy",  "crm",  "bench", "nested", "rates"};

int execute(const std::string& command, const fs::path& config_path, std::optional<std::uint64_t> seed,
            std::optional<std::string> out_dir, std::optional<int> jobs, std::ostream& out) {
  if (!fs::exists(config_path)) {
    throw ValidationError("--config: input path '" + config_path.string() + "' does not exist");
  }
  const json cfg = config::load_file(config_path);
  if (!cfg.is_object()) throw io::ParseError("config root must be a table");
  for (const auto& [key, value] : cfg.items()) {
    if (kTopLevel.count(key) == 0) throw ValidationError(key + ": unknown key");
  }

  Context ctx;
  ctx.command = command;
  ctx.resolved = json::object();
  Section root(&cfg, "", &ctx.resolved);
  if (auto c = root.opt<std::string>("command"); c && *c != command) {
    throw ValidationError("command: config is for '" + *c + "' but '" + command + "' was requested");
  }
  ctx.resolved["command"] = command;
  auto cfg_seed = root.opt<std::uint64_t>("seed");
  if (seed) cfg_seed = seed;
  if (!cfg_seed) throw ValidationError("seed: required (set it in the config or pass --seed)");
  ctx.seed = *cfg_seed;
  ctx.resolved["seed"] = ctx.seed;
  auto cfg_out = root.opt<std::string>("out");
  if (out_dir) cfg_out = out_dir;
  if (!cfg_out) throw ValidationError("out: required (set it in the config or pass --out)");
  ctx.out_dir = *cfg_out;
  ctx.resolved["out"] = *cfg_out;
  auto cfg_jobs = root.opt<int>("jobs");
  if (jobs) cfg_jobs = jobs;
  ctx.jobs = cfg_jobs.value_or(1);
  if (ctx.jobs < 1) throw ValidationError("jobs: must be at least 1");
  // The job count never changes results, so it is kept out of the resolved
  // config to keep that file identical across --jobs values.
  ctx.resolved.erase("jobs");

  std::string summary;
  if (command == "simulate") {
    summary = cmd_simulate(ctx, root);
  } else if (command == "train") {
    summary = cmd_train(ctx, root);
  } else if (command == "policy") {
    summary = cmd_policy(ctx, root);
  } else if (command == "crm") {
    summary = cmd_crm(ctx, root);
  } else if (command == "bench") {
    summary = cmd_bench(ctx, root);
  } else {
    summary = cmd_rates(ctx, root);
  }
  write_output(ctx, "resolved_config.json", ctx.resolved.dump(1) + "\n");
  out << summary << '\n';
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Budget-constrained incentive allocation experiments"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<int> jobs;
  for (const char* name : {"simulate", "train", "policy", "crm", "bench", "rates"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "TOML (or .json) config file")->required();
    sub->add_option("--seed", seed, "Run seed (overrides the config)");
    sub->add_option("--out", out_dir, "Output directory (overrides the config)");
    sub->add_option("--jobs", jobs, "Worker threads for independent jobs");
  }

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitParse;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    return execute(command, config_path, seed, out_dir, jobs, out);
  } catch (const io::ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return kExitParse;
  } catch (const ValidationError& e) {
    err << "invalid configuration: " << e.what() << '\n';
    return kExitValidation;
  } catch (const DimensionError& e) {
    err << "invalid input: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace incentive::cli
