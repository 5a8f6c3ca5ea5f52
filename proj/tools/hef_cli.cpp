// hef: simulate / run / demo-banana / analyze-kl / bench-conv
#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "hef/analysis.hpp"
#include "hef/binary_io.hpp"
#include "hef/experiments.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hef;

namespace {

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct Config {
  GridSpec grid;
  SimConfig sim;
  std::map<FilterKind, FilterParams> filters;
  std::vector<FilterKind> run_filters{FilterKind::HEF, FilterKind::EKF, FilterKind::HistF, FilterKind::PF};
  std::uint64_t seed = 0;
  int seeds = 10;
  std::vector<double> sweep_trans{0.01, 0.02, 0.03};
  std::vector<double> sweep_rot{0.1, 0.15, 0.25};
  BananaConfig banana;
  std::size_t oracle_particles = 1000000;
  std::uint64_t banana_seed = 0;
  std::vector<int> kl_params{8, 16, 32, 64};
  std::vector<double> kl_kappas{1, 2, 4, 8};
  int kl_fine = 4096;
  std::vector<int> bench_sizes{10, 20, 40};
  int bench_ntheta = 8;
  int bench_reps = 3;
  json raw;
};

void allow_only(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return it.key() == k; })) {
      throw ConfigError(where + ": unknown field '" + it.key() + "'");
    }
  }
}

Config default_config() {
  Config c;
  FilterParams p;
  for (FilterKind k : {FilterKind::HEF, FilterKind::EKF, FilterKind::HistF, FilterKind::PF}) c.filters[k] = p;
  return c;
}

Config load_config(const std::string& path) {
  Config c = default_config();
  if (path.empty()) return c;
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config " + path);
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  c.raw = j;
  try {
    allow_only(j, {"version", "grid", "sim", "filters", "run", "banana", "analyze_kl", "bench_conv"}, "config");
    if (j.contains("grid")) {
      c.grid = j.at("grid").get<GridSpec>();
      c.grid.validate();
    }
    json sim = j.value("sim", json::object());
    sim["grid"] = c.grid;
    c.sim = sim_config_from_json(sim);
    if (j.contains("filters")) {
      const json& fj = j.at("filters");
      allow_only(fj, {"hef", "ekf", "histf", "pf"}, "filters");
      for (auto it = fj.begin(); it != fj.end(); ++it) {
        c.filters[parse_filter(it.key())] = filter_params_from_json(it.value());
      }
    }
    if (j.contains("run")) {
      const json& r = j.at("run");
      allow_only(r, {"filters", "seed", "seeds", "sweep"}, "run");
      if (r.contains("filters")) {
        c.run_filters.clear();
        for (const auto& s : r.at("filters")) c.run_filters.push_back(parse_filter(s.get<std::string>()));
      }
      if (r.contains("seed")) c.seed = r.at("seed").get<std::uint64_t>();
      if (r.contains("seeds")) c.seeds = r.at("seeds").get<int>();
      if (r.contains("sweep")) {
        const json& s = r.at("sweep");
        allow_only(s, {"sigma_trans", "sigma_rot"}, "run.sweep");
        if (s.contains("sigma_trans")) c.sweep_trans = s.at("sigma_trans").get<std::vector<double>>();
        if (s.contains("sigma_rot")) c.sweep_rot = s.at("sigma_rot").get<std::vector<double>>();
      }
    }
    if (j.contains("banana")) {
      const json& b = j.at("banana");
      allow_only(b, {"n_steps", "step", "sigma_trans", "sigma_rot", "prior_rect", "oracle_particles", "seed"},
                 "banana");
      c.banana.n_steps = b.value("n_steps", c.banana.n_steps);
      c.banana.step = b.value("step", c.banana.step);
      c.banana.sigma_trans = b.value("sigma_trans", c.banana.sigma_trans);
      c.banana.sigma_rot = b.value("sigma_rot", c.banana.sigma_rot);
      if (b.contains("prior_rect")) {
        const auto r = b.at("prior_rect").get<std::vector<double>>();
        if (r.size() != 4 && r.size() != 6) throw ConfigError("banana.prior_rect: expected 4 or 6 numbers");
        for (std::size_t i = 0; i < r.size(); ++i) c.banana.prior_rect[i] = r[i];
      }
      c.oracle_particles = b.value("oracle_particles", c.oracle_particles);
      c.banana_seed = b.value("seed", c.banana_seed);
    }
    if (j.contains("analyze_kl")) {
      const json& a = j.at("analyze_kl");
      allow_only(a, {"params", "kappas", "fine"}, "analyze_kl");
      c.kl_params = a.value("params", c.kl_params);
      c.kl_kappas = a.value("kappas", c.kl_kappas);
      c.kl_fine = a.value("fine", c.kl_fine);
    }
    if (j.contains("bench_conv")) {
      const json& a = j.at("bench_conv");
      allow_only(a, {"sizes", "ntheta", "reps"}, "bench_conv");
      c.bench_sizes = a.value("sizes", c.bench_sizes);
      c.bench_ntheta = a.value("ntheta", c.bench_ntheta);
      c.bench_reps = a.value("reps", c.bench_reps);
    }
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path + ": " + e.what());
  }
  c.banana.grid = c.grid;
  if (c.seeds < 1) throw ConfigError("run.seeds: must be at least 1");
  return c;
}

int thread_cap() {
  int n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* e = std::getenv("HEF_THREADS")) {
    const int v = std::atoi(e);
    if (v < 1) throw ConfigError("HEF_THREADS must be a positive integer");
    n = std::min(n, v);
  }
  return n;
}

// Runs jobs 0..n-1 on up to thread_cap() workers.
template <class F>
void parallel_for(std::size_t n, F&& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(thread_cap()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lk(mu);
          if (!err) err = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

void prepare_out(const fs::path& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw ConfigError("cannot create output directory " + out.string() + ": " + ec.message());
}

void check_overwrite(const fs::path& p, bool force) {
  if (fs::exists(p) && !force) throw ConfigError(p.string() + " exists (use --force to overwrite)");
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

std::vector<std::uint64_t> seed_list(const Config& c, bool use_seeds) {
  std::vector<std::uint64_t> s;
  const int n = use_seeds ? c.seeds : 1;
  for (int i = 0; i < n; ++i) s.push_back(c.seed + static_cast<std::uint64_t>(i));
  return s;
}

// ---- subcommands ----

struct Common {
  std::string config;
  std::string out = "out";
  bool force = false;
  std::optional<std::uint64_t> seed;
  std::optional<int> seeds;
  std::string filters;
  bool dump = false;
  std::string dataset;
  bool sweep = false;
};

Config resolve(const Common& o) {
  Config c = load_config(o.config);
  if (o.seed) c.seed = *o.seed;
  if (o.seeds) {
    if (*o.seeds < 1) throw ConfigError("--seeds: must be at least 1");
    c.seeds = *o.seeds;
  }
  if (!o.filters.empty()) {
    c.run_filters.clear();
    std::stringstream ss(o.filters);
    for (std::string f; std::getline(ss, f, ',');) {
      if (!f.empty()) c.run_filters.push_back(parse_filter(f));
    }
    if (c.run_filters.empty()) throw ConfigError("--filters: no filters given");
  }
  return c;
}

int cmd_simulate(const Common& o) {
  const Config c = resolve(o);
  const fs::path out(o.out);
  prepare_out(out);
  for (std::uint64_t s : seed_list(c, o.seeds.has_value())) {
    const fs::path p = out / ("dataset_seed" + std::to_string(s) + ".jsonl");
    check_overwrite(p, o.force);
    save_dataset(simulate_range_world(c.sim, s), p.string());
    std::cout << p.string() << "\n";
  }
  return 0;
}

struct Job {
  FilterKind kind;
  std::uint64_t seed;
  FilterParams params;
  RunResult result;
};

void run_jobs(std::vector<Job>& jobs, const std::map<std::uint64_t, Dataset>& data, const fs::path& out, bool dump,
              bool write_logs) {
  // one transform per option set, shared by all HEF runs
  std::map<std::pair<int, double>, TransformPtr> transforms;
  for (const auto& j : jobs) {
    if (j.kind != FilterKind::HEF) continue;
    const auto key = std::make_pair(j.params.transform.pad, j.params.transform.node_spacing);
    if (!transforms.count(key)) {
      transforms[key] = std::make_shared<const Se2Fourier>(data.begin()->second.grid, j.params.transform);
    }
  }
  parallel_for(jobs.size(), [&](std::size_t i) {
    Job& j = jobs[i];
    const Dataset& d = data.at(j.seed);
    const std::string stem = std::string(filter_name(j.kind)) + "_seed" + std::to_string(j.seed);
    BeliefSink sink;
    if (dump) {
      sink = [&, stem](int t, const DensityGrid& b) {
        save_grid(b, (out / "beliefs" / (stem + "_t" + std::to_string(t) + ".bin")).string());
      };
    }
    TransformPtr tr;
    if (j.kind == FilterKind::HEF) tr = transforms.at({j.params.transform.pad, j.params.transform.node_spacing});
    j.result = run_filter(j.kind, d, j.params, j.seed, tr, sink);
    if (write_logs) {
      std::ostringstream log;
      log << json{{"filter", filter_name(j.kind)}, {"seed", j.seed}, {"params", to_json(j.params)}}.dump() << "\n";
      for (const auto& r : j.result.records) log << to_json(r).dump() << "\n";
      atomic_write((out / "runs" / (stem + ".jsonl")).string(), log.str());
    }
  });
}

struct Agg {
  double mean = 0.0, sd = 0.0;
};

Agg aggregate(const std::vector<double>& v) {
  Agg a;
  for (double x : v) a.mean += x;
  a.mean /= v.size();
  for (double x : v) a.sd += (x - a.mean) * (x - a.mean);
  a.sd = v.size() > 1 ? std::sqrt(a.sd / (v.size() - 1)) : 0.0;
  return a;
}

int cmd_run(const Common& o) {
  const Config c = resolve(o);
  const fs::path out(o.out);
  prepare_out(out);
  const std::vector<std::uint64_t> seeds = seed_list(c, true);
  check_overwrite(out / "metrics.csv", o.force);

  std::map<std::uint64_t, Dataset> data;
  if (!o.dataset.empty()) {
    const Dataset d = load_dataset(o.dataset);
    for (auto s : seeds) data[s] = d;
  } else {
    for (auto s : seeds) data[s] = simulate_range_world(c.sim, s);
  }
  for (const auto& [s, d] : data) {
    if (!(d.grid == c.grid)) throw ConfigError("dataset grid does not match the configured grid");
  }

  std::map<FilterKind, FilterParams> chosen = c.filters;
  if (o.sweep) {
    std::ostringstream csv;
    csv << "filter,sigma_trans,sigma_rot,nll_mean,nll_std\n";
    json choice = json::object();
    for (FilterKind k : c.run_filters) {
      std::vector<Job> jobs;
      for (double st : c.sweep_trans) {
        for (double sr : c.sweep_rot) {
          FilterParams p = c.filters.at(k);
          p.sigma_trans = st;
          p.sigma_rot = sr;
          for (auto s : seeds) jobs.push_back({k, s, p, {}});
        }
      }
      run_jobs(jobs, data, out, false, false);
      double best = INFINITY;
      for (std::size_t i = 0; i < jobs.size(); i += seeds.size()) {
        std::vector<double> nll;
        for (std::size_t q = 0; q < seeds.size(); ++q) nll.push_back(jobs[i + q].result.metrics.nll);
        const Agg a = aggregate(nll);
        csv << filter_name(k) << "," << fmt(jobs[i].params.sigma_trans) << "," << fmt(jobs[i].params.sigma_rot) << ","
            << fmt(a.mean) << "," << fmt(a.sd) << "\n";
        if (a.mean < best) {
          best = a.mean;
          chosen[k] = jobs[i].params;
        }
      }
      choice[filter_name(k)] = {{"sigma_trans", chosen[k].sigma_trans}, {"sigma_rot", chosen[k].sigma_rot},
                                {"nll_mean", best}};
      std::cout << "sweep " << filter_name(k) << ": sigma_trans=" << chosen[k].sigma_trans
                << " sigma_rot=" << chosen[k].sigma_rot << " nll=" << best << "\n";
    }
    atomic_write((out / "sweep.csv").string(), csv.str());
    atomic_write((out / "sweep_choice.json").string(), choice.dump(2) + "\n");
  }

  std::vector<Job> jobs;
  for (FilterKind k : c.run_filters) {
    for (auto s : seeds) jobs.push_back({k, s, chosen.at(k), {}});
  }
  run_jobs(jobs, data, out, o.dump, true);

  std::ostringstream metrics, summary;
  metrics << "filter,seed,ate_mode,ate_mean,nll\n";
  summary << "filter,ate_mode_mean,ate_mode_std,ate_mean_mean,ate_mean_std,nll_mean,nll_std\n";
  std::map<FilterKind, std::vector<const Job*>> by;
  for (const auto& j : jobs) {
    metrics << filter_name(j.kind) << "," << j.seed << "," << fmt(j.result.metrics.ate_mode) << ","
            << fmt(j.result.metrics.ate_mean) << "," << fmt(j.result.metrics.nll) << "\n";
    by[j.kind].push_back(&j);
  }
  for (FilterKind k : c.run_filters) {
    std::vector<double> am, an, nl;
    for (const Job* j : by[k]) {
      am.push_back(j->result.metrics.ate_mode);
      an.push_back(j->result.metrics.ate_mean);
      nl.push_back(j->result.metrics.nll);
    }
    const Agg a = aggregate(am), b = aggregate(an), n = aggregate(nl);
    summary << filter_name(k) << "," << fmt(a.mean) << "," << fmt(a.sd) << "," << fmt(b.mean) << "," << fmt(b.sd)
            << "," << fmt(n.mean) << "," << fmt(n.sd) << "\n";
  }
  atomic_write((out / "metrics.csv").string(), metrics.str());
  atomic_write((out / "summary.csv").string(), summary.str());
  std::cout << summary.str();
  return 0;
}

int cmd_demo_banana(const Common& o) {
  const Config c = resolve(o);
  const fs::path out(o.out);
  prepare_out(out);
  check_overwrite(out / "banana.csv", o.force);
  const Dataset d = banana_scenario(c.banana);
  const MapTransform mt = d.transform();
  const DiffDriveModel gm{c.banana.sigma_trans * mt.scale, c.banana.sigma_rot};
  const DensityGrid oracle = particle_oracle(d, gm, c.oracle_particles, c.banana_seed);
  save_grid(oracle, (out / "banana" / "oracle.bin").string());
  FilterParams p = c.filters.at(FilterKind::HEF);
  p.sigma_trans = c.banana.sigma_trans;
  p.sigma_rot = c.banana.sigma_rot;
  std::ostringstream csv;
  csv << "filter,tv_vs_oracle\n";
  for (FilterKind k : {FilterKind::HEF, FilterKind::EKF, FilterKind::HistF, FilterKind::PF}) {
    FilterParams q = p;
    q.n_particles = c.filters.at(FilterKind::PF).n_particles;
    DensityGrid last;
    run_filter(k, d, q, c.banana_seed, nullptr, [&](int t, const DensityGrid& b) {
      save_grid(b, (out / "banana" / (std::string(filter_name(k)) + "_t" + std::to_string(t) + ".bin")).string());
      last = b;
    });
    csv << filter_name(k) << "," << fmt(total_variation(last, oracle)) << "\n";
  }
  atomic_write((out / "banana.csv").string(), csv.str());
  std::cout << csv.str();
  return 0;
}

int cmd_analyze_kl(const Common& o) {
  const Config c = resolve(o);
  const fs::path out(o.out);
  prepare_out(out);
  check_overwrite(out / "fidelity.csv", o.force);
  std::ostringstream csv;
  csv << "params,kappa,method,d_kl\n";
  for (const auto& r : fidelity_sweep(c.kl_params, c.kl_kappas, c.kl_fine)) {
    csv << r.params << "," << fmt(r.kappa) << "," << r.method << "," << std::setprecision(10) << r.kl << "\n";
  }
  atomic_write((out / "fidelity.csv").string(), csv.str());
  std::cout << csv.str();
  return 0;
}

int cmd_bench_conv(const Common& o) {
  const Config c = resolve(o);
  const fs::path out(o.out);
  prepare_out(out);
  check_overwrite(out / "bench_conv.csv", o.force);
  const auto rows = bench_convolution(c.bench_sizes, c.bench_ntheta, c.bench_reps);
  std::ostringstream csv;
  csv << "method,size,seconds,max_abs_err\n";
  for (const auto& r : rows) {
    csv << r.method << ",\"(" << r.nx << "," << r.ny << "," << r.ntheta << ")\"," << fmt(r.seconds) << ","
        << fmt(r.max_abs_err) << "\n";
  }
  atomic_write((out / "bench_conv.csv").string(), csv.str());
  std::cout << csv.str();
  return 0;
}

void report(bool as_json, const char* kind, const std::string& msg, int code) {
  if (as_json) {
    std::cerr << json{{"error", kind}, {"message", msg}, {"exit_code", code}}.dump() << "\n";
  } else {
    std::cerr << "hef: " << msg << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Harmonic exponential filter on SE(2): simulation, filtering, analysis"};
  app.require_subcommand(1);
  Common o;
  bool json_errors = false;
  app.add_flag("--json-errors", json_errors, "Print errors as JSON on stderr");

  auto common = [&](CLI::App* sc, bool run_flags) {
    sc->add_option("--config", o.config, "JSON config file")->check(CLI::ExistingFile);
    sc->add_option("--out", o.out, "Output directory");
    sc->add_flag("--force", o.force, "Overwrite existing outputs");
    sc->add_option("--seed", o.seed, "Base seed");
    sc->add_option("--seeds", o.seeds, "Number of consecutive seeds");
    sc->add_flag("--json-errors", json_errors, "Print errors as JSON on stderr");
    if (run_flags) {
      sc->add_option("--filters", o.filters, "Comma-separated subset of hef,ekf,histf,pf");
      sc->add_flag("--dump-beliefs", o.dump, "Write per-step belief grids (HEF1)");
      sc->add_option("--dataset", o.dataset, "Replay a JSONL dataset instead of simulating")
          ->check(CLI::ExistingFile);
      sc->add_flag("--sweep", o.sweep, "Grid-search filter noise by NLL before the final run");
    }
  };
  auto* sim = app.add_subcommand("simulate", "Write range-only datasets");
  common(sim, false);
  auto* run = app.add_subcommand("run", "Run filters and write run logs and metrics");
  common(run, true);
  auto* banana = app.add_subcommand("demo-banana", "Banana scenario with all four filters");
  common(banana, false);
  auto* kl = app.add_subcommand("analyze-kl", "Fidelity sweep on S1");
  common(kl, false);
  auto* bench = app.add_subcommand("bench-conv", "Direct vs spectral convolution timing");
  common(bench, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report(json_errors, "usage", e.what(), 2);
    return 2;
  }

  try {
    if (*sim) return cmd_simulate(o);
    if (*run) return cmd_run(o);
    if (*banana) return cmd_demo_banana(o);
    if (*kl) return cmd_analyze_kl(o);
    if (*bench) return cmd_bench_conv(o);
  } catch (const std::invalid_argument& e) {
    report(json_errors, "config", e.what(), 2);
    return 2;
  } catch (const std::exception& e) {
    report(json_errors, "runtime", e.what(), 3);
    return 3;
  }
  return 0;
}
