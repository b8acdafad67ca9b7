#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "bdconv/diagnostics.hpp"
#include "bdconv/error.hpp"
#include "bdconv/harness.hpp"

namespace fs = std::filesystem;
using namespace bdconv;

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> sampler;
  std::optional<Index> iterations;
  std::optional<Index> chains;
  std::optional<double> snr_db;
  std::optional<Index> spikes;
};

void add_spec_flags(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config, "experiment config (JSON)");
  app->add_option("--seed", o.seed, "base seed");
  app->add_option("--sampler", o.sampler, "sampler")->check(CLI::IsMember({"nigs1", "nigs2", "bgs", "mtuple"}));
  app->add_option("--iterations", o.iterations, "iterations per chain")->check(CLI::PositiveNumber);
  app->add_option("--chains", o.chains, "number of chains")->check(CLI::PositiveNumber);
  app->add_option("--snr-db", o.snr_db, "SNR in dB");
  app->add_option("--spikes", o.spikes, "number of spikes")->check(CLI::NonNegativeNumber);
}

ExperimentSpec resolve(const Overrides& o, bool seed_is_data) {
  ExperimentSpec s = o.config.empty() ? ExperimentSpec{} : load_spec(o.config);
  if (o.seed) (seed_is_data ? s.data_seed : s.seed) = *o.seed;
  if (o.sampler) s.sampler = parse_sampler(*o.sampler);
  if (o.iterations) s.iterations = *o.iterations;
  if (o.chains) s.chains = *o.chains;
  if (o.snr_db) s.snr_db = *o.snr_db;
  if (o.spikes) s.n_spikes = *o.spikes;
  s.validate();
  return s;
}

std::ofstream open_out(const fs::path& dir, const std::string& name) {
  fs::create_directories(dir);
  std::ofstream f(dir / name);
  if (!f) throw InvalidArgument("cannot write " + (dir / name).string());
  return f;
}

void write_vector(const fs::path& dir, const std::string& name, const Vector& v) {
  auto f = open_out(dir, name);
  f.precision(17);
  f << "n,value\n";
  for (Index i = 0; i < v.size(); ++i) f << i << ',' << v[i] << '\n';
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw InvalidArgument("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<double> taus_or_default(const std::vector<double>& t) { return t.empty() ? kDefaultTaus : t; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian sparse blind deconvolution by MCMC"};
  app.require_subcommand(1);
  int jobs = 1;
  std::string out_dir = ".";
  std::vector<double> taus;

  Overrides sim_o, run_o;
  auto* sim = app.add_subcommand("simulate", "generate x, h and y");
  add_spec_flags(sim, sim_o);
  sim->add_option("--out", out_dir, "output directory");

  auto* run = app.add_subcommand("run", "run one experiment");
  add_spec_flags(run, run_o);
  run->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  run->add_option("--out", out_dir, "output directory");
  bool no_traces = false;
  run->add_flag("--no-traces", no_traces, "skip traces.csv");

  std::string grid_path;
  auto* sweep = app.add_subcommand("sweep", "grid of scenarios");
  sweep->add_option("--config", grid_path, "grid config (JSON)")->required();
  sweep->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  sweep->add_option("--out", out_dir, "output directory");
  sweep->add_option("--tau", taus, "NMSE thresholds")->delimiter(',');

  std::string trace_path;
  Index cadence = 200;
  double fraction = 0.5;
  auto* mp = app.add_subcommand("mpsrf", "recompute MPSRF from a traces CSV");
  mp->add_option("traces", trace_path, "traces.csv")->required()->check(CLI::ExistingFile);
  mp->add_option("--cadence", cadence, "iterations between checkpoints")->check(CLI::PositiveNumber);
  mp->add_option("--fraction", fraction, "retained fraction")->check(CLI::Range(0.0, 1.0));
  mp->add_option("--out", out_dir, "output directory");

  std::vector<std::string> record_paths;
  auto* score = app.add_subcommand("score", "success table from run records");
  score->add_option("records", record_paths, "record JSON files or directories")->required();
  score->add_option("--tau", taus, "NMSE thresholds")->delimiter(',');
  score->add_option("--out", out_dir, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) {
      const ExperimentSpec spec = resolve(sim_o, true);
      const ExperimentData d = make_experiment_data(spec);
      write_vector(out_dir, "x.csv", d.x);
      write_vector(out_dir, "h.csv", d.h);
      write_vector(out_dir, "y.csv", d.measurement.y);
      auto f = open_out(out_dir, "spec.json");
      f << spec_to_json(spec) << '\n';
      std::cout.precision(17);
      std::cout << "sigma_v_sq " << d.sigma_v_sq << '\n';
    } else if (*run) {
      const ExperimentSpec spec = resolve(run_o, false);
      const ExperimentResult r = run_experiment(spec, jobs);
      {
        auto f = open_out(out_dir, "record.json");
        f << record_to_json(r.record) << '\n';
      }
      {
        auto f = open_out(out_dir, "mpsrf.csv");
        write_mpsrf_csv(f, r.record.mpsrf);
      }
      if (!no_traces) {
        auto f = open_out(out_dir, "traces.csv");
        write_trace_csv(f, r.traces);
      }
      for (const ChainSummary& c : r.record.chains) {
        std::cout << "chain " << c.index << (c.ok ? " ok" : " failed");
        if (c.ok)
          std::cout << " nmse_x " << c.nmse.x << " nmse_h " << c.nmse.h << " sec/iter " << c.mean_iteration_seconds;
        else
          std::cout << " [" << c.failed_step << "] " << c.error;
        std::cout << '\n';
      }
      return r.record.ok ? 0 : 2;
    } else if (*sweep) {
      const SweepGrid grid = grid_from_json(slurp(grid_path));
      std::vector<RunRecord> records;
      const auto rows = sweep_scenarios(grid, taus_or_default(taus), jobs, &records);
      auto f = open_out(out_dir, "success.csv");
      write_success_csv(f, rows);
      const fs::path rec_dir = fs::path(out_dir) / "records";
      for (std::size_t i = 0; i < records.size(); ++i) {
        auto rf = open_out(rec_dir, "run_" + std::to_string(i) + ".json");
        rf << record_to_json(records[i]) << '\n';
      }
      write_success_csv(std::cout, rows);
    } else if (*mp) {
      std::ifstream in(trace_path);
      const TraceTable t = read_trace_csv(in);
      if (t.iters.size() < 2) throw InvalidArgument("mpsrf: need at least two stored iterations");
      const Index stride = t.iters[1] - t.iters[0];
      const Index step = std::max<Index>(1, cadence / std::max<Index>(stride, 1));
      std::vector<MpsrfRecord> trace;
      for (const std::string target : {"x", "gamma"}) {
        std::vector<Index> cols;
        for (std::size_t c = 0; c < t.coords.size(); ++c)
          if (t.coords[c].rfind(target + "[", 0) == 0) cols.push_back(static_cast<Index>(c));
        if (cols.empty()) continue;
        ChainSet set;
        for (const Matrix& m : t.chains) {
          Matrix sel(m.rows(), static_cast<Index>(cols.size()));
          for (std::size_t k = 0; k < cols.size(); ++k) sel.col(static_cast<Index>(k)) = m.col(cols[k]);
          set.chains.push_back(std::move(sel));
        }
        for (const MpsrfPoint& p : mpsrf_trace(set, step, fraction))
          trace.push_back({t.iters[static_cast<std::size_t>(p.iter - 1)], target, p.rhat});
      }
      auto f = open_out(out_dir, "mpsrf.csv");
      write_mpsrf_csv(f, trace);
    } else if (*score) {
      std::vector<RunRecord> records;
      for (const std::string& p : record_paths) {
        if (fs::is_directory(p)) {
          std::vector<fs::path> files;
          // Run records: record.json from run, records/*.json from sweep.
          for (const auto& e : fs::recursive_directory_iterator(p)) {
            const fs::path& f = e.path();
            if (f.extension() == ".json" && (f.filename() == "record.json" || f.parent_path().filename() == "records"))
              files.push_back(f);
          }
          std::sort(files.begin(), files.end());
          for (const auto& fp : files) records.push_back(record_from_json(slurp(fp)));
        } else {
          records.push_back(record_from_json(slurp(p)));
        }
      }
      const auto rows = score_records(records, taus_or_default(taus));
      auto f = open_out(out_dir, "success.csv");
      write_success_csv(f, rows);
      write_success_csv(std::cout, rows);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
