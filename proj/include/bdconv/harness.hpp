#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bdconv/ambiguity.hpp"
#include "bdconv/diagnostics.hpp"
#include "bdconv/model.hpp"
#include "bdconv/rng.hpp"
#include "bdconv/subspace.hpp"

namespace bdconv {

enum class SamplerKind { nigs1, nigs2, bgs, mtuple };
enum class PulseFamily { cosine_decay, gaussian_derivative, custom };
enum class SequenceSource { random, mendel };
// Relabeling applied to samples before the MPSRF: none, a per-chain sign
// flip, or a per-sample scale/shift alignment to a common reference pulse.
enum class MpsrfAlign { none, sign, scale_shift };

std::string to_string(SamplerKind s);
std::string to_string(PulseFamily p);
std::string to_string(SequenceSource s);
SamplerKind parse_sampler(const std::string& s);

// One experiment. Serialized as a JSON object with these field names.
struct ExperimentSpec {
  std::string scenario = "default";
  Index K = 300;
  Index T = 21;
  Index L = 21;
  PulseFamily pulse = PulseFamily::cosine_decay;
  std::string pulse_file;  // custom pulse: one value per line
  BasisKind basis = BasisKind::identity;
  double dps_bandwidth = 0.0;  // 0 selects L / (2T)
  SequenceSource sequence = SequenceSource::random;
  double snr_db = 25.0;
  Index n_spikes = 18;
  double amp_variance = 0.5;
  SamplerKind sampler = SamplerKind::nigs1;
  Index iterations = 10000;
  Index chains = 1;
  double burn_in_fraction = 0.75;
  std::uint64_t seed = 1;       // chain c uses seed + c
  std::uint64_t data_seed = 1;  // sequence and noise
  double sigma_gamma_sq = 10.0;
  Hyperpriors hyper;  // "hyperpriors" object; all zero gives the 1/value priors

  // For the first warmup_iterations, sigma_v^2 is floored at
  // var(y) * warmup_floor^(i / warmup_iterations). Applies to every sampler.
  Index warmup_iterations = 500;
  double warmup_floor = 1e-4;

  // NIG samplers
  Index window = 10;
  bool moves = true;
  double sigma_alpha_sq = 0.25;
  double scale_center = 0.0;
  Index shift_max_step = 1;
  AcceptanceForm acceptance = AcceptanceForm::exact;
  double slice_width = 1.0;
  int slice_max_steps = 50;
  int slice_max_shrink = 100;

  // BG samplers
  int tuple = 3;
  double pi0 = -1.0;  // < 0 selects 1 - n_spikes / K
  double bg_sigma_x_sq = 1.0;

  // diagnostics and scoring
  Index mpsrf_cadence = 200;
  double mpsrf_fraction = 0.5;
  MpsrfAlign mpsrf_align = MpsrfAlign::sign;
  Index max_shift = -1;  // < 0 selects T
  bool align_estimates = true;  // scale/shift-aligned posterior mean
  Index trace_stride = 10;  // sample stride of the per-chain trace kept in memory for CSV output

  Index shift_limit() const noexcept { return max_shift < 0 ? T : max_shift; }
  void validate() const;
};

// JSON text. Missing fields keep their defaults; unknown fields are rejected.
ExperimentSpec spec_from_json(const std::string& text);
std::string spec_to_json(const ExperimentSpec& spec);
ExperimentSpec load_spec(const std::filesystem::path& path);

// FNV-1a of the canonical spec JSON, as 16 hex digits.
std::string spec_hash(const ExperimentSpec& spec);

// Directory holding bundled data; BDCONV_DATA_DIR overrides the built-in path.
std::filesystem::path data_dir();

// K-length sequence with exactly n_spikes nonzeros, one at a uniformly chosen
// index of each of n_spikes equal segments (the last absorbs the remainder),
// amplitudes N(0, amp_variance).
Vector generate_sparse_sequence(Index K, Index n_spikes, double amp_variance, Rng& rng);

struct SyntheticMeasurement {
  Vector y;
  double sigma_v_sq = 0.0;
};

// y = h * x + v with sigma_v^2 = ||h * x||^2 / (N 10^(snr_db / 10)).
SyntheticMeasurement synthesize_measurement(const Vector& x, const Vector& h, double snr_db, Rng& rng);

// Bundled K = 300, 18-spike reference sequence.
Vector load_mendel_standin();

struct ExperimentData {
  ModelConfig config;
  Vector x;
  Vector h;
  Measurement measurement;
  double sigma_v_sq = 0.0;
};

Vector make_pulse(const ExperimentSpec& spec);
SubspaceBasis make_basis(const ExperimentSpec& spec);
// Deterministic in spec.data_seed.
ExperimentData make_experiment_data(const ExperimentSpec& spec);

struct ChainSummary {
  Index index = 0;
  std::uint64_t seed = 0;
  bool ok = true;
  std::string failed_step;
  std::string error;
  Vector x_mean;
  Vector gamma_mean;
  Vector h_estimate;
  double sigma_v_sq_mean = 0.0;
  double scale_accept_rate = 0.0;
  double shift_accept_rate = 0.0;
  double correction_a = 1.0;
  Index correction_n = 0;
  NmsePair nmse;
  double mean_iteration_seconds = 0.0;
  std::vector<double> iteration_seconds;
};

struct MpsrfRecord {
  Index iter = 0;
  std::string target;  // "x" or "gamma"
  double rhat = 0.0;
};

struct RunRecord {
  std::string spec_hash;
  ExperimentSpec spec;
  bool ok = true;
  std::vector<ChainSummary> chains;
  std::vector<MpsrfRecord> mpsrf;
  NmsePair nmse;  // first successful chain
  double scale_accept_rate = 0.0;
  double shift_accept_rate = 0.0;
};

std::string record_to_json(const RunRecord& record);
RunRecord record_from_json(const std::string& text);

// Samples kept for CSV output, every spec.trace_stride iterations.
struct ChainTrace {
  std::vector<Index> iters;
  Matrix x;
  Matrix gamma;
  std::vector<double> sigma_v_sq;
};

struct ExperimentResult {
  RunRecord record;
  std::vector<ChainTrace> traces;
  ExperimentData data;
};

// Runs spec.chains independent chains on up to `jobs` threads.
ExperimentResult run_experiment(const ExperimentSpec& spec, int jobs = 1);

// Draws from one chain of the configured sampler. Rows are iterations.
struct ChainSamples {
  Matrix x;
  Matrix gamma;
  Vector sigma_v_sq;
  std::vector<double> iteration_seconds;
  Index scale_accepts = 0;
  Index shift_accepts = 0;
  Index moves = 0;
};

ChainSamples run_chain(const ExperimentSpec& spec, const ExperimentData& data, std::uint64_t seed);

// MPSRF traces of the x and gamma coordinates of completed chains.
std::vector<MpsrfRecord> chain_mpsrf(const std::vector<const ChainSamples*>& chains, const ModelConfig& config,
                                     Index cadence, double fraction, MpsrfAlign align, Index max_shift);

struct SweepGrid {
  ExperimentSpec base;
  std::vector<double> snr_db;
  std::vector<Index> n_spikes;
  std::vector<SamplerKind> samplers;
  Index instances = 1;
};

SweepGrid grid_from_json(const std::string& text);

struct SweepRow {
  double snr_db = 0.0;
  Index n_spikes = 0;
  SamplerKind sampler = SamplerKind::nigs1;
  double tau = 0.0;
  double rate_x = 0.0;
  double rate_h = 0.0;
  Index failures = 0;
};

inline const std::vector<double> kDefaultTaus = {0.01, 0.04, 0.07, 0.1};

// Instance k of every cell uses data_seed = base.data_seed + k, so samplers
// see identical data. Runs single chains.
std::vector<SweepRow> sweep_scenarios(const SweepGrid& grid, const std::vector<double>& taus, int jobs = 1,
                                      std::vector<RunRecord>* records = nullptr);

// Success table over run records grouped by (snr_db, n_spikes, sampler).
std::vector<SweepRow> score_records(const std::vector<RunRecord>& records, const std::vector<double>& taus);

void write_success_csv(std::ostream& out, const std::vector<SweepRow>& rows);
void write_mpsrf_csv(std::ostream& out, const std::vector<MpsrfRecord>& trace);
void write_trace_csv(std::ostream& out, const std::vector<ChainTrace>& traces);

struct TraceTable {
  std::vector<Index> iters;
  std::vector<std::string> coords;
  std::vector<Matrix> chains;  // per chain: iters x coords
};

TraceTable read_trace_csv(std::istream& in);

}  // namespace bdconv
