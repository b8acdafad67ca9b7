#include "bdconv/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "bdconv/bg.hpp"
#include "bdconv/error.hpp"
#include "bdconv/nigs1.hpp"
#include "bdconv/nigs2.hpp"
#include "json.hpp"

#ifndef BDCONV_DEFAULT_DATA_DIR
#define BDCONV_DEFAULT_DATA_DIR "data"
#endif

namespace bdconv {

using Json = nlohmann::ordered_json;

namespace {

template <typename E>
E enum_from(const std::string& s, std::initializer_list<std::pair<const char*, E>> table, const char* what) {
  for (const auto& [name, value] : table)
    if (s == name) return value;
  throw InvalidArgument(std::string("unknown ") + what + ": " + s);
}

std::string to_string(BasisKind b) { return b == BasisKind::dps ? "dps" : "identity"; }
std::string to_string(AcceptanceForm f) { return f == AcceptanceForm::published ? "published" : "exact"; }

Json vec_json(const Vector& v) {
  Json a = Json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vector json_vec(const Json& a) {
  Vector v(static_cast<Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Index>(i)] = a[i].get<double>();
  return v;
}

// NaN has no JSON literal; it is written as null.
Json num_json(double v) { return std::isnan(v) ? Json(nullptr) : Json(v); }
double json_num(const Json& j) { return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>(); }

// Runs fn(k) for k in [0, count) on up to `jobs` threads.
template <typename F>
void parallel_for(Index count, int jobs, F fn) {
  const Index workers = std::max<Index>(1, std::min<Index>(count, jobs));
  if (workers <= 1) {
    for (Index k = 0; k < count; ++k) fn(k);
    return;
  }
  std::atomic<Index> next{0};
  std::vector<std::thread> pool;
  for (Index w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (Index k = next++; k < count; k = next++) fn(k);
    });
  for (auto& t : pool) t.join();
}

struct Timer {
#ifdef BDCONV_NO_TIMING
  void start() {}
  double stop() { return 0.0; }
#else
  std::chrono::steady_clock::time_point t0;
  void start() { t0 = std::chrono::steady_clock::now(); }
  double stop() { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); }
#endif
};

}  // namespace

std::string to_string(SamplerKind s) {
  switch (s) {
    case SamplerKind::nigs1: return "nigs1";
    case SamplerKind::nigs2: return "nigs2";
    case SamplerKind::bgs: return "bgs";
    case SamplerKind::mtuple: return "mtuple";
  }
  return "nigs1";
}

std::string to_string(PulseFamily p) {
  switch (p) {
    case PulseFamily::cosine_decay: return "cosine_decay";
    case PulseFamily::gaussian_derivative: return "gaussian_derivative";
    case PulseFamily::custom: return "custom";
  }
  return "cosine_decay";
}

std::string to_string(SequenceSource s) { return s == SequenceSource::mendel ? "mendel" : "random"; }

SamplerKind parse_sampler(const std::string& s) {
  return enum_from<SamplerKind>(s,
                                {{"nigs1", SamplerKind::nigs1},
                                 {"nigs2", SamplerKind::nigs2},
                                 {"bgs", SamplerKind::bgs},
                                 {"mtuple", SamplerKind::mtuple},
                                 {"mtuple_bgs", SamplerKind::mtuple}},
                                "sampler");
}

void ExperimentSpec::validate() const {
  if (K < 1 || T < 1 || L < 1) throw InvalidArgument("spec: K, T, L must be >= 1");
  if (L > T) throw InvalidArgument("spec: L must not exceed T");
  if (basis == BasisKind::identity && L != T) throw InvalidArgument("spec: identity basis needs L == T");
  if (n_spikes < 0 || n_spikes > K) throw InvalidArgument("spec: n_spikes must lie in [0, K]");
  if (iterations < 1) throw InvalidArgument("spec: iterations must be >= 1");
  if (chains < 1) throw InvalidArgument("spec: chains must be >= 1");
  if (!(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0))
    throw InvalidArgument("spec: burn_in_fraction must lie in [0, 1)");
  if (!std::isfinite(snr_db)) throw InvalidArgument("spec: snr_db must be finite");
  if (!(amp_variance > 0.0)) throw InvalidArgument("spec: amp_variance must be positive");
  if (!(sigma_gamma_sq > 0.0)) throw InvalidArgument("spec: sigma_gamma_sq must be positive");
  hyper.validate();
  if (warmup_iterations < 0) throw InvalidArgument("spec: warmup_iterations must be >= 0");
  if (!(warmup_floor > 0.0 && warmup_floor <= 1.0)) throw InvalidArgument("spec: warmup_floor must lie in (0, 1]");
  if (window < 1) throw InvalidArgument("spec: window must be >= 1");
  if (shift_max_step < 1) throw InvalidArgument("spec: shift_max_step must be >= 1");
  if (!(sigma_alpha_sq > 0.0)) throw InvalidArgument("spec: sigma_alpha_sq must be positive");
  if (tuple < 1 || tuple > 8) throw InvalidArgument("spec: tuple must lie in [1, 8]");
  if (pi0 >= 1.0) throw InvalidArgument("spec: pi0 must be < 1");
  if (!(bg_sigma_x_sq > 0.0)) throw InvalidArgument("spec: bg_sigma_x_sq must be positive");
  if (mpsrf_cadence < 1) throw InvalidArgument("spec: mpsrf_cadence must be >= 1");
  if (!(mpsrf_fraction > 0.0 && mpsrf_fraction <= 1.0))
    throw InvalidArgument("spec: mpsrf_fraction must lie in (0, 1]");
  if (trace_stride < 1) throw InvalidArgument("spec: trace_stride must be >= 1");
  if (pulse == PulseFamily::custom && pulse_file.empty())
    throw InvalidArgument("spec: custom pulse needs pulse_file");
}

namespace {

Json spec_json(const ExperimentSpec& s) {
  Json j;
  j["scenario"] = s.scenario;
  j["K"] = s.K;
  j["T"] = s.T;
  j["L"] = s.L;
  j["pulse"] = to_string(s.pulse);
  j["pulse_file"] = s.pulse_file;
  j["basis"] = to_string(s.basis);
  j["dps_bandwidth"] = s.dps_bandwidth;
  j["sequence"] = to_string(s.sequence);
  j["snr_db"] = s.snr_db;
  j["n_spikes"] = s.n_spikes;
  j["amp_variance"] = s.amp_variance;
  j["sampler"] = to_string(s.sampler);
  j["iterations"] = s.iterations;
  j["chains"] = s.chains;
  j["burn_in_fraction"] = s.burn_in_fraction;
  j["seed"] = s.seed;
  j["data_seed"] = s.data_seed;
  j["sigma_gamma_sq"] = s.sigma_gamma_sq;
  j["hyperpriors"] = {{"alpha_shape", s.hyper.alpha_shape}, {"alpha_rate", s.hyper.alpha_rate},
                      {"beta_shape", s.hyper.beta_shape},   {"beta_rate", s.hyper.beta_rate},
                      {"sigma_v_shape", s.hyper.sigma_v_shape}, {"sigma_v_scale", s.hyper.sigma_v_scale}};
  j["warmup_iterations"] = s.warmup_iterations;
  j["warmup_floor"] = s.warmup_floor;
  j["window"] = s.window;
  j["moves"] = s.moves;
  j["sigma_alpha_sq"] = s.sigma_alpha_sq;
  j["scale_center"] = s.scale_center;
  j["shift_max_step"] = s.shift_max_step;
  j["acceptance"] = to_string(s.acceptance);
  j["slice_width"] = s.slice_width;
  j["slice_max_steps"] = s.slice_max_steps;
  j["slice_max_shrink"] = s.slice_max_shrink;
  j["tuple"] = s.tuple;
  j["pi0"] = s.pi0;
  j["bg_sigma_x_sq"] = s.bg_sigma_x_sq;
  j["mpsrf_cadence"] = s.mpsrf_cadence;
  j["mpsrf_fraction"] = s.mpsrf_fraction;
  j["mpsrf_align"] = s.mpsrf_align == MpsrfAlign::none ? "none" : s.mpsrf_align == MpsrfAlign::sign ? "sign" : "scale_shift";
  j["max_shift"] = s.max_shift;
  j["align_estimates"] = s.align_estimates;
  j["trace_stride"] = s.trace_stride;
  return j;
}

ExperimentSpec spec_from(const Json& j) {
  if (!j.is_object()) throw InvalidArgument("spec: expected a JSON object");
  ExperimentSpec s;
  for (const auto& [key, v] : j.items()) {
    if (key == "scenario") s.scenario = v.get<std::string>();
    else if (key == "K") s.K = v.get<Index>();
    else if (key == "T") s.T = v.get<Index>();
    else if (key == "L") s.L = v.get<Index>();
    else if (key == "pulse")
      s.pulse = enum_from<PulseFamily>(v.get<std::string>(),
                                       {{"cosine_decay", PulseFamily::cosine_decay},
                                        {"gaussian_derivative", PulseFamily::gaussian_derivative},
                                        {"custom", PulseFamily::custom}},
                                       "pulse");
    else if (key == "pulse_file") s.pulse_file = v.get<std::string>();
    else if (key == "basis")
      s.basis = enum_from<BasisKind>(v.get<std::string>(),
                                     {{"identity", BasisKind::identity}, {"dps", BasisKind::dps}}, "basis");
    else if (key == "dps_bandwidth") s.dps_bandwidth = v.get<double>();
    else if (key == "sequence")
      s.sequence = enum_from<SequenceSource>(
          v.get<std::string>(), {{"random", SequenceSource::random}, {"mendel", SequenceSource::mendel}},
          "sequence");
    else if (key == "snr_db") s.snr_db = v.get<double>();
    else if (key == "n_spikes") s.n_spikes = v.get<Index>();
    else if (key == "amp_variance") s.amp_variance = v.get<double>();
    else if (key == "sampler") s.sampler = parse_sampler(v.get<std::string>());
    else if (key == "iterations") s.iterations = v.get<Index>();
    else if (key == "chains") s.chains = v.get<Index>();
    else if (key == "burn_in_fraction") s.burn_in_fraction = v.get<double>();
    else if (key == "seed") s.seed = v.get<std::uint64_t>();
    else if (key == "data_seed") s.data_seed = v.get<std::uint64_t>();
    else if (key == "sigma_gamma_sq") s.sigma_gamma_sq = v.get<double>();
    else if (key == "hyperpriors") {
      if (!v.is_object()) throw InvalidArgument("spec: hyperpriors must be an object");
      for (const auto& [hk, hv] : v.items()) {
        double* field = hk == "alpha_shape"     ? &s.hyper.alpha_shape
                        : hk == "alpha_rate"    ? &s.hyper.alpha_rate
                        : hk == "beta_shape"    ? &s.hyper.beta_shape
                        : hk == "beta_rate"     ? &s.hyper.beta_rate
                        : hk == "sigma_v_shape" ? &s.hyper.sigma_v_shape
                        : hk == "sigma_v_scale" ? &s.hyper.sigma_v_scale
                                                : nullptr;
        if (!field) throw InvalidArgument("spec: unknown hyperprior field '" + hk + "'");
        *field = hv.get<double>();
      }
    }
    else if (key == "warmup_iterations") s.warmup_iterations = v.get<Index>();
    else if (key == "warmup_floor") s.warmup_floor = v.get<double>();
    else if (key == "window") s.window = v.get<Index>();
    else if (key == "moves") s.moves = v.get<bool>();
    else if (key == "sigma_alpha_sq") s.sigma_alpha_sq = v.get<double>();
    else if (key == "scale_center") s.scale_center = v.get<double>();
    else if (key == "shift_max_step") s.shift_max_step = v.get<Index>();
    else if (key == "acceptance")
      s.acceptance = enum_from<AcceptanceForm>(
          v.get<std::string>(), {{"exact", AcceptanceForm::exact}, {"published", AcceptanceForm::published}},
          "acceptance");
    else if (key == "slice_width") s.slice_width = v.get<double>();
    else if (key == "slice_max_steps") s.slice_max_steps = v.get<int>();
    else if (key == "slice_max_shrink") s.slice_max_shrink = v.get<int>();
    else if (key == "tuple") s.tuple = v.get<int>();
    else if (key == "pi0") s.pi0 = v.get<double>();
    else if (key == "bg_sigma_x_sq") s.bg_sigma_x_sq = v.get<double>();
    else if (key == "mpsrf_cadence") s.mpsrf_cadence = v.get<Index>();
    else if (key == "mpsrf_fraction") s.mpsrf_fraction = v.get<double>();
    else if (key == "mpsrf_align")
      s.mpsrf_align = enum_from<MpsrfAlign>(v.get<std::string>(),
                                            {{"none", MpsrfAlign::none},
                                             {"sign", MpsrfAlign::sign},
                                             {"scale_shift", MpsrfAlign::scale_shift}},
                                            "mpsrf_align");
    else if (key == "max_shift") s.max_shift = v.get<Index>();
    else if (key == "align_estimates") s.align_estimates = v.get<bool>();
    else if (key == "trace_stride") s.trace_stride = v.get<Index>();
    else throw InvalidArgument("spec: unknown field " + key);
  }
  s.validate();
  return s;
}

Json parse_json(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    throw InvalidArgument(std::string("malformed JSON: ") + e.what());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

ExperimentSpec spec_from_json(const std::string& text) {
  try {
    return spec_from(parse_json(text));
  } catch (const Json::exception& e) {
    throw InvalidArgument(std::string("spec: ") + e.what());
  }
}

std::string spec_to_json(const ExperimentSpec& spec) { return spec_json(spec).dump(2); }

ExperimentSpec load_spec(const std::filesystem::path& path) { return spec_from_json(read_file(path)); }

std::string spec_hash(const ExperimentSpec& spec) {
  const std::string canon = spec_json(spec).dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : canon) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::filesystem::path data_dir() {
  if (const char* env = std::getenv("BDCONV_DATA_DIR"); env && *env) return env;
  return BDCONV_DEFAULT_DATA_DIR;
}

Vector generate_sparse_sequence(Index K, Index n_spikes, double amp_variance, Rng& rng) {
  if (K < 1) throw InvalidArgument("generate_sparse_sequence: K must be >= 1");
  if (n_spikes < 0 || n_spikes > K) throw InvalidArgument("generate_sparse_sequence: n_spikes must lie in [0, K]");
  if (!(amp_variance > 0.0)) throw InvalidArgument("generate_sparse_sequence: amp_variance must be positive");
  Vector x = Vector::Zero(K);
  if (n_spikes == 0) return x;
  const Index seg = K / n_spikes;
  const double sd = std::sqrt(amp_variance);
  for (Index s = 0; s < n_spikes; ++s) {
    const Index begin = s * seg;
    const Index len = (s + 1 == n_spikes) ? K - begin : seg;
    std::uniform_int_distribution<Index> pick(0, len - 1);
    const Index at = begin + pick(rng.engine());
    x[at] = sd * rng.normal();
    if (x[at] == 0.0) x[at] = sd;  // keep the nonzero count exact
  }
  return x;
}

SyntheticMeasurement synthesize_measurement(const Vector& x, const Vector& h, double snr_db, Rng& rng) {
  if (!std::isfinite(snr_db)) throw InvalidArgument("synthesize_measurement: snr_db must be finite");
  const Vector clean = convolve(h, x);
  const double power = clean.squaredNorm();
  if (!(power > 0.0)) throw InvalidArgument("synthesize_measurement: zero signal");
  SyntheticMeasurement m;
  m.sigma_v_sq = power / (static_cast<double>(clean.size()) * std::pow(10.0, snr_db / 10.0));
  const double sd = std::sqrt(m.sigma_v_sq);
  m.y = clean;
  for (Index i = 0; i < m.y.size(); ++i) m.y[i] += sd * rng.normal();
  return m;
}

namespace {

// Second column of a headed two-column CSV, or the only column.
Vector read_column(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  std::vector<double> vals;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    const std::string field = comma == std::string::npos ? line : line.substr(comma + 1);
    try {
      std::size_t used = 0;
      const double v = std::stod(field, &used);
      vals.push_back(v);
    } catch (const std::exception&) {
      if (!vals.empty()) throw InvalidArgument("bad numeric field in " + path.string());
    }
  }
  return Eigen::Map<const Vector>(vals.data(), static_cast<Index>(vals.size()));
}

}  // namespace

Vector load_mendel_standin() { return read_column(data_dir() / "mendel_standin.csv"); }

Vector make_pulse(const ExperimentSpec& spec) {
  switch (spec.pulse) {
    case PulseFamily::cosine_decay: return pulse_cosine_decay(spec.T);
    case PulseFamily::gaussian_derivative: return pulse_gaussian_derivative(2.0, 36.0, spec.T);
    case PulseFamily::custom: {
      Vector h = read_column(spec.pulse_file);
      if (h.size() != spec.T) throw InvalidArgument("spec: pulse_file length differs from T");
      return h;
    }
  }
  return {};
}

SubspaceBasis make_basis(const ExperimentSpec& spec) {
  if (spec.basis == BasisKind::identity) return identity_basis(spec.T);
  const double W = spec.dps_bandwidth > 0.0 ? spec.dps_bandwidth : default_dps_bandwidth(spec.T, spec.L);
  return dps_basis(spec.T, W, spec.L);
}

ExperimentData make_experiment_data(const ExperimentSpec& spec) {
  spec.validate();
  ExperimentData d;
  d.config = ModelConfig::make(spec.K, make_basis(spec).matrix, spec.sigma_gamma_sq);
  d.config.hyper = spec.hyper;
  Rng rng(spec.data_seed);
  if (spec.sequence == SequenceSource::mendel) {
    d.x = load_mendel_standin();
    if (d.x.size() != spec.K) throw InvalidArgument("spec: bundled sequence length differs from K");
  } else {
    d.x = generate_sparse_sequence(spec.K, spec.n_spikes, spec.amp_variance, rng);
  }
  d.h = make_pulse(spec);
  const SyntheticMeasurement m = synthesize_measurement(d.x, d.h, spec.snr_db, rng);
  d.measurement.y = m.y;
  d.sigma_v_sq = m.sigma_v_sq;
  return d;
}

ChainSamples run_chain(const ExperimentSpec& spec, const ExperimentData& data, std::uint64_t seed) {
  const ModelConfig& config = data.config;
  const Measurement& meas = data.measurement;
  const Index iters = spec.iterations;
  ChainSamples out;
  out.x.resize(iters, config.K);
  out.gamma.resize(iters, config.L);
  out.sigma_v_sq.resize(iters);
  out.iteration_seconds.reserve(static_cast<std::size_t>(iters));
  Rng rng(seed);
  Timer timer;
  const Vector& y = meas.y;
  const double var_y = (y.array() - y.mean()).square().mean();
  auto warm = [&](Index i, double& sigma_v_sq) {
    if (i >= spec.warmup_iterations) return;
    const double frac = static_cast<double>(i + 1) / static_cast<double>(spec.warmup_iterations);
    sigma_v_sq = std::max(sigma_v_sq, var_y * std::pow(spec.warmup_floor, frac));
  };

  auto record_moves = [&](const IterationReport& r) {
    if (!r.moves_ran) return;
    ++out.moves;
    out.scale_accepts += r.scale.accepted;
    out.shift_accepts += r.shift.accepted;
  };

  if (spec.sampler == SamplerKind::nigs1 || spec.sampler == SamplerKind::nigs2) {
    SliceSamplerConfig slice{spec.slice_width, spec.slice_max_steps, spec.slice_max_shrink};
    AmbiguityMoves moves;
    moves.enabled = spec.moves;
    moves.scale.sigma_alpha_sq = spec.sigma_alpha_sq;
    moves.scale.center = spec.scale_center;
    moves.scale.form = spec.acceptance;
    moves.shift_form = spec.acceptance;
    moves.shift_max_step = spec.shift_max_step;
    Nigs1Config c1{slice, moves, iters, {}};
    Nigs2Config c2{slice, moves, spec.window, iters, {}};
    ParameterState state = initialize_state(meas, config, rng);
    for (Index i = 0; i < iters; ++i) {
      timer.start();
      const IterationReport r = spec.sampler == SamplerKind::nigs1
                                    ? nigs1_iterate(state, meas, config, c1, rng)
                                    : nigs2_iterate(state, meas, config, c2, i + 1, rng);
      out.iteration_seconds.push_back(timer.stop());
      warm(i, state.sigma_v_sq);
      record_moves(r);
      out.x.row(i) = state.x.transpose();
      out.gamma.row(i) = state.gamma.transpose();
      out.sigma_v_sq[i] = state.sigma_v_sq;
    }
  } else {
    BgHyperparams hyper;
    hyper.pi0 = spec.pi0 >= 0.0 ? spec.pi0
                                : 1.0 - static_cast<double>(std::max<Index>(spec.n_spikes, 1)) /
                                            static_cast<double>(spec.K);
    hyper.sigma_x_sq = spec.bg_sigma_x_sq;
    BgState state = initialize_bg_state(meas, config, hyper, rng);
    for (Index i = 0; i < iters; ++i) {
      timer.start();
      try {
        if (spec.sampler == SamplerKind::bgs)
          bgs_iterate(state, meas, config, hyper, rng);
        else
          mtuple_iterate(state, meas, config, hyper, spec.tuple, rng);
      } catch (const StepFailure&) {
        throw;
      } catch (const std::exception& e) {
        throw StepFailure(to_string(spec.sampler) + "_iterate", e.what());
      }
      out.iteration_seconds.push_back(timer.stop());
      warm(i, state.sigma_v_sq);
      out.x.row(i) = state.x.transpose();
      out.gamma.row(i) = state.gamma.transpose();
      out.sigma_v_sq[i] = state.sigma_v_sq;
    }
  }
  return out;
}

std::vector<MpsrfRecord> chain_mpsrf(const std::vector<const ChainSamples*>& chains, const ModelConfig& config,
                                     Index cadence, double fraction, MpsrfAlign align, Index max_shift) {
  std::vector<MpsrfRecord> out;
  if (chains.size() < 2) return out;
  const Index n = chains.front()->x.rows();
  const Index half = n - n / 2;
  ChainSet xs, gs;
  // The posterior is invariant to (x, gamma) -> (-x, -gamma) and nearly so
  // to small mutual shifts; the reference pulse comes from the first chain.
  Vector ref_h;
  if (align == MpsrfAlign::sign) {
    ref_h = config.A * chains.front()->gamma.bottomRows(half).colwise().mean().transpose();
  } else if (align == MpsrfAlign::scale_shift) {
    const ChainSamples& c0 = *chains.front();
    ref_h = aligned_posterior_mean(c0.x, c0.gamma * config.A.transpose(), 0.5, max_shift).h;
  }
  for (const ChainSamples* c : chains) {
    if (align == MpsrfAlign::none) {
      xs.chains.push_back(c->x);
      gs.chains.push_back(c->gamma);
    } else if (align == MpsrfAlign::sign) {
      const Vector h = config.A * c->gamma.bottomRows(half).colwise().mean().transpose();
      const double sign = h.dot(ref_h) < 0.0 ? -1.0 : 1.0;
      xs.chains.push_back(sign * c->x);
      gs.chains.push_back(sign * c->gamma);
    } else {
      Matrix x(c->x.rows(), c->x.cols());
      Matrix g(c->gamma.rows(), c->gamma.cols());
      for (Index i = 0; i < c->x.rows(); ++i) {
        const Vector h = config.A * c->gamma.row(i).transpose();
        try {
          const ScaleShiftCorrection corr = correct_scale_shift(ref_h, h, c->x.row(i).transpose(), max_shift);
          x.row(i) = corr.x_corrected.transpose();
          g.row(i) = corr.a * c->gamma.row(i);
        } catch (const InvalidArgument&) {
          x.row(i) = c->x.row(i);
          g.row(i) = c->gamma.row(i);
        }
      }
      xs.chains.push_back(std::move(x));
      gs.chains.push_back(std::move(g));
    }
  }
  const auto tx = mpsrf_trace(xs, cadence, fraction);
  const auto tg = mpsrf_trace(gs, cadence, fraction);
  for (const auto& p : tx) out.push_back({p.iter, "x", p.rhat});
  for (const auto& p : tg) out.push_back({p.iter, "gamma", p.rhat});
  return out;
}

ExperimentResult run_experiment(const ExperimentSpec& spec, int jobs) {
  ExperimentResult result;
  result.data = make_experiment_data(spec);
  const ExperimentData& data = result.data;
  const auto q = static_cast<std::size_t>(spec.chains);

  std::vector<ChainSamples> samples(q);
  std::vector<ChainSummary> summaries(q);
  parallel_for(spec.chains, jobs, [&](Index c) {
    ChainSummary& s = summaries[static_cast<std::size_t>(c)];
    s.index = c;
    s.seed = spec.seed + static_cast<std::uint64_t>(c);
    try {
      samples[static_cast<std::size_t>(c)] = run_chain(spec, data, s.seed);
    } catch (const StepFailure& e) {
      s.ok = false;
      s.failed_step = e.step();
      s.error = e.what();
    } catch (const std::exception& e) {
      s.ok = false;
      s.failed_step = "initialize";
      s.error = e.what();
    }
  });

  RunRecord& rec = result.record;
  rec.spec = spec;
  rec.spec_hash = spec_hash(spec);
  std::vector<const ChainSamples*> done;
  Index moves = 0, scale_acc = 0, shift_acc = 0;
  bool have_nmse = false;
  for (std::size_t c = 0; c < q; ++c) {
    ChainSummary& s = summaries[c];
    ChainSamples& cs = samples[c];
    if (s.ok) {
      s.x_mean = posterior_mean(cs.x, spec.burn_in_fraction);
      s.gamma_mean = posterior_mean(cs.gamma, spec.burn_in_fraction);
      s.sigma_v_sq_mean = posterior_mean(Matrix(cs.sigma_v_sq), spec.burn_in_fraction)[0];
      try {
        Vector x_est = s.x_mean;
        Vector h_est = data.config.A * s.gamma_mean;
        if (spec.align_estimates) {
          const Matrix h_samples = cs.gamma * data.config.A.transpose();
          const AlignedEstimate a = aligned_posterior_mean(cs.x, h_samples, spec.burn_in_fraction, spec.shift_limit());
          x_est = a.x;
          h_est = a.h;
        }
        s.h_estimate = h_est;
        const ScaleShiftCorrection corr = correct_scale_shift(data.h, h_est, x_est, spec.shift_limit());
        s.correction_a = corr.a;
        s.correction_n = corr.n;
        s.nmse = {nmse(data.x, corr.x_corrected), nmse(data.h, corr.h_corrected)};
      } catch (const std::exception& e) {
        s.ok = false;
        s.failed_step = "correction";
        s.error = e.what();
      }
    }
    s.iteration_seconds = cs.iteration_seconds;
    if (!s.iteration_seconds.empty()) {
      double total = 0.0;
      for (double t : s.iteration_seconds) total += t;
      s.mean_iteration_seconds = total / static_cast<double>(s.iteration_seconds.size());
    }
    if (cs.moves > 0) {
      s.scale_accept_rate = static_cast<double>(cs.scale_accepts) / static_cast<double>(cs.moves);
      s.shift_accept_rate = static_cast<double>(cs.shift_accepts) / static_cast<double>(cs.moves);
      moves += cs.moves;
      scale_acc += cs.scale_accepts;
      shift_acc += cs.shift_accepts;
    }
    if (s.ok) {
      done.push_back(&cs);
      if (!have_nmse) {
        rec.nmse = s.nmse;
        have_nmse = true;
      }
    } else {
      rec.ok = false;
    }

    ChainTrace tr;
    if (cs.x.rows() > 0) {
      const Index stride = spec.trace_stride;
      const Index rows = (cs.x.rows() + stride - 1) / stride;
      tr.x.resize(rows, cs.x.cols());
      tr.gamma.resize(rows, cs.gamma.cols());
      for (Index r = 0; r < rows; ++r) {
        tr.iters.push_back(r * stride + 1);
        tr.x.row(r) = cs.x.row(r * stride);
        tr.gamma.row(r) = cs.gamma.row(r * stride);
        tr.sigma_v_sq.push_back(cs.sigma_v_sq[r * stride]);
      }
    }
    result.traces.push_back(std::move(tr));
  }
  if (moves > 0) {
    rec.scale_accept_rate = static_cast<double>(scale_acc) / static_cast<double>(moves);
    rec.shift_accept_rate = static_cast<double>(shift_acc) / static_cast<double>(moves);
  }
  rec.mpsrf = chain_mpsrf(done, data.config, spec.mpsrf_cadence, spec.mpsrf_fraction, spec.mpsrf_align,
                          spec.shift_limit());
  rec.chains = std::move(summaries);
  return result;
}

std::string record_to_json(const RunRecord& r) {
  Json j;
  j["spec_hash"] = r.spec_hash;
  j["spec"] = spec_json(r.spec);
  j["ok"] = r.ok;
  j["nmse"] = {{"x", num_json(r.nmse.x)}, {"h", num_json(r.nmse.h)}};
  j["scale_accept_rate"] = r.scale_accept_rate;
  j["shift_accept_rate"] = r.shift_accept_rate;
  Json chains = Json::array();
  for (const ChainSummary& c : r.chains) {
    Json cj;
    cj["index"] = c.index;
    cj["seed"] = c.seed;
    cj["ok"] = c.ok;
    cj["failed_step"] = c.failed_step;
    cj["error"] = c.error;
    cj["x_mean"] = vec_json(c.x_mean);
    cj["gamma_mean"] = vec_json(c.gamma_mean);
    cj["h_estimate"] = vec_json(c.h_estimate);
    cj["sigma_v_sq_mean"] = c.sigma_v_sq_mean;
    cj["scale_accept_rate"] = c.scale_accept_rate;
    cj["shift_accept_rate"] = c.shift_accept_rate;
    cj["correction_a"] = c.correction_a;
    cj["correction_n"] = c.correction_n;
    cj["nmse"] = {{"x", num_json(c.nmse.x)}, {"h", num_json(c.nmse.h)}};
    cj["mean_iteration_seconds"] = c.mean_iteration_seconds;
    cj["iteration_seconds"] = c.iteration_seconds;
    chains.push_back(std::move(cj));
  }
  j["chains"] = std::move(chains);
  Json m = Json::array();
  for (const MpsrfRecord& p : r.mpsrf) m.push_back({{"iter", p.iter}, {"target", p.target}, {"rhat", num_json(p.rhat)}});
  j["mpsrf"] = std::move(m);
  return j.dump(2);
}

RunRecord record_from_json(const std::string& text) {
  const Json j = parse_json(text);
  try {
    RunRecord r;
    r.spec_hash = j.at("spec_hash").get<std::string>();
    r.spec = spec_from(j.at("spec"));
    r.ok = j.at("ok").get<bool>();
    r.nmse = {json_num(j.at("nmse").at("x")), json_num(j.at("nmse").at("h"))};
    r.scale_accept_rate = j.at("scale_accept_rate").get<double>();
    r.shift_accept_rate = j.at("shift_accept_rate").get<double>();
    for (const Json& cj : j.at("chains")) {
      ChainSummary c;
      c.index = cj.at("index").get<Index>();
      c.seed = cj.at("seed").get<std::uint64_t>();
      c.ok = cj.at("ok").get<bool>();
      c.failed_step = cj.at("failed_step").get<std::string>();
      c.error = cj.at("error").get<std::string>();
      c.x_mean = json_vec(cj.at("x_mean"));
      c.gamma_mean = json_vec(cj.at("gamma_mean"));
      c.h_estimate = json_vec(cj.at("h_estimate"));
      c.sigma_v_sq_mean = cj.at("sigma_v_sq_mean").get<double>();
      c.scale_accept_rate = cj.at("scale_accept_rate").get<double>();
      c.shift_accept_rate = cj.at("shift_accept_rate").get<double>();
      c.correction_a = cj.at("correction_a").get<double>();
      c.correction_n = cj.at("correction_n").get<Index>();
      c.nmse = {json_num(cj.at("nmse").at("x")), json_num(cj.at("nmse").at("h"))};
      c.mean_iteration_seconds = cj.at("mean_iteration_seconds").get<double>();
      c.iteration_seconds = cj.at("iteration_seconds").get<std::vector<double>>();
      r.chains.push_back(std::move(c));
    }
    for (const Json& p : j.at("mpsrf"))
      r.mpsrf.push_back({p.at("iter").get<Index>(), p.at("target").get<std::string>(), json_num(p.at("rhat"))});
    return r;
  } catch (const Json::exception& e) {
    throw InvalidArgument(std::string("run record: ") + e.what());
  }
}

SweepGrid grid_from_json(const std::string& text) {
  const Json j = parse_json(text);
  try {
    SweepGrid g;
    if (j.contains("base")) g.base = spec_from(j.at("base"));
    for (const auto& [key, v] : j.items()) {
      if (key == "base") continue;
      else if (key == "snr_db") g.snr_db = v.get<std::vector<double>>();
      else if (key == "n_spikes") g.n_spikes = v.get<std::vector<Index>>();
      else if (key == "samplers")
        for (const auto& s : v) g.samplers.push_back(parse_sampler(s.get<std::string>()));
      else if (key == "instances") g.instances = v.get<Index>();
      else throw InvalidArgument("grid: unknown field " + key);
    }
    if (g.instances < 0) throw InvalidArgument("grid: instances must be >= 0");
    return g;
  } catch (const Json::exception& e) {
    throw InvalidArgument(std::string("grid: ") + e.what());
  }
}

std::vector<SweepRow> score_records(const std::vector<RunRecord>& records, const std::vector<double>& taus) {
  struct Cell {
    double snr;
    Index spikes;
    SamplerKind sampler;
    std::vector<NmsePair> nmse;
    Index failures = 0;
  };
  std::vector<Cell> cells;
  for (const RunRecord& r : records) {
    auto it = std::find_if(cells.begin(), cells.end(), [&](const Cell& c) {
      return c.snr == r.spec.snr_db && c.spikes == r.spec.n_spikes && c.sampler == r.spec.sampler;
    });
    if (it == cells.end()) {
      cells.push_back({r.spec.snr_db, r.spec.n_spikes, r.spec.sampler, {}, 0});
      it = std::prev(cells.end());
    }
    if (r.ok) {
      it->nmse.push_back(r.nmse);
    } else {
      // a failed run counts as unsuccessful
      const double inf = std::numeric_limits<double>::infinity();
      it->nmse.push_back({inf, inf});
      ++it->failures;
    }
  }
  std::vector<SweepRow> rows;
  for (const Cell& c : cells)
    for (double tau : taus) {
      const SuccessRate sr = success_rate(c.nmse, tau);
      rows.push_back({c.snr, c.spikes, c.sampler, tau, sr.rate_x, sr.rate_h, c.failures});
    }
  return rows;
}

std::vector<SweepRow> sweep_scenarios(const SweepGrid& grid, const std::vector<double>& taus, int jobs,
                                      std::vector<RunRecord>* records) {
  std::vector<ExperimentSpec> specs;
  const std::vector<SamplerKind> samplers =
      grid.samplers.empty() ? std::vector<SamplerKind>{grid.base.sampler} : grid.samplers;
  for (double snr : grid.snr_db)
    for (Index spikes : grid.n_spikes)
      for (SamplerKind sampler : samplers)
        for (Index k = 0; k < grid.instances; ++k) {
          ExperimentSpec s = grid.base;
          s.snr_db = snr;
          s.n_spikes = spikes;
          s.sampler = sampler;
          s.chains = 1;
          s.data_seed = grid.base.data_seed + static_cast<std::uint64_t>(k);
          s.seed = grid.base.seed + static_cast<std::uint64_t>(k);
          std::ostringstream id;
          id << grid.base.scenario << "/snr" << snr << "/k" << spikes << "/" << to_string(sampler) << "/" << k;
          s.scenario = id.str();
          s.validate();
          specs.push_back(std::move(s));
        }
  std::vector<RunRecord> out(specs.size());
  parallel_for(static_cast<Index>(specs.size()), jobs, [&](Index i) {
    const auto u = static_cast<std::size_t>(i);
    try {
      out[u] = run_experiment(specs[u], 1).record;
    } catch (const std::exception& e) {
      out[u].spec = specs[u];
      out[u].spec_hash = spec_hash(specs[u]);
      out[u].ok = false;
      ChainSummary c;
      c.ok = false;
      c.failed_step = "setup";
      c.error = e.what();
      out[u].chains.push_back(std::move(c));
    }
  });
  std::vector<SweepRow> rows = score_records(out, taus);
  if (records) *records = std::move(out);
  return rows;
}

void write_success_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "snr_db,n_spikes,sampler,tau,rate_x,rate_h\n";
  for (const SweepRow& r : rows)
    out << r.snr_db << ',' << r.n_spikes << ',' << to_string(r.sampler) << ',' << r.tau << ',' << r.rate_x << ','
        << r.rate_h << '\n';
}

void write_mpsrf_csv(std::ostream& out, const std::vector<MpsrfRecord>& trace) {
  out << "iter,target,rhat\n";
  out.precision(17);
  for (const MpsrfRecord& p : trace) out << p.iter << ',' << p.target << ',' << p.rhat << '\n';
}

void write_trace_csv(std::ostream& out, const std::vector<ChainTrace>& traces) {
  out << "iter,chain,coord,value\n";
  out.precision(17);
  for (std::size_t c = 0; c < traces.size(); ++c) {
    const ChainTrace& t = traces[c];
    for (std::size_t r = 0; r < t.iters.size(); ++r) {
      const Index row = static_cast<Index>(r);
      for (Index n = 0; n < t.x.cols(); ++n)
        out << t.iters[r] << ',' << c << ",x[" << n << "]," << t.x(row, n) << '\n';
      for (Index l = 0; l < t.gamma.cols(); ++l)
        out << t.iters[r] << ',' << c << ",gamma[" << l << "]," << t.gamma(row, l) << '\n';
      out << t.iters[r] << ',' << c << ",sigma_v_sq," << t.sigma_v_sq[r] << '\n';
    }
  }
}

TraceTable read_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("iter,chain,coord,value", 0) != 0)
    throw InvalidArgument("trace csv: missing header iter,chain,coord,value");
  std::map<Index, std::size_t> iter_index;
  std::map<std::string, std::size_t> coord_index;
  struct Entry {
    Index iter;
    std::size_t chain;
    std::size_t coord;
    double value;
  };
  std::vector<Entry> entries;
  TraceTable t;
  std::size_t n_chains = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string f_iter, f_chain, f_coord, f_value;
    if (!std::getline(ls, f_iter, ',') || !std::getline(ls, f_chain, ',') || !std::getline(ls, f_coord, ',') ||
        !std::getline(ls, f_value))
      throw InvalidArgument("trace csv: malformed line: " + line);
    Entry e{};
    try {
      e.iter = std::stoll(f_iter);
      e.chain = static_cast<std::size_t>(std::stoul(f_chain));
      e.value = std::stod(f_value);
    } catch (const std::exception&) {
      throw InvalidArgument("trace csv: malformed line: " + line);
    }
    iter_index.emplace(e.iter, 0);
    auto [it, inserted] = coord_index.emplace(f_coord, t.coords.size());
    if (inserted) t.coords.push_back(f_coord);
    e.coord = it->second;
    n_chains = std::max(n_chains, e.chain + 1);
    entries.push_back(e);
  }
  std::size_t k = 0;
  for (auto& [iter, idx] : iter_index) {
    idx = k++;
    t.iters.push_back(iter);
  }
  const auto nan = std::numeric_limits<double>::quiet_NaN();
  t.chains.assign(n_chains, Matrix::Constant(static_cast<Index>(t.iters.size()),
                                             static_cast<Index>(t.coords.size()), nan));
  for (const Entry& e : entries)
    t.chains[e.chain](static_cast<Index>(iter_index[e.iter]), static_cast<Index>(e.coord)) = e.value;
  for (const Matrix& m : t.chains)
    if (m.hasNaN()) throw InvalidArgument("trace csv: chains have missing entries");
  return t;
}

}  // namespace bdconv
