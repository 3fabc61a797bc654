#include "cmwd/experiment.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <omp.h>

#include "json.hpp"

namespace cmwd {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string join(const std::vector<std::string>& parts) {
  std::string out = "invalid config:";
  for (const auto& p : parts) out += "\n  " + p;
  return out;
}

// Collects every problem instead of stopping at the first.
class Reader {
 public:
  explicit Reader(std::vector<std::string>& problems) : problems_(problems) {}

  const json* object(const json& parent, const std::string& path, const std::string& key) {
    if (!parent.contains(key)) return nullptr;
    const json& v = parent.at(key);
    if (!v.is_object()) {
      fail(path + key, "must be an object");
      return nullptr;
    }
    return &v;
  }

  void allow(const json& obj, const std::string& path, std::initializer_list<const char*> keys) {
    std::set<std::string> ok(keys.begin(), keys.end());
    for (auto it = obj.begin(); it != obj.end(); ++it)
      if (!ok.count(it.key())) fail(path + it.key(), "unknown key");
  }

  template <class T>
  void number(const json& obj, const std::string& path, const std::string& key, T& out) {
    if (!obj.contains(key)) return;
    const json& v = obj.at(key);
    if (!v.is_number()) return fail(path + key, "must be a number");
    if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) return fail(path + key, "must be an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_unsigned() || v.get<long long>() >= 0) {
          out = v.get<T>();
          return;
        }
        return fail(path + key, "must be nonnegative");
      }
    }
    out = v.get<T>();
  }

  void boolean(const json& obj, const std::string& path, const std::string& key, bool& out) {
    if (!obj.contains(key)) return;
    if (!obj.at(key).is_boolean()) return fail(path + key, "must be true or false");
    out = obj.at(key).get<bool>();
  }

  void string(const json& obj, const std::string& path, const std::string& key, std::string& out) {
    if (!obj.contains(key)) return;
    if (!obj.at(key).is_string()) return fail(path + key, "must be a string");
    out = obj.at(key).get<std::string>();
  }

  template <class T>
  void numbers(const json& obj, const std::string& path, const std::string& key, std::vector<T>& out) {
    if (!obj.contains(key)) return;
    const json& v = obj.at(key);
    if (!v.is_array()) return fail(path + key, "must be an array of numbers");
    std::vector<T> tmp;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const bool ok = std::is_integral_v<T> ? v[i].is_number_integer() : v[i].is_number();
      if (!ok || (std::is_unsigned_v<T> && v[i].is_number_integer() && v[i].get<long long>() < 0))
        return fail(path + key + "[" + std::to_string(i) + "]", "has the wrong type");
      tmp.push_back(v[i].get<T>());
    }
    out = std::move(tmp);
  }

  void check(bool cond, const std::string& where, const std::string& what) {
    if (!cond) fail(where, what);
  }

  void fail(const std::string& where, const std::string& what) { problems_.push_back(where + ": " + what); }

 private:
  std::vector<std::string>& problems_;
};

RadarScene default_scene() {
  RadarScene s;
  s.max_lag = 8;
  s.noise_var = 0.01;
  const double strong = amplitude_from_rcs_dbsm(6.0);
  s.objects = {{40.0, 7, 1.0}, {-30.0, 8, strong}, {40.0, 5, strong}};
  return s;
}

std::vector<double> default_rcs_grid() {
  std::vector<double> v;
  for (int r = -20; r <= 10; ++r) v.push_back(r);
  return v;
}

void parse_scene(Reader& rd, const json& j, RadarScene& scene) {
  const std::string path = "scene.";
  rd.allow(j, path, {"noise_var", "objects"});
  rd.number(j, path, "noise_var", scene.noise_var);
  rd.check(scene.noise_var >= 0.0, path + "noise_var", "must be >= 0");
  if (!j.contains("objects")) return;
  const json& objs = j.at("objects");
  if (!objs.is_array() || objs.empty()) return rd.fail(path + "objects", "must be a non-empty array");
  scene.objects.clear();
  for (std::size_t i = 0; i < objs.size(); ++i) {
    const std::string p = path + "objects[" + std::to_string(i) + "].";
    if (!objs[i].is_object()) {
      rd.fail(p, "must be an object");
      continue;
    }
    rd.allow(objs[i], p, {"angle_deg", "range_bin", "rcs_dbsm", "phase_deg"});
    SceneObject o;
    double rcs = 0.0, phase = 0.0;
    rd.check(objs[i].contains("angle_deg") && objs[i].contains("range_bin"), p, "needs angle_deg and range_bin");
    rd.number(objs[i], p, "angle_deg", o.angle_deg);
    rd.number(objs[i], p, "range_bin", o.range_bin);
    rd.number(objs[i], p, "rcs_dbsm", rcs);
    rd.number(objs[i], p, "phase_deg", phase);
    rd.check(o.angle_deg >= -90.0 && o.angle_deg <= 90.0, p + "angle_deg", "must lie in [-90, 90]");
    o.amplitude = std::polar(amplitude_from_rcs_dbsm(rcs), phase * kPi / 180.0);
    scene.objects.push_back(o);
  }
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error(join(problems)), problems_(std::move(problems)) {}

SolverKind solver_from_string(const std::string& name) {
  if (name == "mm") return SolverKind::mm;
  if (name == "ladmm") return SolverKind::ladmm;
  if (name == "radar_only") return SolverKind::radar_only;
  throw ConfigError({"solver: expected mm, ladmm or radar_only, got '" + name + "'"});
}

std::string to_string(SolverKind kind) {
  switch (kind) {
    case SolverKind::mm: return "mm";
    case SolverKind::ladmm: return "ladmm";
    case SolverKind::radar_only: return "radar_only";
  }
  return "?";
}

ExperimentConfig parse_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError({std::string("not valid JSON: ") + e.what()});
  }
  if (!j.is_object()) throw ConfigError({"top level must be an object"});

  std::vector<std::string> problems;
  Reader rd(problems);
  ExperimentConfig c;
  c.mm.max_iter = 10000;
  c.scene = default_scene();
  c.evaluation.pd_rcs_dbsm = default_rcs_grid();

  rd.allow(j, "", {"schema_version", "array", "block_len", "total_power", "beam", "max_lag", "comms",
                   "weights", "solver", "mm", "ladmm", "radar_only", "scene", "evaluation", "scaling",
                   "output_dir", "seeds", "threads"});
  int version = -1;
  if (!j.contains("schema_version")) rd.fail("schema_version", "missing");
  rd.number(j, "", "schema_version", version);
  if (j.contains("schema_version")) rd.check(version == kConfigSchemaVersion, "schema_version",
                                             "unsupported (expected " + std::to_string(kConfigSchemaVersion) + ")");

  if (const json* a = rd.object(j, "", "array")) {
    rd.allow(*a, "array.", {"n_tx", "n_rx", "spacing_wavelengths"});
    rd.number(*a, "array.", "n_tx", c.array.n_tx);
    rd.number(*a, "array.", "n_rx", c.array.n_rx);
    rd.number(*a, "array.", "spacing_wavelengths", c.array.spacing_wavelengths);
  }
  rd.check(c.array.n_tx >= 1, "array.n_tx", "must be >= 1");
  rd.check(c.array.n_rx >= 1, "array.n_rx", "must be >= 1");
  rd.check(c.array.spacing_wavelengths > 0, "array.spacing_wavelengths", "must be > 0");

  rd.number(j, "", "block_len", c.block_len);
  rd.check(c.block_len >= 1, "block_len", "must be >= 1");
  rd.number(j, "", "total_power", c.total_power);
  rd.check(c.total_power > 0, "total_power", "must be > 0");
  rd.number(j, "", "max_lag", c.max_lag);
  rd.check(c.max_lag >= 1 && c.max_lag <= c.block_len, "max_lag", "must lie in [1, block_len]");

  if (const json* b = rd.object(j, "", "beam")) {
    rd.allow(*b, "beam.", {"targets_deg", "beam_width_deg", "grid_step_deg"});
    rd.numbers(*b, "beam.", "targets_deg", c.target_angles_deg);
    rd.number(*b, "beam.", "beam_width_deg", c.beam_width_deg);
    rd.number(*b, "beam.", "grid_step_deg", c.grid_step_deg);
  }
  rd.check(!c.target_angles_deg.empty(), "beam.targets_deg", "must not be empty");
  for (double t : c.target_angles_deg) rd.check(t >= -90 && t <= 90, "beam.targets_deg", "angles must lie in [-90, 90]");
  rd.check(c.beam_width_deg >= 0, "beam.beam_width_deg", "must be >= 0");
  rd.check(c.grid_step_deg > 0, "beam.grid_step_deg", "must be > 0");

  if (const json* m = rd.object(j, "", "comms")) {
    rd.allow(*m, "comms.", {"n_users", "snr_db", "noise_var", "psk_order", "seed"});
    rd.number(*m, "comms.", "n_users", c.n_users);
    rd.number(*m, "comms.", "snr_db", c.snr_db);
    rd.number(*m, "comms.", "noise_var", c.comms_noise_var);
    rd.number(*m, "comms.", "psk_order", c.psk_order);
    if (m->contains("seed")) {
      std::uint64_t s = 0;
      rd.number(*m, "comms.", "seed", s);
      c.comms_seed = s;
    }
  }
  rd.check(c.n_users >= 0, "comms.n_users", "must be >= 0");
  rd.check(c.comms_noise_var > 0, "comms.noise_var", "must be > 0");
  rd.check(c.psk_order >= 2, "comms.psk_order", "must be >= 2");

  if (const json* w = rd.object(j, "", "weights")) {
    rd.allow(*w, "weights.", {"bp", "ac", "cc", "sim"});
    rd.number(*w, "weights.", "bp", c.weights.bp);
    rd.number(*w, "weights.", "ac", c.weights.ac);
    rd.number(*w, "weights.", "cc", c.weights.cc);
    rd.number(*w, "weights.", "sim", c.weights.sim);
  }
  rd.check(c.weights.bp >= 0 && c.weights.ac >= 0 && c.weights.cc >= 0 && c.weights.sim >= 0, "weights",
           "must be >= 0");

  std::string solver = "mm";
  rd.string(j, "", "solver", solver);
  try {
    c.solver = solver_from_string(solver);
  } catch (const ConfigError& e) {
    problems.insert(problems.end(), e.problems().begin(), e.problems().end());
  }

  if (const json* m = rd.object(j, "", "mm")) {
    rd.allow(*m, "mm.", {"max_iter", "eps4", "eps2", "eps3", "cs_tol", "max_sweeps", "majorizer"});
    rd.number(*m, "mm.", "max_iter", c.mm.max_iter);
    rd.number(*m, "mm.", "eps4", c.mm.eps4);
    rd.number(*m, "mm.", "eps2", c.mm.dual.eps2);
    rd.number(*m, "mm.", "eps3", c.mm.dual.eps3);
    rd.number(*m, "mm.", "cs_tol", c.mm.dual.cs_tol);
    rd.number(*m, "mm.", "max_sweeps", c.mm.dual.max_sweeps);
    std::string kind = "proposed";
    rd.string(*m, "mm.", "majorizer", kind);
    if (kind == "lambda_max") c.mm.majorizer = MajorizerKind::lambda_max;
    else rd.check(kind == "proposed", "mm.majorizer", "expected proposed or lambda_max");
  }
  rd.check(c.mm.max_iter >= 1, "mm.max_iter", "must be >= 1");
  rd.check(c.mm.eps4 > 0 && c.mm.dual.eps2 > 0 && c.mm.dual.eps3 > 0 && c.mm.dual.cs_tol > 0, "mm",
           "tolerances must be > 0");

  if (const json* m = rd.object(j, "", "ladmm")) {
    rd.allow(*m, "ladmm.", {"mu1", "mu2", "mu3", "eps1", "residual_tol", "max_iter", "objective_target"});
    rd.number(*m, "ladmm.", "mu1", c.ladmm.mu1);
    rd.number(*m, "ladmm.", "mu2", c.ladmm.mu2);
    rd.number(*m, "ladmm.", "mu3", c.ladmm.mu3);
    rd.number(*m, "ladmm.", "eps1", c.ladmm.eps1);
    rd.number(*m, "ladmm.", "residual_tol", c.ladmm.residual_tol);
    rd.number(*m, "ladmm.", "max_iter", c.ladmm.max_iter);
    rd.number(*m, "ladmm.", "objective_target", c.ladmm.objective_target);
  }
  rd.check(c.ladmm.mu1 > 0 && c.ladmm.mu2 > 0 && c.ladmm.mu3 > 0, "ladmm", "penalties must be > 0");
  rd.check(c.ladmm.eps1 > 0 && c.ladmm.residual_tol > 0, "ladmm", "tolerances must be > 0");
  rd.check(c.ladmm.max_iter >= 1, "ladmm.max_iter", "must be >= 1");

  if (const json* r = rd.object(j, "", "radar_only")) {
    rd.allow(*r, "radar_only.", {"warm_start"});
    std::string ws = "dfrc";
    rd.string(*r, "radar_only.", "warm_start", ws);
    rd.check(ws == "dfrc" || ws == "initializer", "radar_only.warm_start", "expected dfrc or initializer");
    c.radar_only_warm_start = ws == "dfrc";
  }

  if (const json* s = rd.object(j, "", "scene")) parse_scene(rd, *s, c.scene);
  c.scene.max_lag = c.max_lag;
  for (std::size_t i = 0; i < c.scene.objects.size(); ++i) {
    const int bin = c.scene.objects[i].range_bin;
    rd.check(bin >= 0 && bin < c.block_len, "scene.objects[" + std::to_string(i) + "].range_bin",
             "must lie in [0, block_len)");
  }

  if (const json* e = rd.object(j, "", "evaluation")) {
    auto& ev = c.evaluation;
    rd.allow(*e, "evaluation.", {"enabled", "capon_snapshots", "capon_angle_step_deg", "pd_trials", "pd_rcs_dbsm",
                                 "cfar_train", "cfar_guard", "p_fa"});
    rd.boolean(*e, "evaluation.", "enabled", ev.enabled);
    rd.number(*e, "evaluation.", "capon_snapshots", ev.capon_snapshots);
    rd.number(*e, "evaluation.", "capon_angle_step_deg", ev.capon_angle_step_deg);
    rd.number(*e, "evaluation.", "pd_trials", ev.pd_trials);
    rd.numbers(*e, "evaluation.", "pd_rcs_dbsm", ev.pd_rcs_dbsm);
    rd.number(*e, "evaluation.", "cfar_train", ev.cfar.n_train);
    rd.number(*e, "evaluation.", "cfar_guard", ev.cfar.n_guard);
    rd.number(*e, "evaluation.", "p_fa", ev.cfar.p_fa);
  }
  {
    const auto& ev = c.evaluation;
    rd.check(ev.capon_snapshots >= 1, "evaluation.capon_snapshots", "must be >= 1");
    rd.check(ev.capon_angle_step_deg > 0, "evaluation.capon_angle_step_deg", "must be > 0");
    rd.check(ev.pd_trials >= 100, "evaluation.pd_trials", "must be >= 100");
    rd.check(ev.cfar.n_train >= 1, "evaluation.cfar_train", "must be >= 1");
    rd.check(ev.cfar.n_guard >= 0, "evaluation.cfar_guard", "must be >= 0");
    rd.check(ev.cfar.p_fa > 0 && ev.cfar.p_fa < 1, "evaluation.p_fa", "must lie in (0, 1)");
    rd.check(!ev.enabled || c.block_len > 2 * (ev.cfar.n_train + ev.cfar.n_guard) + 1, "evaluation",
             "block_len too short for the CFAR window");
  }

  if (const json* s = rd.object(j, "", "scaling")) {
    rd.allow(*s, "scaling.", {"block_lens", "solvers", "timeout_sec", "seed"});
    rd.numbers(*s, "scaling.", "block_lens", c.scaling.block_lens);
    rd.number(*s, "scaling.", "timeout_sec", c.scaling.timeout_sec);
    rd.number(*s, "scaling.", "seed", c.scaling.seed);
    if (s->contains("solvers")) {
      const json& v = s->at("solvers");
      c.scaling.solvers.clear();
      if (!v.is_array()) rd.fail("scaling.solvers", "must be an array of solver names");
      else
        for (const auto& n : v) {
          if (!n.is_string()) {
            rd.fail("scaling.solvers", "must be an array of solver names");
            continue;
          }
          try {
            c.scaling.solvers.push_back(solver_from_string(n.get<std::string>()));
          } catch (const ConfigError& e) {
            problems.push_back("scaling." + e.problems().front());
          }
        }
    }
  }
  for (std::size_t i = 0; i < c.scaling.block_lens.size(); ++i) {
    rd.check(c.scaling.block_lens[i] >= 1, "scaling.block_lens", "entries must be >= 1");
    if (i) rd.check(c.scaling.block_lens[i] > c.scaling.block_lens[i - 1], "scaling.block_lens",
                    "must be strictly increasing");
  }
  rd.check(c.scaling.timeout_sec > 0, "scaling.timeout_sec", "must be > 0");

  std::string out;
  rd.string(j, "", "output_dir", out);
  if (!out.empty()) c.output_dir = out;
  rd.numbers(j, "", "seeds", c.seeds);
  rd.check(!c.seeds.empty(), "seeds", "must not be empty");
  rd.number(j, "", "threads", c.threads);
  rd.check(c.threads >= 0, "threads", "must be >= 0");

  if (!problems.empty()) throw ConfigError(problems);
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({path.string() + ": cannot open"});
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config_text(ss.str());
  } catch (const ConfigError& e) {
    std::vector<std::string> p;
    for (const auto& s : e.problems()) p.push_back(path.filename().string() + ": " + s);
    throw ConfigError(p);
  }
}

DesignProblem build_problem(const ExperimentConfig& cfg, std::uint64_t seed, bool with_comms) {
  DesignProblem p;
  const auto grid = uniform_angle_grid(-90.0, 90.0, cfg.grid_step_deg);
  p.beam = desired_rect_beam_pattern(cfg.target_angles_deg, cfg.beam_width_deg, grid);
  p.model = CostModel::build(cfg.array, p.beam, cfg.target_angles_deg, cfg.max_lag, cfg.weights,
                             cfg.weights.sim > 0 ? lfm_reference(cfg.block_len) : CVector());
  const std::uint64_t comm_seed = cfg.comms_seed.value_or(seed);
  auto& c = p.comms;
  c.n_users = with_comms ? cfg.n_users : 0;
  c.noise_var = cfg.comms_noise_var;
  c.psk_order = cfg.psk_order;
  c.ci_half_angle = kPi / cfg.psk_order;
  if (c.n_users > 0) {
    c.channels = generate_rayleigh_channels(comm_seed, c.n_users, cfg.array.n_tx);
    c.symbols = draw_psk_symbols(comm_seed + 1000, cfg.block_len, c.n_users, cfg.psk_order);
    c.snr_thresholds.assign(c.n_users, std::pow(10.0, cfg.snr_db / 10.0));
  } else {
    c.symbols = CMatrix(cfg.block_len, 0);
  }
  p.constraints = build_ci_set(c, cfg.total_power, cfg.array.n_tx);
  return p;
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

DesignOutcome from_mm(MmResult&& r, const WaveformBlock& init, const CostModel& model, double wall) {
  DesignOutcome o;
  o.initial = init;
  o.waveform = std::move(r.waveform);
  o.status = r.state.status;
  o.iterations = r.state.iterations;
  o.converged = r.state.converged;
  o.wall_sec = wall;
  o.cost = total_objective(o.waveform.X, model);
  o.margins = r.margins;
  o.mm_trace = std::move(r.state.trace);
  return o;
}

}  // namespace

DesignOutcome design_waveform(const ExperimentConfig& cfg, std::uint64_t seed) {
  MmOptions mm = cfg.mm;
  mm.threads = cfg.threads;
  const DesignProblem dfrc = build_problem(cfg, seed, true);
  const InitResult init = initialize_waveform(dfrc.constraints, cfg.array.n_tx, cfg.block_len, seed);
  WaveformBlock start = init.waveform;
  start.total_power = cfg.total_power;

  const auto t0 = std::chrono::steady_clock::now();
  switch (cfg.solver) {
    case SolverKind::mm: {
      MmResult r = run_mm(start, dfrc.model, dfrc.constraints, mm);
      return from_mm(std::move(r), start, dfrc.model, seconds_since(t0));
    }
    case SolverKind::ladmm: {
      LadmmResult r = run_ladmm(start, dfrc.model, dfrc.constraints, cfg.ladmm);
      DesignOutcome o;
      o.initial = start;
      o.waveform = r.waveform;
      o.status = r.status;
      o.iterations = r.iterations;
      o.converged = r.converged;
      o.wall_sec = seconds_since(t0);
      o.cost = total_objective(o.waveform.X, dfrc.model);
      o.margins = r.margins;
      o.ladmm_trace = std::move(r.trace);
      return o;
    }
    case SolverKind::radar_only: {
      const DesignProblem radar = build_problem(cfg, seed, false);
      WaveformBlock from = start;
      if (cfg.radar_only_warm_start && !dfrc.constraints.empty())
        from = run_mm(start, dfrc.model, dfrc.constraints, mm).waveform;
      MmResult r = run_mm(from, radar.model, radar.constraints, mm);
      DesignOutcome o = from_mm(std::move(r), start, radar.model, seconds_since(t0));
      o.margins = MarginReport{};
      return o;
    }
  }
  throw std::logic_error("unknown solver");
}

void write_waveform_bin(const fs::path& path, const WaveformBlock& w) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (Eigen::Index c = 0; c < w.X.cols(); ++c)
    for (Eigen::Index r = 0; r < w.X.rows(); ++r) {
      const float v[2] = {static_cast<float>(w.X(r, c).real()), static_cast<float>(w.X(r, c).imag())};
      out.write(reinterpret_cast<const char*>(v), sizeof v);
    }
}

WaveformBlock read_waveform_bin(const fs::path& path, int n_tx, int block_len, double total_power) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  WaveformBlock w;
  w.total_power = total_power;
  w.X.resize(n_tx, block_len);
  for (int c = 0; c < block_len; ++c)
    for (int r = 0; r < n_tx; ++r) {
      float v[2];
      if (!in.read(reinterpret_cast<char*>(v), sizeof v))
        throw std::runtime_error(path.string() + ": too short for " + std::to_string(n_tx) + "x" +
                                 std::to_string(block_len));
      w.X(r, c) = cdouble(v[0], v[1]);
    }
  if (in.peek() != std::char_traits<char>::eof())
    throw std::runtime_error(path.string() + ": longer than " + std::to_string(n_tx) + "x" +
                             std::to_string(block_len));
  return w;
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return hex.str();
}

namespace {

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double db_or_floor(double ratio) { return ratio > 0 ? db10(ratio) : -400.0; }

}  // namespace

std::vector<std::string> write_evaluation(const ExperimentConfig& cfg, const WaveformBlock& waveform,
                                          std::uint64_t seed, const fs::path& dir) {
  std::vector<std::string> files;
  const CMatrix Xt = waveform.transmit_matrix();
  const auto grid = uniform_angle_grid(-90.0, 90.0, cfg.grid_step_deg);
  const auto spec = desired_rect_beam_pattern(cfg.target_angles_deg, cfg.beam_width_deg, grid);
  {
    const RVector g = beam_gains(Xt, steering_matrix(cfg.array.n_tx, cfg.array.spacing_wavelengths, grid));
    const double peak = g.maxCoeff();
    auto out = open_out(dir / "beam_pattern.csv");
    out << "angle_deg,gain,gain_db,desired\n";
    for (std::size_t u = 0; u < grid.size(); ++u)
      out << fmt("%.2f", grid[u]) << ',' << fmt("%.9e", g(u)) << ',' << fmt("%.6f", db_or_floor(g(u) / peak)) << ','
          << fmt("%g", spec.desired_gain[u]) << '\n';
    files.push_back("beam_pattern.csv");
  }
  {
    const CMatrix A = steering_matrix(cfg.array.n_tx, cfg.array.spacing_wavelengths, cfg.target_angles_deg);
    const int Q = static_cast<int>(A.cols());
    std::vector<double> peak(Q);
    for (int q = 0; q < Q; ++q) peak[q] = beam_gain(Xt, A.col(q)) * beam_gain(Xt, A.col(q));
    auto ac = open_out(dir / "autocorrelation.csv");
    ac << "angle_deg,lag,chi,chi_db\n";
    for (int q = 0; q < Q; ++q) {
      const auto p = correlation_profile(Xt, A.col(q), A.col(q));
      for (std::size_t i = 0; i < p.lags.size(); ++i)
        ac << fmt("%.2f", cfg.target_angles_deg[q]) << ',' << p.lags[i] << ',' << fmt("%.9e", p.values[i]) << ','
           << fmt("%.6f", db_or_floor(p.values[i] / peak[q])) << '\n';
    }
    auto cc = open_out(dir / "crosscorrelation.csv");
    cc << "angle1_deg,angle2_deg,lag,chi,chi_db\n";
    for (int q = 0; q < Q; ++q)
      for (int p2 = q + 1; p2 < Q; ++p2) {
        const auto p = correlation_profile(Xt, A.col(q), A.col(p2));
        const double ref = std::sqrt(peak[q] * peak[p2]);
        for (std::size_t i = 0; i < p.lags.size(); ++i)
          cc << fmt("%.2f", cfg.target_angles_deg[q]) << ',' << fmt("%.2f", cfg.target_angles_deg[p2]) << ','
             << p.lags[i] << ',' << fmt("%.9e", p.values[i]) << ',' << fmt("%.6f", db_or_floor(p.values[i] / ref))
             << '\n';
      }
    files.push_back("autocorrelation.csv");
    files.push_back("crosscorrelation.csv");
  }
  if (!cfg.evaluation.enabled) return files;
  const auto& ev = cfg.evaluation;
  const std::uint64_t eval_seed = seed + 2000;
  {
    const auto angles = uniform_angle_grid(-90.0, 90.0, ev.capon_angle_step_deg);
    const CaponImage img = capon_image_seeded(waveform, cfg.scene, cfg.array, angles, ev.capon_snapshots, eval_seed);
    auto out = open_out(dir / "capon.csv");
    img.write_csv(out);
    files.push_back("capon.csv");
  }
  {
    PdOptions po;
    po.n_trials = ev.pd_trials;
    po.num_threads = cfg.threads;
    const auto curve = detection_probability(waveform, cfg.scene, cfg.array, ev.pd_rcs_dbsm, ev.cfar, eval_seed, po);
    auto out = open_out(dir / "pd_curve.csv");
    write_pd_csv(out, curve);
    files.push_back("pd_curve.csv");
  }
  {
    auto out = open_out(dir / "sinr.csv");
    out << "target_angle_deg,target_range_bin,sinr_db\n";
    const auto& t = cfg.scene.objects.front();
    out << fmt("%.2f", t.angle_deg) << ',' << t.range_bin << ','
        << fmt("%.6f", target_sinr_db(waveform, cfg.scene, cfg.array)) << '\n';
    files.push_back("sinr.csv");
  }
  return files;
}

namespace {

void write_manifest(const fs::path& dir, const std::vector<std::string>& files,
                    const std::vector<std::string>& timing_files, const json& extra) {
  json m = extra;
  m["schema_version"] = kConfigSchemaVersion;
  json list = json::array();
  auto add = [&](const std::string& f, bool timing) {
    list.push_back({{"file", f}, {"sha256", sha256_file(dir / f)}, {"bytes", fs::file_size(dir / f)},
                    {"timing", timing}});
  };
  for (const auto& f : files) add(f, false);
  for (const auto& f : timing_files) add(f, true);
  m["artifacts"] = list;
  auto out = open_out(dir / "manifest.json");
  out << m.dump(2) << '\n';
}

void apply_threads(int threads) {
  if (threads > 0) omp_set_num_threads(threads);
}

}  // namespace

int run_experiment(const ExperimentConfig& cfg) {
  apply_threads(cfg.threads);
  int code = 0;
  for (const std::uint64_t seed : cfg.seeds) {
    const fs::path dir = cfg.output_dir / ("seed_" + std::to_string(seed));
    fs::create_directories(dir);
    const DesignOutcome o = design_waveform(cfg, seed);
    std::vector<std::string> files, timing;

    write_waveform_bin(dir / "waveform.bin", o.waveform);
    files.push_back("waveform.bin");
    {
      json meta = {{"dtype", "complex64"},
                   {"layout", "column-major N_T x L, interleaved re/im"},
                   {"n_tx", cfg.array.n_tx},
                   {"block_len", cfg.block_len},
                   {"total_power", cfg.total_power},
                   {"solver", to_string(cfg.solver)},
                   {"seed", seed},
                   {"status", o.status},
                   {"converged", o.converged},
                   {"iterations", o.iterations},
                   {"objective", {{"bp", o.cost.bp}, {"ac", o.cost.ac}, {"cc", o.cost.cc}, {"total", o.cost.total}}},
                   {"modulus_error", o.waveform.modulus_error()}};
      if (cfg.solver != SolverKind::radar_only) meta["min_margin"] = o.margins.min_margin;
      auto out = open_out(dir / "waveform.json");
      out << meta.dump(2) << '\n';
      files.push_back("waveform.json");
    }
    {
      auto out = open_out(dir / "trace.csv");
      if (cfg.solver == SolverKind::ladmm) write_ladmm_trace_csv(out, o.ladmm_trace);
      else {
        MmState st;
        st.trace = o.mm_trace;
        write_mm_trace_csv(out, st);
      }
      timing.push_back("trace.csv");
    }
    {
      auto out = open_out(dir / "timing.csv");
      out << "solver,wall_sec,iterations\n" << to_string(cfg.solver) << ',' << fmt("%.6f", o.wall_sec) << ','
          << o.iterations << '\n';
      timing.push_back("timing.csv");
    }
    if (cfg.solver != SolverKind::radar_only) {
      auto out = open_out(dir / "margins.csv");
      out << "subpulse,constraint,margin\n";
      for (Eigen::Index l = 0; l < o.margins.margins.cols(); ++l)
        for (Eigen::Index m = 0; m < o.margins.margins.rows(); ++m)
          out << l << ',' << m << ',' << fmt("%.9e", o.margins.margins(m, l)) << '\n';
      files.push_back("margins.csv");
    }
    // evaluate the stored complex64 waveform so `evaluate` on waveform.bin reproduces these files
    const WaveformBlock stored = read_waveform_bin(dir / "waveform.bin", cfg.array.n_tx, o.waveform.block_len(),
                                                   cfg.total_power);
    const auto eval = write_evaluation(cfg, stored, seed, dir);
    files.insert(files.end(), eval.begin(), eval.end());
    write_manifest(dir, files, timing, {{"seed", seed}, {"solver", to_string(cfg.solver)}, {"status", o.status}});
    if (!o.converged) code = 2;
  }
  return code;
}

int run_evaluation(const fs::path& waveform_bin, const ExperimentConfig& cfg, const fs::path& out_dir) {
  apply_threads(cfg.threads);
  int n_tx = cfg.array.n_tx, block_len = cfg.block_len;
  double power = cfg.total_power;
  std::uint64_t seed = cfg.seeds.front();
  const fs::path meta_path = waveform_bin.parent_path() / "waveform.json";
  if (fs::exists(meta_path)) {
    std::ifstream in(meta_path);
    const json meta = json::parse(in);
    n_tx = meta.at("n_tx").get<int>();
    block_len = meta.at("block_len").get<int>();
    power = meta.value("total_power", power);
    seed = meta.value("seed", seed);
  }
  if (n_tx != cfg.array.n_tx) throw ConfigError({"array.n_tx: does not match the stored waveform"});
  ExperimentConfig c = cfg;
  c.block_len = block_len;
  for (const auto& o : c.scene.objects)
    if (o.range_bin >= block_len) throw ConfigError({"scene: range bin beyond the stored block length"});
  const WaveformBlock w = read_waveform_bin(waveform_bin, n_tx, block_len, power);
  fs::create_directories(out_dir);
  const auto files = write_evaluation(c, w, seed, out_dir);
  write_manifest(out_dir, files, {}, {{"seed", seed}, {"waveform", waveform_bin.string()}});
  return 0;
}

std::vector<ScalingRow> run_scaling_study(const ExperimentConfig& cfg) {
  apply_threads(cfg.threads);
  std::vector<ScalingRow> rows;
  for (const int L : cfg.scaling.block_lens) {
    ExperimentConfig c = cfg;
    c.block_len = L;
    c.max_lag = std::min(cfg.max_lag, L);
    const std::uint64_t seed = cfg.scaling.seed;
    for (const SolverKind kind : cfg.scaling.solvers) {
      const DesignProblem prob = build_problem(c, seed, kind != SolverKind::radar_only);
      const InitResult init = initialize_waveform(prob.constraints, c.array.n_tx, L, seed);
      ScalingRow row;
      row.ln_t = L * c.array.n_tx;
      row.solver = kind;
      const auto t0 = std::chrono::steady_clock::now();
      if (kind == SolverKind::ladmm) {
        LadmmParams p = c.ladmm;
        p.time_limit_sec = c.scaling.timeout_sec;
        const auto r = run_ladmm(init.waveform, prob.model, prob.constraints, p);
        row.iterations = r.iterations;
        row.status = r.status;
      } else {
        MmOptions o = c.mm;
        o.threads = c.threads;
        o.time_limit_sec = c.scaling.timeout_sec;
        const auto r = run_mm(init.waveform, prob.model, prob.constraints, o);
        row.iterations = r.state.iterations;
        row.status = r.state.status;
      }
      row.wall_sec = seconds_since(t0);
      row.censored = row.status == "timeout";
      rows.push_back(row);
    }
  }
  return rows;
}

void write_scaling_csv(std::ostream& out, const std::vector<ScalingRow>& rows) {
  out << "ln_t,solver,wall_sec,iters,censored,status\n";
  for (const auto& r : rows)
    out << r.ln_t << ',' << to_string(r.solver) << ',' << fmt("%.6f", r.wall_sec) << ',' << r.iterations << ','
        << (r.censored ? 1 : 0) << ',' << r.status << '\n';
}

}  // namespace cmwd
