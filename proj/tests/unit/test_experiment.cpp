#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cmwd/experiment.hpp"

using namespace cmwd;
namespace fs = std::filesystem;

namespace {

std::string read(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kSmall = R"({
  "schema_version": 1,
  "block_len": 16,
  "max_lag": 4,
  "beam": {"targets_deg": [-30, 40], "beam_width_deg": 20, "grid_step_deg": 1.0},
  "comms": {"n_users": 2, "snr_db": 6},
  "mm": {"max_iter": 300},
  "evaluation": {"capon_snapshots": 8, "capon_angle_step_deg": 5, "pd_trials": 100, "pd_rcs_dbsm": [-10, 0, 10]},
  "seeds": [3]
})";

}  // namespace

TEST_CASE("config defaults and validation") {
  const auto c = parse_config_text(R"({"schema_version": 1})");
  CHECK(c.block_len == 32);
  CHECK(c.max_lag == 8);
  CHECK(c.array.n_tx == 8);
  CHECK(c.grid_step_deg == 0.5);
  CHECK(c.comms_noise_var == 0.01);
  CHECK(c.scene.objects.size() == 3);
  CHECK(c.solver == SolverKind::mm);

  try {
    parse_config_text(R"({"schema_version": 2, "block_len": -1, "bogus": 1, "solver": "sdr",
                          "weights": {"bp": -1}, "scene": {"objects": [{"angle_deg": 10, "range_bin": 99}]}})");
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    const std::string all = e.what();
    CHECK(all.find("schema_version") != std::string::npos);
    CHECK(all.find("block_len") != std::string::npos);
    CHECK(all.find("bogus: unknown key") != std::string::npos);
    CHECK(all.find("solver") != std::string::npos);
    CHECK(all.find("weights") != std::string::npos);
    CHECK(all.find("range_bin") != std::string::npos);
    CHECK(e.problems().size() >= 6);
  }
  CHECK_THROWS_AS(parse_config_text("{not json"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(R"({"block_len": 8})"), ConfigError);  // no version
}

TEST_CASE("waveform binary round trip and hashing") {
  const fs::path dir = fs::temp_directory_path() / "cmwd_unit_bin";
  fs::create_directories(dir);
  CMatrix X(2, 3);
  X << cdouble(1, 0), cdouble(0, 1), cdouble(-1, 0), cdouble(0.5, 0.5), cdouble(0, -1), cdouble(1, 1);
  write_waveform_bin(dir / "w.bin", {X, 1.0});
  CHECK(fs::file_size(dir / "w.bin") == 6 * 8);
  const auto w = read_waveform_bin(dir / "w.bin", 2, 3, 1.0);
  CHECK((w.X - X).norm() < 1e-7);
  CHECK_THROWS(read_waveform_bin(dir / "w.bin", 2, 4, 1.0));
  CHECK_THROWS(read_waveform_bin(dir / "w.bin", 2, 2, 1.0));
  std::ofstream(dir / "abc.txt") << "abc";
  CHECK(sha256_file(dir / "abc.txt") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  fs::remove_all(dir);
}

TEST_CASE("experiment artifacts are complete and reproducible") {
  const fs::path root = fs::temp_directory_path() / "cmwd_unit_exp";
  fs::remove_all(root);
  auto cfg = parse_config_text(kSmall);
  cfg.output_dir = root / "a";
  const int code = run_experiment(cfg);
  CHECK((code == 0 || code == 2));
  const fs::path d = root / "a" / "seed_3";
  for (const char* f : {"waveform.bin", "waveform.json", "trace.csv", "timing.csv", "margins.csv", "beam_pattern.csv",
                        "autocorrelation.csv", "crosscorrelation.csv", "capon.csv", "pd_curve.csv", "sinr.csv",
                        "manifest.json"})
    CHECK_MESSAGE(fs::exists(d / f), f);
  std::ifstream bp(d / "beam_pattern.csv");
  std::string line;
  int rows = -1;
  while (std::getline(bp, line)) ++rows;
  CHECK(rows == 181);

  cfg.output_dir = root / "b";
  run_experiment(cfg);
  for (const char* f : {"waveform.bin", "margins.csv", "beam_pattern.csv", "autocorrelation.csv",
                        "crosscorrelation.csv", "capon.csv", "pd_curve.csv", "sinr.csv"})
    CHECK_MESSAGE(read(d / f) == read(root / "b" / "seed_3" / f), f);

  cfg.solver = SolverKind::radar_only;
  cfg.output_dir = root / "r";
  run_experiment(cfg);
  CHECK(fs::exists(root / "r" / "seed_3" / "waveform.bin"));
  CHECK_FALSE(fs::exists(root / "r" / "seed_3" / "margins.csv"));

  auto tiny = parse_config_text(kSmall);
  tiny.mm.max_iter = 1;
  tiny.evaluation.enabled = false;
  tiny.output_dir = root / "t";
  CHECK(run_experiment(tiny) == 2);
  CHECK(fs::exists(root / "t" / "seed_3" / "waveform.bin"));

  const auto ev = run_evaluation(d / "waveform.bin", cfg, root / "e");
  CHECK(ev == 0);
  CHECK(read(root / "e" / "capon.csv") == read(d / "capon.csv"));
  fs::remove_all(root);
}

TEST_CASE("scaling study rows") {
  auto cfg = parse_config_text(kSmall);
  cfg.scaling.block_lens = {4, 8};
  cfg.max_lag = 4;
  const auto rows = run_scaling_study(cfg);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].ln_t == 32);
  CHECK(rows[3].ln_t == 64);
  CHECK(rows[1].solver == SolverKind::ladmm);
  const auto again = run_scaling_study(cfg);
  for (std::size_t i = 0; i < rows.size(); ++i) CHECK(rows[i].iterations == again[i].iterations);
  std::ostringstream out;
  write_scaling_csv(out, rows);
  CHECK(out.str().rfind("ln_t,solver,wall_sec,iters,censored,status\n", 0) == 0);
}
