#include <gtest/gtest.h>

#include <fstream>

#include "srlstm/cli.hpp"
#include "test_support.hpp"

using namespace srlstm;
namespace fs = std::filesystem;

namespace {

void write_bytes(const fs::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

/// Directory with synthetic train/validation IDX files under MNIST names.
fs::path synthetic_data_dir() {
  static const fs::path dir = [] {
    auto d = srlstm::testing::temp_dir("cli_data");
    const auto [ti, tl] = srlstm::testing::synthetic_digits(300, 11);
    const auto [vi, vl] = srlstm::testing::synthetic_digits(100, 12);
    write_bytes(d / "train-images-idx3-ubyte", serialize_idx(ti));
    write_bytes(d / "train-labels-idx1-ubyte", serialize_idx(tl));
    write_bytes(d / "t10k-images-idx3-ubyte", serialize_idx(vi));
    write_bytes(d / "t10k-labels-idx1-ubyte", serialize_idx(vl));
    return d;
  }();
  return dir;
}

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "srlstm");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  ::testing::internal::CaptureStdout();
  ::testing::internal::CaptureStderr();
  const int code = cli::run(static_cast<int>(argv.size()), argv.data());
  Result r{code, ::testing::internal::GetCapturedStdout(), ::testing::internal::GetCapturedStderr()};
  return r;
}

/// Small-model flags so each run trains in well under a second.
std::vector<std::string> small(std::vector<std::string> args, const fs::path& out) {
  for (std::string a : {"--quiet", "--epochs", "1", "--hidden", "4", "--ensemble-size", "2", "--batch-size", "32",
                        "--empty-train", "30", "--empty-val", "10"})
    args.push_back(a);
  args.push_back("--data-dir");
  args.push_back(synthetic_data_dir().string());
  args.push_back("--out");
  args.push_back(out.string());
  return args;
}

std::string slurp(const fs::path& p) {
  const auto bytes = read_file_bytes(p);
  return std::string(bytes.begin(), bytes.end());
}

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST(Cli, GradcheckPasses) {
  const auto out = srlstm::testing::temp_dir("cli_gradcheck");
  const auto r = run_cli({"gradcheck", "--out", out.string()});
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("PASS"), std::string::npos);
  EXPECT_TRUE(fs::exists(out / "run_gradcheck.json"));
}

TEST(Cli, UnknownFlagIsUsageError) {
  EXPECT_EQ(run_cli({"sweep", "--no-such-flag"}).code, 2);
  EXPECT_EQ(run_cli({"frobnicate"}).code, 2);
  EXPECT_EQ(run_cli({}).code, 2);
  EXPECT_EQ(run_cli({"sweep", "--noise", "pink"}).code, 2);
  EXPECT_EQ(run_cli({"train", "--epochs", "0"}).code, 2);
}

TEST(Cli, HelpOnEverySubcommand) {
  for (std::string sub : {"train", "sweep", "ablation", "seqlen", "examples", "gradcheck"}) {
    const auto r = run_cli({sub, "--help"});
    EXPECT_EQ(r.code, 0) << sub;
    EXPECT_NE(r.out.find("--seed"), std::string::npos) << sub;
  }
  EXPECT_EQ(run_cli({"--help"}).code, 0);
}

TEST(Cli, MissingDataFileNamesPath) {
  const auto empty = srlstm::testing::temp_dir("cli_nodata");
  const auto out = srlstm::testing::temp_dir("cli_nodata_out");
  const auto r = run_cli({"sweep", "--quiet", "--data-dir", empty.string(), "--out", out.string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("missing data file"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find((empty / "train-images-idx3-ubyte").string()), std::string::npos) << r.err;
}

TEST(Cli, CorruptDataFileIsDataError) {
  const auto dir = srlstm::testing::temp_dir("cli_corrupt");
  for (const auto& e : fs::directory_iterator(synthetic_data_dir())) fs::copy_file(e.path(), dir / e.path().filename());
  write_bytes(dir / "t10k-labels-idx1-ubyte", {0, 0, 9, 9, 0, 0, 0, 1, 3});
  const auto r2 = run_cli({"sweep", "--quiet", "--data-dir", dir.string(), "--out",
                           srlstm::testing::temp_dir("cli_corrupt_out2").string(), "--epochs", "1", "--hidden", "2",
                           "--ensemble-size", "1"});
  EXPECT_EQ(r2.code, 1);
  EXPECT_NE(r2.err.find("srlstm:"), std::string::npos);
}

TEST(Cli, SweepWritesGridAndProvenance) {
  const auto out = srlstm::testing::temp_dir("cli_sweep");
  const auto r = run_cli(small({"sweep", "--t-factors", "1,0.2", "--noise-levels", "0,0.05,0.1"}, out));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = slurp(out / "sweep_uniform.csv");
  EXPECT_EQ(lines(csv), 7u);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), kSweepCsvHeader);
  ASSERT_TRUE(fs::exists(out / "run_sweep.json"));
  const auto j = nlohmann::json::parse(slurp(out / "run_sweep.json"));
  EXPECT_EQ(j["subcommand"], "sweep");
  EXPECT_EQ(j["config"]["t-factors"], "1,0.2");
  EXPECT_EQ(j["config"]["epochs"], "1");
  EXPECT_TRUE(fs::exists(out / "models"));
}

TEST(Cli, DefaultGridHasSeventyRows) {
  const auto out = srlstm::testing::temp_dir("cli_sweep_default");
  const auto r = run_cli(small({"sweep", "--noise", "gaussian"}, out));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(lines(slurp(out / "sweep_gaussian.csv")), 71u);
}

TEST(Cli, ByteIdenticalAcrossRunsAndJobs) {
  const auto a = srlstm::testing::temp_dir("cli_repro_a");
  const auto b = srlstm::testing::temp_dir("cli_repro_b");
  const std::vector<std::string> grid{"sweep", "--t-factors", "1,0.3,0.1", "--noise-levels", "0,0.05,0.2"};
  auto args_a = small(grid, a);
  args_a.insert(args_a.end(), {"--jobs", "1"});
  auto args_b = small(grid, b);
  args_b.insert(args_b.end(), {"--jobs", "2"});
  ASSERT_EQ(run_cli(args_a).code, 0);
  ASSERT_EQ(run_cli(args_b).code, 0);
  EXPECT_EQ(slurp(a / "sweep_uniform.csv"), slurp(b / "sweep_uniform.csv"));
  // Independently trained caches hold identical checkpoints.
  for (const auto& e : fs::recursive_directory_iterator(a / "models")) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), a / "models");
    EXPECT_EQ(slurp(e.path()), slurp(b / "models" / rel)) << rel;
  }
}

TEST(Cli, SeedChangesResult) {
  const auto a = srlstm::testing::temp_dir("cli_seed_a");
  const auto b = srlstm::testing::temp_dir("cli_seed_b");
  auto args_a = small({"sweep", "--t-factors", "0.3", "--noise-levels", "0.1,0.2"}, a);
  auto args_b = args_a;
  args_b[args_b.size() - 1] = b.string();
  args_b.insert(args_b.end(), {"--seed", "5"});
  ASSERT_EQ(run_cli(args_a).code, 0);
  ASSERT_EQ(run_cli(args_b).code, 0);
  EXPECT_NE(slurp(a / "sweep_uniform.csv"), slurp(b / "sweep_uniform.csv"));
}

TEST(Cli, ConfigFileWithFlagOverride) {
  const auto out = srlstm::testing::temp_dir("cli_config");
  const auto conf = out / "run.conf";
  {
    std::ofstream f(conf);
    f << "# small run\n"
      << "noise = gaussian\n"
      << "t-factors = 1,0.5\n"
      << "noise-levels = 0,0.1\n"
      << "epochs = 1\n"
      << "hidden = 4   # tiny\n"
      << "ensemble-size = 2\n"
      << "quiet = true\n";
  }
  // The flag overrides the file's noise-levels.
  const auto r = run_cli({"sweep", "--config", conf.string(), "--noise-levels", "0,0.1,0.2", "--data-dir",
                          synthetic_data_dir().string(), "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(r.err.empty()) << r.err;
  const auto rows = read_csv(out / "sweep_gaussian.csv");
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(rows.front().noise_kind, NoiseKind::gaussian);
  EXPECT_EQ(rows.front().n_models, 2u);
  const auto j = nlohmann::json::parse(slurp(out / "run_sweep.json"));
  EXPECT_EQ(j["config"]["hidden"], "4");
  EXPECT_EQ(j["config"]["noise-levels"], "0,0.1,0.2");
}

TEST(Cli, ConfigFileUnknownKeyIsUsageError) {
  const auto out = srlstm::testing::temp_dir("cli_config_bad");
  {
    std::ofstream f(out / "bad.conf");
    f << "colour = blue\n";
  }
  EXPECT_EQ(run_cli({"sweep", "--config", (out / "bad.conf").string()}).code, 2);
  EXPECT_EQ(run_cli({"sweep", "--config", (out / "absent.conf").string()}).code, 2);
}

TEST(Cli, TrainThenReuseCache) {
  const auto out = srlstm::testing::temp_dir("cli_train");
  const auto r = run_cli(small({"train"}, out));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("baseline accuracy"), std::string::npos);
  EXPECT_EQ(lines(slurp(out / "train_losses.csv")), 3u);  // header + 2 members x 1 epoch

  // A later sweep with the same settings loads the checkpoints instead of training.
  const auto before = fs::last_write_time(*fs::recursive_directory_iterator(out / "models"));
  auto args = small({"sweep", "--t-factors", "1", "--noise-levels", "0"}, out);
  args.erase(std::find(args.begin(), args.end(), "--quiet"));
  const auto s = run_cli(args);
  ASSERT_EQ(s.code, 0) << s.err;
  EXPECT_NE(s.err.find("loaded cached ensemble"), std::string::npos) << s.err;
  EXPECT_EQ(fs::last_write_time(*fs::recursive_directory_iterator(out / "models")), before);
}

TEST(Cli, AblationAndSeqlenAndExamples) {
  const auto out = srlstm::testing::temp_dir("cli_misc");
  ASSERT_EQ(run_cli(small({"ablation", "--t-factors", "1,0.2", "--noise-levels", "0,0.05"}, out)).code, 0);
  const auto abl = read_csv(out / "ablation_uniform.csv");
  ASSERT_EQ(abl.size(), 4u);
  EXPECT_FALSE(abl.front().mean_detection.has_value());

  ASSERT_EQ(run_cli(small({"seqlen", "--lengths", "1,2"}, out)).code, 0);
  const auto sl = read_csv(out / "seqlen.csv");
  ASSERT_EQ(sl.size(), 2u);
  EXPECT_EQ(sl[0].seq_len, 1);
  EXPECT_EQ(sl[1].seq_len, 2);
  EXPECT_NEAR(sl[0].t_factor, 0.15, 1e-12);
  EXPECT_NEAR(sl[0].noise_level, 0.075, 1e-12);

  const auto r = run_cli(small({"examples", "--count", "4"}, out));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(lines(slurp(out / "examples" / "manifest.csv")), 5u);
  EXPECT_TRUE(fs::exists(out / "examples" / "ex003_noised.pgm"));
  EXPECT_EQ(run_cli(small({"examples", "--member", "7"}, out)).code, 2);
}
