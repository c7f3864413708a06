#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gcvae/cli.hpp"
#include "gcvae/errors.hpp"
#include "gcvae/io.hpp"
#include "test_util.hpp"

using namespace gcvae;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

CliRun cli(std::vector<std::string> args) {
  args.insert(args.begin(), "gcvae");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  CliRun r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::vector<std::string> fast_train_flags() {
  return {"--epochs-pretrain", "2", "--epochs-train", "3", "--seed", "4"};
}

}  // namespace

TEST_CASE("config round trip and partial documents") {
  TrainConfig c;
  c.K = 5;
  c.beta_train = 0.125;
  c.beta_schedule = {BetaSchedule::Kind::linear_ramp, 2, 9};
  c.mode = TrainMode::unguided_joint;
  c.encoder_hidden = {8, 4};
  CHECK(parse_config(config_to_json(c)) == c);

  const TrainConfig partial = parse_config(R"({"K": 4, "lr_net": 0.001})");
  CHECK(partial.K == 4);
  CHECK(partial.lr_net == 0.001);
  CHECK(partial.J == TrainConfig{}.J);
  CHECK(partial.beta_schedule == BetaSchedule{});
}

TEST_CASE("config errors carry source, line and field") {
  CHECK_THROWS_WITH_AS(parse_config("{\n  \"K\": 3,\n  \"bogus\": 1\n}", "run.json"),
                       doctest::Contains("run.json:3: field 'bogus'"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("{\n  \"K\": \"three\"\n}", "run.json"),
                       doctest::Contains("run.json:2: field 'K'"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("{\n\n  \"K\": 0\n}", "run.json"), doctest::Contains("run.json:3: field 'K'"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("{\n  \"K\": 3,,\n}", "run.json"), doctest::Contains("run.json:2"),
                       ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"mode": "sideways"})"), ConfigError);
}

TEST_CASE("checkpoint and metrics documents") {
  CHECK_THROWS_AS(parse_checkpoint("{}"), DataError);
  CHECK_THROWS_AS(parse_checkpoint("not json"), DataError);
  CHECK_THROWS_AS(parse_checkpoint(R"({"version": "gcvae-checkpoint/999"})"), DataError);

  EpochMetrics m;
  m.epoch = 3;
  m.phase = Phase::train;
  m.train.recon = -1.0 / 3.0;
  m.train.total = 0.1 + 0.2;
  m.val.entropy_c = 1e-300;
  m.beta_effective = 0.01;
  m.occupancy = {1, 2, 3};
  m.acc = 0.75;
  const EpochMetrics back = parse_metrics_record(metrics_record(m));
  CHECK(back.epoch == 3);
  CHECK(back.phase == Phase::train);
  CHECK(back.train.recon == m.train.recon);
  CHECK(back.train.total == m.train.total);
  CHECK(back.val.entropy_c == m.val.entropy_c);
  CHECK(back.occupancy == m.occupancy);
  CHECK(back.acc == m.acc);
  CHECK_FALSE(back.nmi.has_value());
  CHECK(metrics_record(m).find('\n') == std::string::npos);
}

TEST_CASE("cli usage errors exit 2") {
  CHECK(cli({}).code == 2);
  CHECK(cli({"frobnicate"}).code == 2);
  CHECK(cli({"train", "--data", "x.csv"}).code == 2);
  CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("cli end to end") {
  test_util::TempDir dir;
  const std::string data = (dir.path / "syn.csv").string();

  // generate is reproducible byte for byte.
  REQUIRE(cli({"generate", "--out", data, "--n", "600", "--seed", "3"}).code == 0);
  const std::string first = test_util::slurp(data);
  REQUIRE(cli({"generate", "--out", data, "--n", "600", "--seed", "3"}).code == 0);
  CHECK(test_util::slurp(data) == first);
  CHECK(first.substr(0, first.find('\n')).find("label") != std::string::npos);
  CHECK(fs::exists(data + ".spec.json"));

  SUBCASE("train is deterministic and writes its artifacts") {
    auto args = std::vector<std::string>{"train", "--data", data, "--guide-cols", "y0,y1,y2"};
    auto run_a = args, run_b = args;
    for (auto* r : {&run_a, &run_b}) {
      r->push_back("--out");
      r->push_back((dir.path / (r == &run_a ? "a" : "b")).string());
      for (const auto& f : fast_train_flags()) r->push_back(f);
    }
    run_a.push_back("--latent-snapshots");
    const auto ra = cli(run_a);
    REQUIRE_MESSAGE(ra.code == 0, ra.err);
    REQUIRE(cli(run_b).code == 0);
    const std::string ma = test_util::slurp(dir.path / "a" / "metrics.log");
    CHECK(ma == test_util::slurp(dir.path / "b" / "metrics.log"));
    CHECK(test_util::slurp(dir.path / "a" / "checkpoint.final") ==
          test_util::slurp(dir.path / "b" / "checkpoint.final"));
    CHECK(std::count(ma.begin(), ma.end(), '\n') == 5);
    CHECK(fs::exists(dir.path / "a" / "latent" / "train-0003.csv"));

    const auto manifest = nlohmann::json::parse(test_util::slurp(dir.path / "a" / "manifest.json"));
    CHECK(manifest["status"] == "complete");
    CHECK(manifest["data"]["rows"] == 600);
    CHECK(manifest["splits"]["val"].size() == 120);

    // infer on the original file: one probability row per data row.
    const auto out = (dir.path / "inf").string();
    const auto ri = cli({"infer", "--checkpoint", (dir.path / "a" / "checkpoint.final").string(), "--data", data,
                         "--out", out});
    REQUIRE_MESSAGE(ri.code == 0, ri.err);
    const CsvTable assign = read_csv(fs::path(out) / "assignments.csv");
    CHECK(assign.values.rows() == 600);
    CHECK(assign.names == std::vector<std::string>{"row", "cluster", "q0", "q1", "q2"});
    for (std::size_t i = 0; i < 600; ++i) {
      const double s = assign.values(i, 2) + assign.values(i, 3) + assign.values(i, 4);
      CHECK(std::abs(s - 1.0) < 1e-9);
    }
    CHECK(read_csv(fs::path(out) / "latent.csv").names == std::vector<std::string>{"z0", "z1", "cluster"});

    const auto rg = cli({"infer", "--checkpoint", (dir.path / "a" / "checkpoint.final").string(), "--data", data,
                         "--out", out, "--assign", "gumbel"});
    CHECK(rg.code == 0);
    CHECK(cli({"infer", "--checkpoint", (dir.path / "a" / "checkpoint.final").string(), "--data", data, "--out",
               out, "--assign", "soft"})
              .code == 2);

    // A file without one of the trained feature columns is a data error naming it.
    const CsvTable full = read_csv(data);
    CsvTable cut;
    cut.names.assign(full.names.begin() + 1, full.names.end());
    cut.values = full.values.col_block(1, full.names.size() - 1);
    const auto cut_path = (dir.path / "cut.csv").string();
    write_csv(cut_path, cut);
    const auto rm = cli({"infer", "--checkpoint", (dir.path / "a" / "checkpoint.final").string(), "--data",
                         cut_path, "--out", out});
    CHECK(rm.code == 3);
    CHECK(rm.err.find("missing [x0]") != std::string::npos);
  }

  SUBCASE("train error paths") {
    const auto out = (dir.path / "bad").string();
    const auto missing = cli({"train", "--data", data, "--guide-cols", "y0,nope", "--out", out});
    CHECK(missing.code == 3);
    CHECK(missing.err.find("'nope'") != std::string::npos);
    CHECK(cli({"train", "--data", data, "--guide-cols", "y0", "--out", out, "--K", "0"}).code == 2);
    CHECK(cli({"train", "--data", data, "--guide-cols", "y0", "--out", out, "--mode", "x"}).code == 2);
    CHECK(cli({"train", "--data", (dir.path / "absent.csv").string(), "--guide-cols", "y0", "--out", out}).code ==
          3);

    const auto cfg = dir.path / "cfg.json";
    write_text_file(cfg, "{\n  \"K\": 3,\n  \"epochs\": 4\n}\n");
    const auto rc = cli({"train", "--data", data, "--guide-cols", "y0", "--out", out, "--config", cfg.string()});
    CHECK(rc.code == 2);
    CHECK(rc.err.find("cfg.json:3: field 'epochs'") != std::string::npos);
  }

  SUBCASE("eval with the true labels as assignments") {
    const CsvTable full = read_csv(data);
    CsvTable a;
    a.names = {"row", "cluster"};
    a.values = Matrix(full.values.rows(), 2);
    const std::size_t lab = full.column("label");
    for (std::size_t i = 0; i < a.values.rows(); ++i) {
      a.values(i, 0) = static_cast<double>(i);
      a.values(i, 1) = full.values(i, lab);
    }
    const auto apath = (dir.path / "truth.csv").string();
    write_csv(apath, a);
    const auto out = (dir.path / "ev").string();
    const auto re = cli({"eval", "--assignments", apath, "--data", data, "--guide-cols", "y0,y1,y2", "--out", out});
    REQUIRE_MESSAGE(re.code == 0, re.err);
    const auto report = nlohmann::json::parse(test_util::slurp(fs::path(out) / "eval.json"));
    const auto& run = report["runs"][0];
    CHECK(run["acc"].get<double>() == 1.0);
    CHECK(run["nmi"].get<double>() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fs::exists(fs::path(out) / "profiles_0.csv"));

    CsvTable shorter = a;
    shorter.values = a.values.gather_rows(std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
    write_csv(apath, shorter);
    CHECK(cli({"eval", "--assignments", apath, "--data", data, "--out", out}).code == 3);
  }
}
