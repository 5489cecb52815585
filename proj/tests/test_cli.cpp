#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cqfm/commands.hpp"
#include "cqfm/panel_io.hpp"
#include "cqfm/simulate.hpp"

using namespace cqfm;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "cqfm");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path workdir() {
  const auto dir = fs::temp_directory_path() / "cqfm_cli_tests";
  fs::create_directories(dir);
  return dir;
}

std::pair<fs::path, fs::path> sample_panel() {
  DgpSpec spec;
  spec.n = 150;
  spec.T = 12;
  spec.include_scale_factor = true;
  spec.seed = 21;
  const auto sim = simulate_panel(spec);
  const auto r = workdir() / "returns.csv", c = workdir() / "chars.csv";
  save_panel(sim.panel, r, c);
  return {r, c};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("fit writes every output") {
    const auto [r, c] = sample_panel();
    const auto out = workdir() / "fit";
    fs::remove_all(out);
    const auto run = cli({"fit", "--returns", r.string(), "--characteristics", c.string(), "--tau", "0.25,0.5",
                          "--methods", "qppca,ppca,pca", "-o", out.string(), "--threads", "1"});
    INFO(run.err);
    REQUIRE(run.code == 0);
    for (const char* f : {"manifest.json", "factor_count.csv", "factor_correlation.csv", "factors_qppca_tau0.25.csv",
                          "factors_qppca_tau0.5.csv", "loadings_qppca_tau0.5.csv", "quantile_returns_qppca_tau0.5.csv",
                          "factors_ppca.csv", "loadings_ppca.csv", "factors_pca.csv"})
      CHECK_MESSAGE(fs::exists(out / f), f);

    const auto manifest = json::parse(slurp(out / "manifest.json"));
    CHECK(manifest["command"] == "fit");
    CHECK(manifest["n"] == 150);
    CHECK(manifest["estimates"].size() == 4);

    const auto count = read_csv(out / "factor_count.csv");
    CHECK(count.header[2] == "rho_1");
    CHECK(count.rows.size() == 4);
    const auto corr = read_csv(out / "factor_correlation.csv");
    REQUIRE(corr.rows.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(corr.rows[i][i + 1] == "1");
      for (std::size_t j = 0; j < 4; ++j) CHECK(corr.rows[i][j + 1] == corr.rows[j][i + 1]);
    }
    const auto loadings = read_csv(out / "loadings_qppca_tau0.5.csv");
    CHECK(loadings.rows.size() == 2u * 101u);
    const auto quantiles = read_csv(out / "quantile_returns_qppca_tau0.5.csv");
    CHECK(quantiles.rows.size() == 150);
    CHECK(quantiles.header.size() == 13);
  }

  TEST_CASE("fixed R overrides the selection rule") {
    const auto [r, c] = sample_panel();
    const auto out = workdir() / "fixed";
    const auto run = cli({"fit", "--returns", r.string(), "--characteristics", c.string(), "--tau", "0.9", "-R", "3",
                          "--methods", "qppca", "-o", out.string()});
    REQUIRE(run.code == 0);
    const auto f = read_csv(out / "factors_qppca_tau0.9.csv");
    CHECK(f.header.size() == 7);  // time_id, F_hat_1..3, F_tilde_1..3
  }

  TEST_CASE("select-rank and a config file") {
    const auto [r, c] = sample_panel();
    const auto out = workdir() / "rank";
    const auto cfg = workdir() / "run.ini";
    std::ofstream(cfg) << "tau=0.5\nd=0.5\nmethods=qppca\n";
    const auto run = cli({"select-rank", "--config", cfg.string(), "--returns", r.string(), "--characteristics",
                          c.string(), "-o", out.string(), "--d", "0.3"});
    INFO(run.err);
    REQUIRE(run.code == 0);
    const auto manifest = json::parse(slurp(out / "manifest.json"));
    CHECK(manifest["config"]["d"] == 0.3);  // flag beats file
    CHECK(manifest["config"]["taus"].size() == 1);
    CHECK(read_csv(out / "factor_count.csv").rows.size() == 1);
  }

  TEST_CASE("simulate is byte reproducible") {
    std::vector<std::string> args{"simulate", "--n", "100", "--T", "6", "--reps", "3", "--tau", "0.5,0.75",
                                  "--scale-factor", "--seed", "5"};
    auto a = args, b = args;
    a.insert(a.end(), {"-o", (workdir() / "sim_a").string()});
    b.insert(b.end(), {"-o", (workdir() / "sim_b").string(), "--parallel"});
    REQUIRE(cli(a).code == 0);
    REQUIRE(cli(b).code == 0);
    CHECK(slurp(workdir() / "sim_a" / "aggregate.json") == slurp(workdir() / "sim_b" / "aggregate.json"));
    CHECK(slurp(workdir() / "sim_a" / "replications.csv") == slurp(workdir() / "sim_b" / "replications.csv"));
    const auto agg = json::parse(slurp(workdir() / "sim_a" / "aggregate.json"));
    CHECK(agg["summaries"].size() == 4);
  }

  TEST_CASE("errors are structured JSON on stderr") {
    const auto [r, c] = sample_panel();
    auto run = cli({"fit", "--returns", r.string(), "--characteristics", c.string(), "--methods", "bogus", "-o",
                    (workdir() / "never").string()});
    CHECK(run.code != 0);
    auto j = json::parse(run.err);
    CHECK(j["error"]["kind"] == "invalid_argument");
    CHECK(!fs::exists(workdir() / "never"));

    const auto bad = workdir() / "bad_returns.csv";
    std::ofstream(bad) << "id,t1,t2\nunit1,0.1,oops\n";
    run = cli({"select-rank", "--returns", bad.string(), "--characteristics", c.string()});
    j = json::parse(run.err);
    CHECK(j["error"]["kind"] == "data_error");
    CHECK(j["error"]["row"] == 2);
    CHECK(j["error"]["col"] == 3);

    run = cli({"fit"});
    CHECK(run.code == 2);
    CHECK(json::parse(run.err)["error"]["kind"] == "usage");
    CHECK(cli({"--help"}).code == 0);
  }
}
