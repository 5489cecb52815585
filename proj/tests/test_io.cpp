#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cqfm/config.hpp"
#include "cqfm/error.hpp"
#include "cqfm/panel_io.hpp"
#include "cqfm/simulate.hpp"

using namespace cqfm;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "cqfm_io_tests";
  fs::create_directories(dir);
  return dir / name;
}

void write_text(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

}  // namespace

TEST_SUITE("io") {
  TEST_CASE("csv parsing handles quotes and CRLF") {
    std::istringstream in("id,\"a,b\",c\r\nx,\"say \"\"hi\"\"\",3\r\n");
    const auto t = parse_csv(in);
    REQUIRE(t.header.size() == 3);
    CHECK(t.header[1] == "a,b");
    REQUIRE(t.rows.size() == 1);
    CHECK(t.rows[0][1] == "say \"hi\"");
    CHECK(t.rows[0][2] == "3");
  }

  TEST_CASE("ragged rows are reported with their line") {
    std::istringstream in("id,a\nx,1\ny,2,3\n");
    try {
      parse_csv(in, "f.csv");
      FAIL("expected an exception");
    } catch (const DataError& e) {
      CHECK(e.row() == 3);
    }
  }

  TEST_CASE("cells") {
    CHECK(parse_cell(" 1.5 ", 1, 1, "s") == 1.5);
    CHECK(parse_cell("-2e-3", 1, 1, "s") == -0.002);
    CHECK(parse_cell("+4", 1, 1, "s") == 4.0);
    for (const char* bad : {"", "NA", "nan", "abc", "1.2.3", "inf"}) {
      try {
        parse_cell(bad, 4, 7, "s");
        FAIL("expected an exception");
      } catch (const DataError& e) {
        CHECK(e.row() == 4);
        CHECK(e.col() == 7);
      }
    }
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(std::nan("")) == "NaN");
  }

  TEST_CASE("panel round trip is lossless") {
    DgpSpec spec;
    spec.n = 25;
    spec.T = 4;
    spec.D = 3;
    spec.R_loc = 1;
    const auto sim = simulate_panel(spec);
    const auto r = scratch("rt_returns.csv"), c = scratch("rt_chars.csv");
    save_panel(sim.panel, r, c);
    const auto back = load_panel(r, c);
    CHECK(back.Y == sim.panel.Y);
    CHECK(back.X == sim.panel.X);
    CHECK(back.unit_ids == sim.panel.unit_ids);
    CHECK(back.time_ids == sim.panel.time_ids);
    CHECK(back.characteristic_names == sim.panel.characteristic_names);
  }

  TEST_CASE("units are matched by id, in characteristics order") {
    const auto r = scratch("m_returns.csv"), c = scratch("m_chars.csv");
    write_text(r, "permno,2001-01,2001-02\nB,1,2\nA,3,4\n");
    write_text(c, "permno,size\nA,10\nB,20\n");
    const auto p = load_panel(r, c);
    CHECK(p.unit_ids == std::vector<std::string>{"A", "B"});
    CHECK(p.Y(0, 0) == 3);
    CHECK(p.X(1, 0) == 20);
    CHECK(p.time_ids[1] == "2001-02");
    CHECK(p.characteristic_names[0] == "size");
  }

  TEST_CASE("data errors name the offending place") {
    const auto r = scratch("e_returns.csv"), c = scratch("e_chars.csv");
    write_text(c, "id,size\nA,10\nB,20\n");
    write_text(r, "id,t1\nA,1\nC,2\n");
    CHECK_THROWS_WITH_AS(load_panel(r, c), doctest::Contains("'B'"), DataError);
    write_text(r, "id,t1\nA,1\nB,NA\n");
    try {
      load_panel(r, c);
      FAIL("expected an exception");
    } catch (const DataError& e) {
      CHECK(e.row() == 3);
      CHECK(e.col() == 2);
    }
    write_text(r, "id,t1\nA,1\nA,2\n");
    CHECK_THROWS_WITH_AS(load_panel(r, c), doctest::Contains("duplicate"), DataError);
    CHECK_THROWS_AS(load_panel(scratch("missing.csv"), c), DataError);
  }

  TEST_CASE("run configuration") {
    RunConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.resolved_methods({Method::QPPCA}) == std::vector<Method>{Method::QPPCA});
    cfg.methods = {"pca", "QPPCA"};
    CHECK(cfg.resolved_methods({}) == std::vector<Method>{Method::PCA, Method::QPPCA});
    cfg.methods = {"nope"};
    CHECK_THROWS_AS(cfg.resolved_methods({}), InvalidArgument);
    cfg = RunConfig{};
    cfg.taus = {0.5, 1.0};
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    cfg = RunConfig{};
    cfg.R = 0;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    CHECK(parse_selection_rule("eigen-ratio") == SelectionRule::EigenRatio);
    CHECK_THROWS_AS(parse_selection_rule("bic"), InvalidArgument);
  }
}
