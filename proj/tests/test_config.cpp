#include <fstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "rgan/checkpoint.hpp"
#include "rgan/config.hpp"

using namespace rgan;

TEST_CASE("defaults") {
  const RunConfig c;
  CHECK(c.model.width == 39);
  CHECK(c.degradation.sigma == 1.6);
  CHECK(c.train.base_lr == 1e-4);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("config text") {
  RunConfig c;
  apply_config_text(c,
                    "# tiny\n"
                    "width = 6\n"
                    "sigma=1.2   # inline comment\n"
                    "\n"
                    "ablation.tam = false\n"
                    "ablation.asm_mode = substitute\n"
                    "loss = l1\n"
                    "seed = 12\n");
  CHECK(c.model.width == 6);
  CHECK(c.degradation.sigma == 1.2);
  CHECK_FALSE(c.spec.tam);
  CHECK(c.spec.asm_mode == AsmMode::substitute);
  CHECK(c.train.loss == LossKind::l1);
  CHECK(c.train.seed == 12);
}

TEST_CASE("scale feeds model and degradation") {
  RunConfig c;
  set_config_value(c, "scale", "2");
  CHECK(c.model.scale == 2);
  CHECK(c.degradation.scale == 2);
  CHECK(c.model.frm_out_channels == 12);
}

TEST_CASE("config errors name the problem") {
  RunConfig c;
  CHECK_THROWS_AS(set_config_value(c, "depth", "3"), ConfigError);
  CHECK_THROWS_AS(set_config_value(c, "width", "six"), ConfigError);
  CHECK_THROWS_AS(set_config_value(c, "ablation.rg", "maybe"), ConfigError);
  try {
    apply_config_text(c, "width = 6\nwidth = 9\n", "run.cfg");
    FAIL("duplicate key accepted");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("run.cfg:2") != std::string::npos);
  }
  CHECK_THROWS_AS(apply_config_text(c, "width 6\n"), ConfigError);
  CHECK_THROWS_AS(apply_config_file(c, "/nonexistent/rgan.cfg"), DataError);
}

TEST_CASE("render parses back to the same config") {
  RunConfig c;
  set_config_value(c, "width", "12");
  set_config_value(c, "base_lr", "0.00031");
  set_config_value(c, "ablation.rg", "false");
  const std::string text = render_config(c);
  RunConfig d;
  apply_config_text(d, text);
  CHECK(d == c);
  for (const std::string& k : config_keys()) CHECK(text.find(k + " = ") != std::string::npos);
}

TEST_CASE("files override defaults") {
  fixture::TempDir dir("cfg");
  std::ofstream(dir / "a.cfg") << "width = 9\nseed = 3\n";
  RunConfig c;
  apply_config_file(c, dir / "a.cfg");
  CHECK(c.model.width == 9);
  set_config_value(c, "seed", "4");
  CHECK(c.train.seed == 4);
}
