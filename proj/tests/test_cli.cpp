#include <fstream>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "fixtures.hpp"
#include "rgan/cli.hpp"
#include "rgan/data.hpp"
#include "rgan/image_io.hpp"
#include "rgan/train.hpp"

using namespace rgan;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "rgan");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_eval_set(const fs::path& root) {
  for (int s = 0; s < 2; ++s) {
    const VideoTensor v = synthetic_clip(2, 24, 32, 10 + s);
    for (std::size_t t = 0; t < v.size(); ++t) {
      write_png(root / ("seq" + std::to_string(s)) / (std::to_string(t) + ".png"), v[t]);
    }
  }
}

}  // namespace

TEST_CASE("usage errors exit 2") {
  CHECK(run({}).code == 2);
  CHECK(run({"launch"}).code == 2);
  CHECK(run({"params", "--bogus"}).code == 2);
  CHECK(run({"eval", "--dataset", "x", "--baseline", "nearest"}).code == 2);
  const Result r = run({"degrade"});
  CHECK(r.code == 2);
  CHECK(r.err.find("--in") != std::string::npos);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("params") {
  fixture::TempDir dir("cli_params");
  const Result r = run({"params"});
  CHECK(r.code == 0);
  CHECK(r.out.find("873778") != std::string::npos);

  std::ofstream(dir / "default.cfg") << "width = 39\n";
  CHECK(run({"params", "--config", (dir / "default.cfg").string()}).code == 0);

  std::ofstream(dir / "bad.cfg") << "width = 7\n";
  const Result bad = run({"params", "--config", (dir / "bad.cfg").string()});
  CHECK(bad.code == 1);
  CHECK(bad.err.find("width") != std::string::npos);
  CHECK(run({"params", "--config", (dir / "missing.cfg").string()}).code == 1);
}

TEST_CASE("resolved config echo follows defaults < file < flags") {
  fixture::TempDir dir("cli_echo");
  std::ofstream(dir / "run.cfg") << "seed = 3\nsigma = 1.2\nwidth = 6\n";
  REQUIRE(run({"params", "--config", (dir / "run.cfg").string(), "--seed", "9", "--out", (dir / "o").string()}).code ==
          0);
  const std::string echo = slurp(dir / "o/resolved_config.txt");
  CHECK(echo.find("seed = 9\n") != std::string::npos);
  CHECK(echo.find("sigma = 1.2\n") != std::string::npos);
  CHECK(echo.find("width = 6\n") != std::string::npos);
  CHECK(echo.find("decay_every = 25\n") != std::string::npos);
}

TEST_CASE("degrade mirrors the input tree") {
  fixture::TempDir dir("cli_degrade");
  fixture::write_sequence(dir / "seq/a", 2, 32, 40, 1);
  fixture::write_sequence(dir / "seq/b", 1, 34, 41, 5);
  const Result r = run({"degrade", "--in", (dir / "seq").string(), "--out", (dir / "lr").string(), "--sigma", "1.6",
                        "--scale", "4"});
  REQUIRE(r.code == 0);
  CHECK(png_size(dir / "lr/a/im1.png") == ImageSize{10, 8});
  CHECK(png_size(dir / "lr/a/im2.png") == ImageSize{10, 8});
  CHECK(png_size(dir / "lr/b/im1.png") == ImageSize{10, 8});
  const FeatureMap want = quantize8(degrade(read_png(dir / "seq/a/im2.png"), DegradationConfig{}));
  CHECK(read_png(dir / "lr/a/im2.png") == want);
  CHECK(fs::exists(dir / "lr/resolved_config.txt"));
  CHECK(run({"degrade", "--in", (dir / "nothing").string(), "--out", (dir / "lr2").string()}).code == 1);
}

TEST_CASE("eval is deterministic and reports failures") {
  fixture::TempDir dir("cli_eval");
  write_eval_set(dir / "set");
  const std::string set = (dir / "set").string();
  REQUIRE(run({"eval", "--dataset", set, "--baseline", "bicubic", "--out", (dir / "a").string()}).code == 0);
  REQUIRE(run({"eval", "--dataset", set, "--baseline", "bicubic", "--out", (dir / "b").string(), "--workers", "2"})
              .code == 0);
  CHECK(slurp(dir / "a/report.json") == slurp(dir / "b/report.json"));
  CHECK(slurp(dir / "a/report.json").find("\"method\": \"bicubic\"") != std::string::npos);

  const Result m = run({"eval", "--dataset", set, "--baseline", "model", "--config",
                        (dir / "m.cfg").string()});
  CHECK(m.code == 1);  // missing config file
  std::ofstream(dir / "m.cfg") << "width = 6\n";
  const Result model = run({"eval", "--dataset", set, "--baseline", "model", "--config", (dir / "m.cfg").string(),
                            "--out", (dir / "c").string()});
  CHECK(model.code == 0);
  // Zero-initialised output: identical to the bicubic numbers.
  std::string mj = slurp(dir / "c/report.json"), bj = slurp(dir / "a/report.json");
  CHECK(mj.substr(mj.find("\"mean_psnr\"")) == bj.substr(bj.find("\"mean_psnr\"")));

  // Too small for the SSIM window after cropping: every sequence fails.
  const Result crop = run({"eval", "--dataset", set, "--crop-border", "12"});
  CHECK(crop.code == 1);
  CHECK(crop.out.find("FAILED") != std::string::npos);
  CHECK(run({"eval", "--dataset", (dir / "none").string()}).code == 1);
}

TEST_CASE("train, resume, infer") {
  fixture::TempDir dir("cli_train");
  fixture::write_sequence(dir / "data/sequences/c1", 7, 256, 256, 1);
  std::ofstream(dir / "data/sep_trainlist.txt") << "c1\n";
  std::ofstream(dir / "tiny.cfg") << "width = 6\ntotal_epochs = 2\nbatch_size = 1\nclip_length = 3\n";
  const std::string cfg = (dir / "tiny.cfg").string();
  const Result r = run({"train", "--config", cfg, "--dataset", (dir / "data").string(), "--out",
                        (dir / "run").string(), "--seed", "4"});
  REQUIRE(r.code == 0);
  CHECK(fs::exists(dir / "run/epoch_0001.ckpt"));
  CHECK(fs::exists(dir / "run/epoch_0002.ckpt"));
  CHECK(slurp(dir / "run/latest.ckpt") == slurp(dir / "run/epoch_0002.ckpt"));

  // Resuming from epoch 1 ends on the same bytes.
  REQUIRE(run({"train", "--config", cfg, "--dataset", (dir / "data").string(), "--out", (dir / "again").string(),
               "--seed", "4", "--ckpt", (dir / "run/epoch_0001.ckpt").string()})
              .code == 0);
  CHECK(slurp(dir / "again/latest.ckpt") == slurp(dir / "run/latest.ckpt"));

  std::ofstream(dir / "wide.cfg") << "width = 9\n";
  CHECK(run({"params", "--config", (dir / "wide.cfg").string(), "--ckpt", (dir / "run/latest.ckpt").string()}).code ==
        1);

  fixture::write_sequence(dir / "lr", 2, 8, 10, 3);
  REQUIRE(run({"infer", "--in", (dir / "lr").string(), "--out", (dir / "sr").string(), "--ckpt",
               (dir / "run/latest.ckpt").string()})
              .code == 0);
  CHECK(png_size(dir / "sr/im1.png") == ImageSize{40, 32});
}

TEST_CASE("bench and grid") {
  fixture::TempDir dir("cli_misc");
  std::ofstream(dir / "tiny.cfg") << "width = 6\n";
  const Result b = run({"bench", "--config", (dir / "tiny.cfg").string(), "--height", "8", "--width", "8", "--frames",
                        "2", "--warmup", "0"});
  CHECK(b.code == 0);
  CHECK(b.out.find("\"p95_ms\"") != std::string::npos);
  CHECK(run({"bench", "--frames", "0"}).code == 1);

  write_png(dir / "gt.png", synthetic_clip(1, 40, 48, 2)[0]);
  const Result g = run({"grid", "--in", (dir / "gt.png").string(), "--out", (dir / "g/montage.png").string(), "--crop",
                        "0,0,10,10", "--crop", "8,8,12,16"});
  REQUIRE(g.code == 0);
  CHECK(fs::exists(dir / "g/montage.png"));
  CHECK(fs::exists(dir / "g/resolved_config.txt"));
  CHECK(read_png(dir / "g/montage.png").shape().width == 4 + 2 * (16 * 3 + 4));
  CHECK(run({"grid", "--in", (dir / "gt.png").string(), "--out", (dir / "x.png").string(), "--crop", "40,0,8,8"})
            .code == 1);
  CHECK(run({"grid", "--in", (dir / "gt.png").string(), "--out", (dir / "x.png").string(), "--crop", "1,2"}).code ==
        1);
}
