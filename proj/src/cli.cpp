#include "rgan/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "rgan/checkpoint.hpp"
#include "rgan/config.hpp"
#include "rgan/eval.hpp"
#include "rgan/gradcheck.hpp"
#include "rgan/grid.hpp"
#include "rgan/image_io.hpp"

namespace rgan {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  int workers = 1;
  std::string out;
  std::string in;
  std::string ckpt;
  std::string dataset;
  std::string baseline = "bicubic";
  std::optional<double> sigma;
  std::optional<int> scale;
  int crop_border = 0;
  int tile = 0;
  int height = 180;
  int width = 320;
  int frames = 7;
  int warmup = 1;
  std::vector<std::string> crops;
};

RunConfig resolve(const Options& o) {
  RunConfig cfg;
  if (!o.config.empty()) apply_config_file(cfg, o.config);
  if (o.seed) set_config_value(cfg, "seed", std::to_string(*o.seed));
  if (o.sigma) {
    std::ostringstream s;
    s << std::setprecision(17) << *o.sigma;
    set_config_value(cfg, "sigma", s.str());
  }
  if (o.scale) set_config_value(cfg, "scale", std::to_string(*o.scale));
  return cfg;
}

// Written before any work starts. File outputs get the echo beside them.
void echo_config(const RunConfig& cfg, const Options& o, const std::string& command) {
  if (o.out.empty()) return;
  fs::path dir = o.out;
  if (fs::path(o.out).has_extension()) dir = fs::path(o.out).parent_path();
  if (!dir.empty()) fs::create_directories(dir);
  std::ofstream f(dir / "resolved_config.txt");
  if (!f) throw DataError("cannot write " + (dir / "resolved_config.txt").string());
  f << "# " << command << "\n" << render_config(cfg);
}

RganParams obtain_model(const RunConfig& cfg, const Options& o) {
  if (!o.ckpt.empty()) {
    if (!o.config.empty()) return load_checkpoint(o.ckpt, cfg.model, cfg.spec).params;
    return load_checkpoint(o.ckpt).params;
  }
  cfg.model.validate();
  return build_model(cfg.model, cfg.spec, cfg.train.seed).params;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw DataError("cannot write " + path.string());
  f << text;
}

std::vector<fs::path> sorted_pngs_recursive(const fs::path& root) {
  if (!fs::is_directory(root)) throw DataError("input directory not found: " + root.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

CropBox parse_crop(const std::string& text) {
  CropBox b;
  char c1 = 0, c2 = 0, c3 = 0;
  std::istringstream in(text);
  if (!(in >> b.top >> c1 >> b.left >> c2 >> b.height >> c3 >> b.width) || c1 != ',' || c2 != ',' || c3 != ',' ||
      !in.eof()) {
    throw ConfigError("--crop expects top,left,height,width, got '" + text + "'");
  }
  return b;
}

int cmd_degrade(const Options& o, std::ostream& out) {
  RunConfig cfg = resolve(o);
  cfg.degradation.validate();
  if (o.in.empty() || o.out.empty()) throw ConfigError("degrade needs --in and --out");
  echo_config(cfg, o, "degrade");
  int n = 0;
  for (const fs::path& src : sorted_pngs_recursive(o.in)) {
    const FeatureMap hr = mod_crop(read_png(src), cfg.degradation.scale);
    write_png(fs::path(o.out) / fs::relative(src, o.in), degrade(hr, cfg.degradation));
    ++n;
  }
  out << "degraded " << n << " frame(s) into " << o.out << "\n";
  return 0;
}

int cmd_params(const Options& o, std::ostream& out) {
  const RunConfig cfg = resolve(o);
  echo_config(cfg, o, "params");
  const RganParams params = obtain_model(cfg, o);
  const ParamReport report = count_params(params);
  out << format_param_report(report);
  if (!o.out.empty()) write_text(fs::path(o.out) / "params.txt", format_param_report(report));
  return 0;
}

int cmd_train(const Options& o, std::ostream& out) {
  RunConfig cfg = resolve(o);
  cfg.validate();
  if (o.dataset.empty() || o.out.empty()) throw ConfigError("train needs --dataset and --out");
  echo_config(cfg, o, "train");
  const fs::path root = o.dataset;
  const DatasetLayout layout =
      fs::exists(root / kDefaultListFile) ? DatasetLayout::septuplet_list : DatasetLayout::sequence_dirs;
  DiskClipSource source(scan_dataset(root, layout));
  Checkpoint state;
  if (!o.ckpt.empty()) {
    state = load_checkpoint(o.ckpt, cfg.model, cfg.spec);
    out << "resuming at epoch " << state.epoch << "\n";
  } else {
    state = start_training(build_model(cfg.model, cfg.spec, cfg.train.seed).params, cfg.train);
  }
  std::ofstream log(fs::path(o.out) / "train_log.txt", std::ios::app);
  TrainHooks hooks;
  hooks.on_step = [&](const StepLog& s) {
    log << "epoch " << s.epoch << " step " << s.step << " lr " << s.lr << " loss " << std::setprecision(17) << s.loss
        << "\n";
    log.flush();
  };
  hooks.on_epoch_end = [&](const Checkpoint& c) {
    std::ostringstream name;
    name << "epoch_" << std::setw(4) << std::setfill('0') << c.epoch << ".ckpt";
    save_checkpoint(c, fs::path(o.out) / name.str());
    save_checkpoint(c, fs::path(o.out) / "latest.ckpt");
    out << "epoch " << c.epoch << " done, last loss " << (c.loss_history.empty() ? 0.0 : c.loss_history.back())
        << "\n";
  };
  train(state, source, state.train, cfg.degradation, -1, hooks);
  return 0;
}

int cmd_eval(const Options& o, std::ostream& out) {
  const RunConfig cfg = resolve(o);
  cfg.degradation.validate();
  if (o.dataset.empty()) throw ConfigError("eval needs --dataset");
  if (o.baseline != "bicubic" && o.baseline != "model") {
    throw ConfigError("--baseline must be bicubic or model, got '" + o.baseline + "'");
  }
  echo_config(cfg, o, "eval");
  EvalConfig ec;
  ec.degradation = cfg.degradation;
  ec.crop_border = o.crop_border;
  ec.workers = o.workers;
  std::optional<RganParams> params;
  Upscaler up;
  if (o.baseline == "model") {
    params = obtain_model(cfg, o);
    up = model_upscaler(*params, o.tile);
  } else {
    up = bicubic_upscaler(cfg.degradation.scale);
  }
  MetricReport report = evaluate_dataset(o.dataset, up, ec);
  report.method = o.baseline;
  if (params) report.variant = params->spec.label();
  out << report_table(report);
  if (!o.out.empty()) write_text(fs::path(o.out) / "report.json", report_json(report));
  return report.failed_sequences > 0 ? 1 : 0;
}

int cmd_infer(const Options& o, std::ostream& out) {
  const RunConfig cfg = resolve(o);
  if (o.in.empty() || o.out.empty()) throw ConfigError("infer needs --in and --out");
  echo_config(cfg, o, "infer");
  const RganParams params = obtain_model(cfg, o);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(o.in)) {
    if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no PNG frames in " + o.in);
  VideoTensor lr;
  for (const fs::path& f : files) lr.push_back(read_png(f));
  const VideoTensor sr = o.tile > 0 ? tiled_forward(lr, params, o.tile) : rgan_forward(lr, params);
  for (std::size_t t = 0; t < files.size(); ++t) write_png(fs::path(o.out) / files[t].filename(), sr[t]);
  out << "wrote " << sr.size() << " frame(s) to " << o.out << "\n";
  return 0;
}

int cmd_bench(const Options& o, std::ostream& out) {
  const RunConfig cfg = resolve(o);
  echo_config(cfg, o, "bench");
  const RganParams params = obtain_model(cfg, o);
  BenchConfig bc;
  bc.height = o.height;
  bc.width = o.width;
  bc.frames = o.frames;
  bc.warmup = o.warmup;
  bc.seed = cfg.train.seed;
  const BenchReport r = benchmark(params, bc);
  const std::string json = bench_json(r);
  out << json;
  if (!o.out.empty()) write_text(fs::path(o.out) / "bench.json", json);
  return 0;
}

int cmd_gradcheck(const Options& o, std::ostream& out) {
  const RunConfig cfg = resolve(o);
  echo_config(cfg, o, "gradcheck");
  bool ok = true;
  std::ostringstream text;
  for (const AblationSpec& spec : standard_variants()) {
    GradCheckConfig gc;
    gc.spec = spec;
    gc.seed = cfg.train.seed;
    const GradCheckReport r = grad_check(gc);
    text << std::left << std::setw(18) << r.variant << " samples " << r.samples << " kink-resolved " << r.kinked
         << " max_rel_error " << std::scientific << std::setprecision(3) << r.max_rel_error << std::defaultfloat
         << " (" << r.worst_array << ") " << (r.passed ? "ok" : "FAIL") << "\n";
    for (const std::string& f : r.failures) text << "  offending array: " << f << "\n";
    ok = ok && r.passed;
  }
  out << text.str();
  if (!o.out.empty()) write_text(fs::path(o.out) / "gradcheck.txt", text.str());
  return ok ? 0 : 1;
}

int cmd_grid(const Options& o, std::ostream& out) {
  const RunConfig cfg = resolve(o);
  if (o.in.empty() || o.out.empty()) throw ConfigError("grid needs --in (a ground-truth frame) and --out");
  if (o.crops.empty()) throw ConfigError("grid needs at least one --crop top,left,height,width");
  echo_config(cfg, o, "grid");
  std::vector<CropBox> crops;
  for (const std::string& c : o.crops) crops.push_back(parse_crop(c));
  const FeatureMap gt = mod_crop(read_png(o.in), cfg.degradation.scale);
  const FeatureMap lr = quantize8(degrade(gt, cfg.degradation));
  std::vector<GridPanel> panels{{"GT", gt}, {"Bicubic", quantize8(bicubic_resize(lr, cfg.degradation.scale))}};
  if (!o.ckpt.empty() || o.baseline == "model") {
    const RganParams params = obtain_model(cfg, o);
    panels.push_back({params.spec.label(), quantize8(rgan_forward(VideoTensor{lr}, params).front())});
  }
  const FeatureMap montage = render_grid(panels, crops);
  write_png(o.out, montage);
  out << "montage " << montage.width() << "x" << montage.height() << " hash " << std::hex << image_hash(montage)
      << std::dec << " -> " << o.out << "\n";
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Recurrent grouping-attention network for 4x video super-resolution"};
  app.require_subcommand(1);

  auto common = [&](CLI::App* c) {
    c->add_option("--config", o.config, "flat key = value config file");
    c->add_option("--seed", o.seed, "seed for every random choice");
    c->add_option("--out", o.out, "output directory (or file for grid)");
  };
  auto model_source = [&](CLI::App* c) { c->add_option("--ckpt", o.ckpt, "checkpoint to load"); };
  auto degradation = [&](CLI::App* c) {
    c->add_option("--sigma", o.sigma, "Gaussian blur sigma");
    c->add_option("--scale", o.scale, "downsampling factor");
  };

  CLI::App* degrade_cmd = app.add_subcommand("degrade", "blur and decimate a tree of PNG frames");
  common(degrade_cmd);
  degradation(degrade_cmd);
  degrade_cmd->add_option("--in", o.in, "input directory")->required();

  CLI::App* train_cmd = app.add_subcommand("train", "train on a septuplet or sequence-directory dataset");
  common(train_cmd);
  model_source(train_cmd);
  degradation(train_cmd);
  train_cmd->add_option("--dataset", o.dataset, "dataset root")->required();
  train_cmd->add_option("--workers", o.workers, "accepted for symmetry; sampling runs on one thread");

  CLI::App* eval_cmd = app.add_subcommand("eval", "PSNR/SSIM on the Y channel over a test set");
  common(eval_cmd);
  model_source(eval_cmd);
  degradation(eval_cmd);
  eval_cmd->add_option("--dataset", o.dataset, "root of per-sequence frame directories")->required();
  eval_cmd->add_option("--baseline", o.baseline, "bicubic or model")->check(CLI::IsMember({"bicubic", "model"}));
  eval_cmd->add_option("--crop-border", o.crop_border, "pixels removed from each edge before measuring");
  eval_cmd->add_option("--tile", o.tile, "spatial tile size in LR pixels (0 = whole frames)");
  eval_cmd->add_option("--workers", o.workers, "sequences evaluated concurrently");

  CLI::App* infer_cmd = app.add_subcommand("infer", "super-resolve one directory of LR frames");
  common(infer_cmd);
  model_source(infer_cmd);
  infer_cmd->add_option("--in", o.in, "directory of LR PNG frames")->required();
  infer_cmd->add_option("--tile", o.tile, "spatial tile size in LR pixels (0 = whole frames)");

  CLI::App* params_cmd = app.add_subcommand("params", "parameter audit");
  common(params_cmd);
  model_source(params_cmd);

  CLI::App* bench_cmd = app.add_subcommand("bench", "per-frame latency of the forward pass");
  common(bench_cmd);
  model_source(bench_cmd);
  bench_cmd->add_option("--height", o.height, "LR height");
  bench_cmd->add_option("--width", o.width, "LR width");
  bench_cmd->add_option("--frames", o.frames, "timed frames");
  bench_cmd->add_option("--warmup", o.warmup, "untimed passes first");

  CLI::App* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient check of every variant");
  common(grad_cmd);

  CLI::App* grid_cmd = app.add_subcommand("grid", "labelled comparison montage of zoomed crops");
  common(grid_cmd);
  model_source(grid_cmd);
  degradation(grid_cmd);
  grid_cmd->add_option("--in", o.in, "ground-truth frame")->required();
  grid_cmd->add_option("--baseline", o.baseline, "add the model panel when set to model")
      ->check(CLI::IsMember({"bicubic", "model"}));
  grid_cmd->add_option("--crop", o.crops, "crop box top,left,height,width (repeatable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      return app.exit(e, out, err);
    }
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (degrade_cmd->parsed()) return cmd_degrade(o, out);
    if (train_cmd->parsed()) return cmd_train(o, out);
    if (eval_cmd->parsed()) return cmd_eval(o, out);
    if (infer_cmd->parsed()) return cmd_infer(o, out);
    if (params_cmd->parsed()) return cmd_params(o, out);
    if (bench_cmd->parsed()) return cmd_bench(o, out);
    if (grad_cmd->parsed()) return cmd_gradcheck(o, out);
    if (grid_cmd->parsed()) return cmd_grid(o, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  err << app.help();
  return 2;
}

}  // namespace rgan
