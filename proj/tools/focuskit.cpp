// focuskit command-line tool.
//
// Every command writes its artifacts atomically into the output directory
// (--out, else $FOCUSKIT_OUTPUT_DIR, else ./focuskit_out) together with a
// JSON manifest holding {tool_version, seed, config_hash} and a hash of each
// artifact. Commands that draw random numbers require --seed.

#include <CLI11.hpp>
#include <pthread.h>

#include <algorithm>
#include <csignal>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "focuskit/aggregate.hpp"
#include "focuskit/dfo.hpp"
#include "focuskit/io/json_io.hpp"
#include "focuskit/io/pfm.hpp"
#include "focuskit/io/ply.hpp"
#include "focuskit/io/png.hpp"
#include "focuskit/metrics.hpp"
#include "focuskit/projection.hpp"
#include "focuskit/randomization.hpp"
#include "focuskit/service/http_service.hpp"
#include "focuskit/sim/room_sweep.hpp"
#include "focuskit/sim/textured_scene.hpp"
#include "focuskit/synth.hpp"

namespace fs = std::filesystem;
using namespace focuskit;
using io::json;

namespace {

void log(const std::string& command, const std::string& msg) { std::cerr << "[" << command << "] " << msg << "\n"; }

fs::path default_output_dir() {
  if (const char* env = std::getenv("FOCUSKIT_OUTPUT_DIR"); env != nullptr && *env != '\0') return env;
  return "focuskit_out";
}

json input_ref(const fs::path& p) {
  return {{"path", p.string()}, {"fnv1a64", io::hex64(io::fnv1a64(io::read_file(p)))}};
}

/// Collects artifacts for one command run and writes the manifest last.
class Outputs {
 public:
  Outputs(fs::path dir, std::string command, json config, std::optional<std::uint64_t> seed)
      : dir_(std::move(dir)), command_(std::move(command)), config_(std::move(config)), seed_(seed) {
    fs::create_directories(dir_);
  }

  json provenance() const { return io::provenance(config_, seed_.value_or(0), seed_.has_value()); }

  std::vector<std::string> ply_comments() const {
    const auto p = provenance();
    return {"tool_version " + p.at("tool_version").get<std::string>(),
            "seed " + (seed_ ? std::to_string(*seed_) : std::string("none")),
            "config_hash " + p.at("config_hash").get<std::string>()};
  }

  const fs::path& dir() const { return dir_; }

  void write(const std::string& name, const std::string& bytes) {
    io::write_file_atomic(dir_ / name, bytes);
    artifacts_.push_back({{"file", name}, {"fnv1a64", io::hex64(io::fnv1a64(bytes))}});
  }

  void finish(const std::string& manifest_name, json results) {
    json m = {{"command", command_},
              {"provenance", provenance()},
              {"config", config_},
              {"artifacts", artifacts_},
              {"results", std::move(results)}};
    io::write_json(dir_ / manifest_name, m);
    log(command_, "wrote " + (dir_ / manifest_name).string());
  }

 private:
  fs::path dir_;
  std::string command_;
  json config_;
  std::optional<std::uint64_t> seed_;
  json artifacts_ = json::array();
};

struct LensFlags {
  std::string lens_json;
  double focal_length_m = ThinLensConfig{}.focal_length_m;
  double f_number = ThinLensConfig{}.f_number;
  double pixel_pitch_m = ThinLensConfig{}.pixel_pitch_m;

  void add(CLI::App* app) {
    app->add_option("--lens", lens_json, "Lens JSON {focal_length_m, f_number, pixel_pitch_m[, principal_point]}")
        ->check(CLI::ExistingFile);
    app->add_option("--focal-length", focal_length_m, "Focal length in meters")->capture_default_str();
    app->add_option("--f-number", f_number, "Aperture f-number")->capture_default_str();
    app->add_option("--pixel-pitch", pixel_pitch_m, "Sensor pixel pitch in meters")->capture_default_str();
  }

  ThinLensConfig get() const {
    if (!lens_json.empty()) return io::lens_from_json(io::read_json(lens_json));
    return ThinLensConfig::make(focal_length_m, f_number, pixel_pitch_m);
  }
};

std::string csv_number(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string short_number(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

// ---------------------------------------------------------------- make-scene

struct MakeSceneArgs {
  int width = 128;
  int height = 128;
  double near_m = 1.0;
  double far_m = 3.0;
  std::uint64_t seed = 0;
};

int run_make_scene(const MakeSceneArgs& a, const fs::path& out_dir) {
  const json config = {{"width", a.width}, {"height", a.height}, {"near_m", a.near_m}, {"far_m", a.far_m}};
  Outputs out(out_dir, "make-scene", config, a.seed);
  const auto scene = sim::two_plane_scene(a.width, a.height, a.near_m, a.far_m, a.seed);
  out.write("rgb.png", io::encode_png(scene.rgb));
  out.write("depth.pfm", io::encode_pfm(io::depth_to_grid(scene.depth)));
  out.finish("scene.json", {{"rgb", "rgb.png"}, {"depth", "depth.pfm"}});
  return 0;
}

// ---------------------------------------------------------------- synthesize

struct SynthesizeArgs {
  std::string rgb;
  std::string depth;
  LensFlags lens;
  std::uint64_t seed = 0;
  int stack_size = 5;
  std::string mode = "reference";
  int layers = 64;
  std::string fd_mode = "mixed";
  std::optional<double> psf_p;
  std::optional<double> fixed_f_number;
  std::vector<double> fds;
  double zoom = 1.0;
};

DepthMap load_depth(const fs::path& p, const std::string& command) {
  DepthMap d = io::read_depth_pfm(p);
  if (!d.fully_valid()) {
    log(command, "filling " + std::to_string(d.pixel_count() - d.valid_count()) + " depth holes");
    d = fill_depth_holes(d);
  }
  return d;
}

int run_synthesize(const SynthesizeArgs& a, const fs::path& out_dir) {
  FdSamplerConfig fd_cfg;
  fd_cfg.mode = parse_fd_mode(a.fd_mode);
  fd_cfg.stack_size = a.stack_size;
  const BlurSamplerConfig blur_cfg;
  const SynthesisOptions opts{parse_synthesis_mode(a.mode), a.layers, kDefaultPsfCutoff};
  ThinLensConfig lens = a.lens.get();

  json config = {{"rgb", input_ref(a.rgb)},
                 {"depth", input_ref(a.depth)},
                 {"lens", io::to_json(lens)},
                 {"mode", a.mode},
                 {"layers", a.layers},
                 {"fd_sampler", io::to_json(fd_cfg)},
                 {"blur_sampler", io::to_json(blur_cfg)},
                 {"zoom", a.zoom}};
  if (a.psf_p) config["psf_shape_p"] = *a.psf_p;
  if (a.fixed_f_number) config["fixed_f_number"] = *a.fixed_f_number;
  if (!a.fds.empty()) config["focus_distances_m"] = a.fds;
  Outputs out(out_dir, "synthesize", config, a.seed);

  RgbImage rgb = io::read_png(a.rgb);
  DepthMap depth = load_depth(a.depth, "synthesize");
  if (a.zoom != 1.0) {
    auto z = zoom_augment(rgb, depth, lens, a.zoom);
    rgb = std::move(z.rgb);
    depth = std::move(z.depth);
    lens = z.lens;
  }

  // The full draw always happens so that overrides do not shift the stream.
  SeededRng rng(a.seed);
  StackSample sample = sample_stack(&depth, fd_cfg, blur_cfg, rng);
  if (a.psf_p) sample.psf_shape_p = *a.psf_p;
  if (a.fixed_f_number) sample.f_number = *a.fixed_f_number;
  if (!a.fds.empty()) {
    sample.focus_distances_m = a.fds;
    std::sort(sample.focus_distances_m.begin(), sample.focus_distances_m.end());
  }
  lens = ThinLensConfig::make(lens.focal_length_m, sample.f_number, lens.pixel_pitch_m, lens.principal_point);

  const auto stack = synthesize_stack(rgb, depth, lens, sample.focus_distances_m, sample.psf_shape_p, opts);
  json images = json::array();
  for (std::size_t i = 0; i < stack.size(); ++i) {
    std::ostringstream name;
    name << "image_" << std::setw(2) << std::setfill('0') << i << ".png";
    out.write(name.str(), io::encode_png(stack.images[i]));
    images.push_back(name.str());
  }
  out.write("depth.pfm", io::encode_pfm(io::depth_to_grid(depth)));
  log("synthesize", std::to_string(stack.size()) + " images, p = " + short_number(sample.psf_shape_p) +
                        ", N = " + short_number(sample.f_number));
  out.finish("stack.json", {{"images", images},
                            {"depth", "depth.pfm"},
                            {"focus_distances_m", sample.focus_distances_m},
                            {"psf_shape_p", sample.psf_shape_p},
                            {"f_number", lens.f_number},
                            {"focal_length_m", lens.focal_length_m},
                            {"pixel_pitch_m", lens.pixel_pitch_m},
                            {"mode", a.mode},
                            {"kappa", sample.kappa},
                            {"fd_bounds", {{"near_m", sample.bounds.near_m},
                                           {"far_m", sample.bounds.far_m},
                                           {"source", to_string(sample.bounds.source)}}},
                            {"lens", io::to_json(lens)}});
  return 0;
}

// ---------------------------------------------------------------- sample-fds

struct SampleFdsArgs {
  std::uint64_t seed = 0;
  int stack_size = 5;
  std::string fd_mode = "mixed";
  std::string depth;
  int count = 1;
  std::vector<double> kappa_range{0.0, 1.0};
};

int run_sample_fds(const SampleFdsArgs& a, const fs::path& out_dir) {
  FdSamplerConfig fd_cfg;
  fd_cfg.mode = parse_fd_mode(a.fd_mode);
  fd_cfg.stack_size = a.stack_size;
  fd_cfg.kappa = {a.kappa_range.at(0), a.kappa_range.at(1)};
  fd_cfg.validate();
  if (a.count < 1) throw std::invalid_argument("sample-fds: --count must be >= 1");
  const BlurSamplerConfig blur_cfg;
  json config = {{"fd_sampler", io::to_json(fd_cfg)}, {"blur_sampler", io::to_json(blur_cfg)}, {"count", a.count}};
  std::optional<DepthMap> depth;
  if (!a.depth.empty()) {
    config["depth"] = input_ref(a.depth);
    depth = io::read_depth_pfm(a.depth);
  }
  Outputs out(out_dir, "sample-fds", config, a.seed);
  SeededRng rng(a.seed);
  json draws = json::array();
  for (int i = 0; i < a.count; ++i) {
    const auto s = sample_stack(depth ? &*depth : nullptr, fd_cfg, blur_cfg, rng);
    draws.push_back({{"focus_distances_m", s.focus_distances_m},
                     {"kappa", s.kappa},
                     {"near_m", s.bounds.near_m},
                     {"far_m", s.bounds.far_m},
                     {"source", to_string(s.bounds.source)},
                     {"psf_shape_p", s.psf_shape_p},
                     {"f_number", s.f_number}});
    std::ostringstream line;
    for (double d : s.focus_distances_m) line << csv_number(d) << " ";
    std::cout << line.str() << "\n";
  }
  out.finish("fds.json", {{"draws", draws}});
  return 0;
}

// ---------------------------------------------------------------- dfo

struct DfoArgs {
  std::string stack_json;
  int window = kDefaultFocusWindow;
  bool no_refine = false;
  std::string refine_axis = "disparity";
};

RefineAxis parse_refine_axis(const std::string& s) {
  if (s == "disparity") return RefineAxis::disparity;
  if (s == "log-disparity") return RefineAxis::log_disparity;
  throw std::invalid_argument("unknown refine axis '" + s + "' (expected disparity or log-disparity)");
}

FocusStack load_stack(const fs::path& manifest) {
  const auto m = io::read_json(manifest);
  const auto& r = m.at("results");
  FocusStack stack;
  stack.lens = io::lens_from_json(r.at("lens"));
  stack.focus_distances_m = r.at("focus_distances_m").get<std::vector<double>>();
  for (const auto& name : r.at("images")) stack.images.push_back(io::read_png(manifest.parent_path() / name.get<std::string>()));
  stack.validate();
  return stack;
}

int run_dfo(const DfoArgs& a, const fs::path& out_dir) {
  DfoOptions opts;
  opts.window_radius_px = a.window;
  opts.refine = !a.no_refine;
  opts.refine_axis = parse_refine_axis(a.refine_axis);
  const json config = {{"stack", input_ref(a.stack_json)},
                       {"window_radius_px", a.window},
                       {"refine", opts.refine},
                       {"refine_axis", a.refine_axis},
                       {"texture_floor_rel", opts.texture_floor_rel}};
  Outputs out(out_dir, "dfo", config, std::nullopt);
  const auto stack = load_stack(a.stack_json);
  const auto depth = estimate_depth(stack, opts);
  out.write("depth.pfm", io::encode_pfm(io::depth_to_grid(depth)));
  log("dfo", std::to_string(depth.valid_count()) + " of " + std::to_string(depth.pixel_count()) +
                 " pixels above the texture floor");
  out.finish("dfo.json", {{"depth", "depth.pfm"}, {"valid_pixels", depth.valid_count()}});
  return 0;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
  std::string pred;
  std::string gt;
  std::vector<double> thresholds = default_thresholds();
  double lambda = LossConfig{}.silog_lambda;
  int scales = LossConfig{}.grad_scales;
  bool csv = false;
  std::string scene = "scene";
};

int run_evaluate(const EvaluateArgs& a, const fs::path& out_dir) {
  LossConfig loss;
  loss.silog_lambda = a.lambda;
  loss.grad_scales = a.scales;
  const json config = {{"pred", input_ref(a.pred)},
                       {"gt", input_ref(a.gt)},
                       {"thresholds", a.thresholds},
                       {"silog_lambda", a.lambda},
                       {"grad_scales", a.scales},
                       {"scene", a.scene}};
  Outputs out(out_dir, "evaluate", config, std::nullopt);
  const auto report = compute_metrics(io::read_depth_pfm(a.pred), io::read_depth_pfm(a.gt), a.thresholds, loss);
  const std::string table = io::metrics_table(report);
  std::cout << table;
  out.write("metrics.txt", table);
  if (a.csv) {
    const json r = io::to_json(report);
    std::string header = "scene";
    std::string row = a.scene;
    for (const char* key : {"abs_rel", "sq_rel", "mse", "rmse"}) {
      header += std::string(",") + key;
      row += "," + csv_number(r.at(key).get<double>());
    }
    for (const auto& [t, v] : report.delta) {
      header += "," + io::threshold_key(t);
      row += "," + csv_number(v);
    }
    for (const char* key : {"silog", "grad_match", "total_loss"}) {
      header += std::string(",") + key;
      row += "," + csv_number(r.at(key).get<double>());
    }
    header += ",n_valid";
    row += "," + std::to_string(report.n_valid);
    out.write("metrics.csv", header + "\n" + row + "\n");
  }
  out.finish("metrics.json", io::to_json(report));
  return 0;
}

// ---------------------------------------------------------------- sweep

struct SweepArgs {
  std::string rgb;
  std::string depth;
  LensFlags lens;
  std::uint64_t seed = 0;
  std::vector<double> f_numbers{1.4, 2.8, 4.0};
  std::vector<int> stack_sizes{3, 5, 9};
  std::vector<double> kappas{0.0, 0.5, 1.0};
  std::string fd_mode = "percentile";
  double psf_p = 2.0;
  std::string mode = "reference";
  int layers = 64;
  std::string refine_axis = "disparity";
};

int run_sweep(const SweepArgs& a, const fs::path& out_dir) {
  const ThinLensConfig base = a.lens.get();
  const SynthesisOptions synth_opts{parse_synthesis_mode(a.mode), a.layers, kDefaultPsfCutoff};
  DfoOptions dfo_opts;
  dfo_opts.refine_axis = parse_refine_axis(a.refine_axis);
  FdSamplerConfig fd_cfg;
  fd_cfg.mode = parse_fd_mode(a.fd_mode);
  const json config = {{"rgb", input_ref(a.rgb)},
                       {"depth", input_ref(a.depth)},
                       {"lens", io::to_json(base)},
                       {"f_numbers", a.f_numbers},
                       {"stack_sizes", a.stack_sizes},
                       {"kappas", a.kappas},
                       {"fd_mode", a.fd_mode},
                       {"psf_shape_p", a.psf_p},
                       {"mode", a.mode},
                       {"layers", a.layers},
                       {"refine_axis", a.refine_axis}};
  Outputs out(out_dir, "sweep", config, a.seed);
  const RgbImage rgb = io::read_png(a.rgb);
  const DepthMap gt = load_depth(a.depth, "sweep");

  std::string csv = "f_number,stack_size,kappa,fd_source,near_m,far_m,abs_rel,rmse,delta_1.25,silog,n_valid\n";
  json rows = json::array();
  const SeededRng root(a.seed);
  std::uint64_t index = 0;
  for (double n : a.f_numbers)
    for (int s : a.stack_sizes)
      for (double kappa : a.kappas) {
        SeededRng rng = root.fork(index++);
        FdSamplerConfig cfg = fd_cfg;
        cfg.stack_size = s;
        const auto bounds = sample_fd_bounds(&gt, cfg, rng);
        const auto fds = interpolate_fds(bounds.near_m, bounds.far_m, s, kappa);
        const auto lens = ThinLensConfig::make(base.focal_length_m, n, base.pixel_pitch_m, base.principal_point);
        const auto stack = synthesize_stack(rgb, gt, lens, fds, a.psf_p, synth_opts);
        const auto pred = estimate_depth(stack, dfo_opts);
        json row = {{"f_number", n},       {"stack_size", s},       {"kappa", kappa},
                    {"fd_source", to_string(bounds.source)},    {"near_m", bounds.near_m},
                    {"far_m", bounds.far_m}};
        if (pred.valid_count() == 0) {
          row["error"] = "no textured pixels";
          csv += csv_number(n) + "," + std::to_string(s) + "," + csv_number(kappa) + "," + to_string(bounds.source) +
                 "," + csv_number(bounds.near_m) + "," + csv_number(bounds.far_m) + ",,,,,0\n";
        } else {
          const auto m = compute_metrics(pred, gt, {1.25});
          row["metrics"] = io::to_json(m);
          csv += csv_number(n) + "," + std::to_string(s) + "," + csv_number(kappa) + "," + to_string(bounds.source) +
                 "," + csv_number(bounds.near_m) + "," + csv_number(bounds.far_m) + "," + csv_number(m.abs_rel) + "," +
                 csv_number(m.rmse) + "," + csv_number(m.delta.at(1.25)) + "," + csv_number(m.silog) + "," +
                 std::to_string(m.n_valid) + "\n";
          log("sweep", "N=" + short_number(n) + " S=" + std::to_string(s) + " kappa=" + short_number(kappa) +
                           " AbsRel=" + short_number(m.abs_rel));
        }
        rows.push_back(row);
      }
  out.write("sweep.csv", csv);
  out.finish("sweep.json", {{"rows", rows}, {"csv", "sweep.csv"}});
  return 0;
}

// ---------------------------------------------------------------- simulate-sweep

struct SimulateSweepArgs {
  std::uint64_t seed = 0;
  int frames = sim::RoomSweepConfig{}.frames;
  int floaters_per_frame = sim::RoomSweepConfig{}.floaters_per_frame;
  double range_noise_m = sim::RoomSweepConfig{}.range_noise_m;
};

int run_simulate_sweep(const SimulateSweepArgs& a, const fs::path& out_dir) {
  sim::RoomSweepConfig cfg;
  cfg.seed = a.seed;
  cfg.frames = a.frames;
  cfg.floaters_per_frame = a.floaters_per_frame;
  cfg.range_noise_m = a.range_noise_m;
  if (cfg.frames < 1) throw std::invalid_argument("simulate-sweep: --frames must be >= 1");
  const json config = {{"frames", cfg.frames},
                       {"floaters_per_frame", cfg.floaters_per_frame},
                       {"floater_frames", {cfg.floater_first_frame, cfg.floater_last_frame}},
                       {"range_noise_m", cfg.range_noise_m}};
  Outputs out(out_dir, "simulate-sweep", config, a.seed);
  const auto sweep = sim::simulate_room_sweep(cfg);
  json frames = json::array();
  json poses = json::array();
  for (std::size_t i = 0; i < sweep.frames.size(); ++i) {
    std::ostringstream name;
    name << "frame_" << std::setw(3) << std::setfill('0') << i << ".ply";
    out.write(name.str(), io::encode_ply(sweep.frames[i], out.ply_comments()));
    frames.push_back(name.str());
    poses.push_back(io::to_json(sweep.sensor_to_world[i]));
  }
  log("simulate-sweep", std::to_string(sweep.frames.size()) + " frames, " + std::to_string(sweep.floaters) +
                            " labeled floaters (intensity 1)");
  out.finish("sweep_sim.json", {{"frames", frames}, {"sensor_to_world", poses}, {"floaters", sweep.floaters}});
  return 0;
}

// ---------------------------------------------------------------- aggregate

struct AggregateArgs {
  std::vector<std::string> frames;
  std::string frames_dir;
  bool no_filter = false;
  FilterParams filter;
  IcpParams icp = AggregateOptions{}.icp;
  bool labels = false;
};

int run_aggregate(const AggregateArgs& a, const fs::path& out_dir) {
  std::vector<fs::path> paths(a.frames.begin(), a.frames.end());
  if (!a.frames_dir.empty()) {
    for (const auto& e : fs::directory_iterator(a.frames_dir))
      if (e.is_regular_file() && e.path().extension() == ".ply") paths.push_back(e.path());
    std::sort(paths.begin() + static_cast<std::ptrdiff_t>(a.frames.size()), paths.end());
  }
  if (paths.empty()) throw std::invalid_argument("aggregate: no input frames (use --frames or --frames-dir)");

  AggregateOptions opts;
  opts.filtering = !a.no_filter;
  opts.filter = a.filter;
  opts.icp = a.icp;
  json inputs = json::array();
  for (const auto& p : paths) inputs.push_back(input_ref(p));
  const json config = {{"frames", inputs},
                       {"filtering", opts.filtering},
                       {"filter", {{"alpha", opts.filter.alpha},
                                   {"k_neighbors", opts.filter.k_neighbors},
                                   {"warmup_frames", opts.filter.warmup_frames},
                                   {"interval_frames", opts.filter.interval_frames}}},
                       {"icp", {{"max_iterations", opts.icp.max_iterations},
                                {"max_correspondence_distance", opts.icp.max_correspondence_distance},
                                {"tolerance", opts.icp.tolerance},
                                {"voxel_size", opts.icp.voxel_size}}}};
  Outputs out(out_dir, "aggregate", config, std::nullopt);

  std::vector<PointCloud> frames;
  frames.reserve(paths.size());
  for (const auto& p : paths) frames.push_back(io::read_ply(p));
  const auto result = aggregate(frames, opts);

  json events = json::array();
  for (const auto& e : result.filter_events) {
    log("aggregate", "frame " + std::to_string(e.frame) + ": density filter removed " + std::to_string(e.removed) +
                         " of " + std::to_string(e.before) + " points");
    events.push_back({{"frame", e.frame}, {"before", e.before}, {"removed", e.removed}});
  }
  log("aggregate", "filter removed " + std::to_string(result.removed_total()) + " points in total; " +
                       std::to_string(result.cloud.size()) + " points remain");
  json transforms = json::array();
  for (const auto& t : result.transforms) transforms.push_back(io::to_json(t));
  json results = {{"cloud", "aggregated.ply"},
                  {"points", result.cloud.size()},
                  {"removed_total", result.removed_total()},
                  {"filter_events", events},
                  {"icp_transforms", transforms}};
  if (a.labels) {
    std::size_t in_structure = 0;
    std::size_t in_floaters = 0;
    for (const auto& f : frames)
      for (float v : f.intensity) (v == sim::kFloaterLabel ? in_floaters : in_structure) += 1;
    std::size_t out_structure = 0;
    std::size_t out_floaters = 0;
    for (float v : result.cloud.intensity) (v == sim::kFloaterLabel ? out_floaters : out_structure) += 1;
    results["labels"] = {{"floaters_in", in_floaters},
                         {"floaters_removed", in_floaters - out_floaters},
                         {"structure_in", in_structure},
                         {"structure_removed", in_structure - out_structure}};
    log("aggregate", "labeled floaters removed: " + std::to_string(in_floaters - out_floaters) + " of " +
                         std::to_string(in_floaters) + "; structure removed: " +
                         std::to_string(in_structure - out_structure) + " of " + std::to_string(in_structure));
  }
  out.write("aggregated.ply", io::encode_ply(result.cloud, out.ply_comments()));
  out.finish("aggregate.json", results);
  return 0;
}

// ---------------------------------------------------------------- project

struct ProjectArgs {
  std::string cloud;
  std::string intrinsics;
  std::string lidar_from_world;
  std::string camera_from_lidar;
  int splat = 3;
};

int run_project(const ProjectArgs& a, const fs::path& out_dir) {
  json config = {{"cloud", input_ref(a.cloud)}, {"intrinsics", input_ref(a.intrinsics)}, {"splat_radius_px", a.splat}};
  if (!a.lidar_from_world.empty()) config["lidar_from_world"] = input_ref(a.lidar_from_world);
  if (!a.camera_from_lidar.empty()) config["camera_from_lidar"] = input_ref(a.camera_from_lidar);
  Outputs out(out_dir, "project", config, std::nullopt);

  const auto cam = io::camera_from_json(io::read_json(a.intrinsics));
  PointCloud cloud = io::read_ply(a.cloud);
  if (!a.lidar_from_world.empty() && !a.camera_from_lidar.empty()) {
    cloud = chain_to_camera(cloud, io::transform_from_json(io::read_json(a.camera_from_lidar)),
                            io::transform_from_json(io::read_json(a.lidar_from_world)));
  } else if (!a.lidar_from_world.empty() || !a.camera_from_lidar.empty()) {
    const auto t = io::transform_from_json(
        io::read_json(a.camera_from_lidar.empty() ? a.lidar_from_world : a.camera_from_lidar));
    if (t.source != cloud.frame)
      throw std::invalid_argument("project: transform source '" + t.source + "' does not match cloud frame '" +
                                  cloud.frame + "'");
    cloud = t.apply(cloud);
    cloud.frame = t.target;
  }
  if (cloud.empty()) log("project", "warning: cloud is empty; every pixel of the depth map is invalid");
  const auto depth = project_zbuffer(cloud, cam.k, cam.width, cam.height, a.splat);
  out.write("depth.pfm", io::encode_pfm(io::depth_to_grid(depth)));
  log("project", std::to_string(depth.valid_count()) + " of " + std::to_string(depth.pixel_count()) +
                     " pixels received a depth");
  out.finish("project.json",
             {{"depth", "depth.pfm"}, {"points", cloud.size()}, {"valid_pixels", depth.valid_count()}});
  return 0;
}

// ---------------------------------------------------------------- serve-cleanup

struct ServeArgs {
  std::string cloud;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string journal;
};

int run_serve(const ServeArgs& a, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  const fs::path journal = a.journal.empty() ? out_dir / "session.journal" : fs::path(a.journal);
  service::CleanupSession session(io::read_ply(a.cloud), journal);
  service::CleanupServer server(session, out_dir);

  // Signals are taken synchronously by this thread; the server runs beside it.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  int port = a.port;
  if (port == 0) {
    port = server.bind_any(a.host);
    if (port <= 0) throw std::runtime_error("serve-cleanup: cannot bind " + a.host);
  } else if (!server.bind(a.host, port)) {
    throw std::runtime_error("serve-cleanup: cannot bind " + a.host + ":" + std::to_string(port));
  }
  std::thread worker([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  std::cout << "listening on http://" << a.host << ":" << port << " (" << session.id() << ", "
            << session.info().points << " points)" << std::endl;
  int sig = 0;
  sigwait(&set, &sig);
  log("serve-cleanup", "shutting down");
  server.stop();
  worker.join();
  if (session.info().dirty) log("serve-cleanup", "warning: unsaved edits (see the journal at " + journal.string() + ")");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"focuskit: depth-from-focus data synthesis, evaluation and Lidar ground-truth tools"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));
  std::string out_dir = default_output_dir().string();
  auto add_out = [&](CLI::App* sub) {
    sub->add_option("-o,--out", out_dir, "Output directory (default: $FOCUSKIT_OUTPUT_DIR or ./focuskit_out)");
  };

  MakeSceneArgs scene;
  auto* c_scene = app.add_subcommand("make-scene", "Write a textured two-plane RGB/depth demo pair");
  c_scene->add_option("--seed", scene.seed, "Random seed")->required();
  c_scene->add_option("--width", scene.width)->capture_default_str();
  c_scene->add_option("--height", scene.height)->capture_default_str();
  c_scene->add_option("--near", scene.near_m, "Near plane depth (m)")->capture_default_str();
  c_scene->add_option("--far", scene.far_m, "Far plane depth (m)")->capture_default_str();
  add_out(c_scene);

  SynthesizeArgs syn;
  auto* c_syn = app.add_subcommand("synthesize", "Render a focus stack from an RGB image and metric depth");
  c_syn->add_option("--rgb", syn.rgb, "Input RGB PNG")->required()->check(CLI::ExistingFile);
  c_syn->add_option("--depth", syn.depth, "Input depth PFM (meters, 0 = missing)")->required()->check(CLI::ExistingFile);
  c_syn->add_option("--seed", syn.seed, "Random seed")->required();
  c_syn->add_option("--stack-size", syn.stack_size, "Number of images")->capture_default_str();
  c_syn->add_option("--mode", syn.mode, "reference or layered")->capture_default_str();
  c_syn->add_option("--layers", syn.layers, "Depth layers for --mode layered")->capture_default_str();
  c_syn->add_option("--fd-mode", syn.fd_mode, "percentile, automatic or mixed")->capture_default_str();
  c_syn->add_option("--psf-p", syn.psf_p, "Fix the PSF shape exponent instead of sampling it");
  c_syn->add_option("--fixed-f-number", syn.fixed_f_number, "Fix the f-number instead of sampling it");
  c_syn->add_option("--fds", syn.fds, "Explicit focus distances (m) instead of sampling")->delimiter(',');
  c_syn->add_option("--zoom", syn.zoom, "Optical zoom factor in [1, 1.5]")->capture_default_str();
  syn.lens.add(c_syn);
  add_out(c_syn);

  SampleFdsArgs sfd;
  auto* c_sfd = app.add_subcommand("sample-fds", "Draw focus-distance sets and blur parameters");
  c_sfd->add_option("--seed", sfd.seed, "Random seed")->required();
  c_sfd->add_option("--stack-size", sfd.stack_size)->capture_default_str();
  c_sfd->add_option("--fd-mode", sfd.fd_mode, "percentile, automatic or mixed")->capture_default_str();
  c_sfd->add_option("--depth", sfd.depth, "Depth PFM for percentile bounds")->check(CLI::ExistingFile);
  c_sfd->add_option("--count", sfd.count, "Number of draws")->capture_default_str();
  c_sfd->add_option("--kappa-range", sfd.kappa_range, "lo,hi")->delimiter(',')->expected(2);
  add_out(c_sfd);

  DfoArgs dfo;
  auto* c_dfo = app.add_subcommand("dfo", "Classical depth-from-focus on a synthesized stack");
  c_dfo->add_option("--stack", dfo.stack_json, "stack.json written by synthesize")->required()->check(CLI::ExistingFile);
  c_dfo->add_option("--window", dfo.window, "Focus-measure window radius (px)")->capture_default_str();
  c_dfo->add_flag("--no-refine", dfo.no_refine, "Disable sub-stack parabola refinement");
  c_dfo->add_option("--refine-axis", dfo.refine_axis, "disparity or log-disparity")->capture_default_str();
  add_out(c_dfo);

  EvaluateArgs ev;
  auto* c_ev = app.add_subcommand("evaluate", "Depth metrics and losses for a prediction against ground truth");
  c_ev->add_option("--pred", ev.pred, "Predicted depth PFM")->required()->check(CLI::ExistingFile);
  c_ev->add_option("--gt", ev.gt, "Ground-truth depth PFM")->required()->check(CLI::ExistingFile);
  c_ev->add_option("--thresholds", ev.thresholds, "delta thresholds")->delimiter(',')->capture_default_str();
  c_ev->add_option("--lambda", ev.lambda, "SiLog lambda")->capture_default_str();
  c_ev->add_option("--scales", ev.scales, "Gradient-matching scales")->capture_default_str();
  c_ev->add_flag("--csv", ev.csv, "Also write a one-row metrics.csv");
  c_ev->add_option("--scene", ev.scene, "Scene label for the CSV row")->capture_default_str();
  add_out(c_ev);

  SweepArgs sw;
  auto* c_sw = app.add_subcommand("sweep", "Robustness sweep over aperture, focus distribution and stack size");
  c_sw->add_option("--rgb", sw.rgb)->required()->check(CLI::ExistingFile);
  c_sw->add_option("--depth", sw.depth)->required()->check(CLI::ExistingFile);
  c_sw->add_option("--seed", sw.seed, "Random seed")->required();
  c_sw->add_option("--f-numbers", sw.f_numbers)->delimiter(',')->capture_default_str();
  c_sw->add_option("--stack-sizes", sw.stack_sizes)->delimiter(',')->capture_default_str();
  c_sw->add_option("--kappas", sw.kappas, "Focus-distance spacing exponents")->delimiter(',')->capture_default_str();
  c_sw->add_option("--fd-mode", sw.fd_mode, "How near/far bounds are drawn")->capture_default_str();
  c_sw->add_option("--psf-p", sw.psf_p)->capture_default_str();
  c_sw->add_option("--mode", sw.mode)->capture_default_str();
  c_sw->add_option("--layers", sw.layers)->capture_default_str();
  c_sw->add_option("--refine-axis", sw.refine_axis)->capture_default_str();
  sw.lens.add(c_sw);
  add_out(c_sw);

  SimulateSweepArgs sim_args;
  auto* c_sim = app.add_subcommand("simulate-sweep", "Synthetic 120-frame room Lidar sweep with labeled floaters");
  c_sim->add_option("--seed", sim_args.seed, "Random seed")->required();
  c_sim->add_option("--frames", sim_args.frames)->capture_default_str();
  c_sim->add_option("--floaters-per-frame", sim_args.floaters_per_frame)->capture_default_str();
  c_sim->add_option("--range-noise", sim_args.range_noise_m, "Range noise sigma (m)")->capture_default_str();
  add_out(c_sim);

  AggregateArgs agg;
  auto* c_agg = app.add_subcommand("aggregate", "ICP-chain Lidar frames and remove floaters");
  c_agg->add_option("--frames", agg.frames, "Frame PLYs in order")->check(CLI::ExistingFile);
  c_agg->add_option("--frames-dir", agg.frames_dir, "Directory of frame PLYs (sorted by name)")
      ->check(CLI::ExistingDirectory);
  c_agg->add_flag("--no-filter", agg.no_filter, "Disable the density filter");
  c_agg->add_option("--alpha", agg.filter.alpha, "Neighbor radius per meter of range")->capture_default_str();
  c_agg->add_option("--k", agg.filter.k_neighbors, "Minimum neighbors")->capture_default_str();
  c_agg->add_option("--warmup", agg.filter.warmup_frames)->capture_default_str();
  c_agg->add_option("--interval", agg.filter.interval_frames)->capture_default_str();
  c_agg->add_option("--icp-iterations", agg.icp.max_iterations)->capture_default_str();
  c_agg->add_option("--icp-gate", agg.icp.max_correspondence_distance, "Correspondence gate (m)")
      ->capture_default_str();
  c_agg->add_option("--icp-tolerance", agg.icp.tolerance, "RMS change tolerance (m)")->capture_default_str();
  c_agg->add_option("--voxel", agg.icp.voxel_size, "ICP source voxel size (m), 0 = off")->capture_default_str();
  c_agg->add_flag("--labels", agg.labels, "Report removal by intensity label (1 = floater)");
  add_out(c_agg);

  ProjectArgs proj;
  auto* c_proj = app.add_subcommand("project", "Z-buffer a point cloud into a camera depth map");
  c_proj->add_option("--cloud", proj.cloud)->required()->check(CLI::ExistingFile);
  c_proj->add_option("--intrinsics", proj.intrinsics, "JSON {fx, fy, cx, cy, width, height}")
      ->required()
      ->check(CLI::ExistingFile);
  c_proj->add_option("--lidar-from-world", proj.lidar_from_world, "Transform JSON")->check(CLI::ExistingFile);
  c_proj->add_option("--camera-from-lidar", proj.camera_from_lidar, "Transform JSON")->check(CLI::ExistingFile);
  c_proj->add_option("--splat", proj.splat, "Splat radius (px)")->capture_default_str();
  add_out(c_proj);

  ServeArgs srv;
  auto* c_srv = app.add_subcommand("serve-cleanup", "HTTP service for manual point-cloud cleanup");
  c_srv->add_option("--cloud", srv.cloud)->required()->check(CLI::ExistingFile);
  c_srv->add_option("--host", srv.host)->capture_default_str();
  c_srv->add_option("--port", srv.port, "0 picks a free port")->capture_default_str();
  c_srv->add_option("--journal", srv.journal, "Journal path (default <out>/session.journal)");
  add_out(c_srv);

  CLI11_PARSE(app, argc, argv);

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    if (command == "make-scene") return run_make_scene(scene, out_dir);
    if (command == "synthesize") return run_synthesize(syn, out_dir);
    if (command == "sample-fds") return run_sample_fds(sfd, out_dir);
    if (command == "dfo") return run_dfo(dfo, out_dir);
    if (command == "evaluate") return run_evaluate(ev, out_dir);
    if (command == "sweep") return run_sweep(sw, out_dir);
    if (command == "simulate-sweep") return run_simulate_sweep(sim_args, out_dir);
    if (command == "aggregate") return run_aggregate(agg, out_dir);
    if (command == "project") return run_project(proj, out_dir);
    if (command == "serve-cleanup") return run_serve(srv, out_dir);
  } catch (const std::exception& e) {
    std::cerr << "focuskit " << command << ": error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
