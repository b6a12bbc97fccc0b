#pragma once

// JSON encodings for lens configs, rigid transforms, intrinsics, sampler
// configs, stack metadata and metrics reports.

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>

#include "focuskit/geometry.hpp"
#include "focuskit/io/atomic_file.hpp"
#include "focuskit/metrics.hpp"
#include "focuskit/optics.hpp"
#include "focuskit/projection.hpp"
#include "focuskit/randomization.hpp"
#include "focuskit/version.hpp"

namespace focuskit::io {

using nlohmann::json;

inline json read_json(const std::filesystem::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

inline void write_json(const std::filesystem::path& path, const json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

// ---- lens ----

inline json to_json(const ThinLensConfig& lens) {
  return {{"focal_length_m", lens.focal_length_m},
          {"f_number", lens.f_number},
          {"pixel_pitch_m", lens.pixel_pitch_m},
          {"principal_point", {lens.principal_point.x, lens.principal_point.y}}};
}

inline ThinLensConfig lens_from_json(const json& j) {
  PrincipalPoint pp;
  if (j.contains("principal_point")) {
    const auto& p = j.at("principal_point");
    if (p.is_array()) {
      pp = {p.at(0).get<double>(), p.at(1).get<double>()};
    } else {
      pp = {p.at("x").get<double>(), p.at("y").get<double>()};
    }
  }
  return ThinLensConfig::make(j.at("focal_length_m").get<double>(), j.at("f_number").get<double>(),
                              j.at("pixel_pitch_m").get<double>(), pp);
}

// ---- transforms ----

inline json to_json(const RigidTransform& t) {
  const Eigen::Matrix4d m = t.matrix();
  json rows = json::array();
  for (int r = 0; r < 4; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2), m(r, 3)});
  return {{"matrix", rows}, {"source", t.source}, {"target", t.target}};
}

inline RigidTransform transform_from_json(const json& j) {
  const auto& rows = j.at("matrix");
  if (!rows.is_array() || rows.size() != 4) throw std::invalid_argument("transform: matrix must be 4x4");
  Eigen::Matrix4d m;
  for (int r = 0; r < 4; ++r) {
    const auto& row = rows.at(static_cast<std::size_t>(r));
    if (!row.is_array() || row.size() != 4) throw std::invalid_argument("transform: matrix must be 4x4");
    for (int c = 0; c < 4; ++c) m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  RigidTransform t = RigidTransform::from_matrix(m, j.value("source", std::string("world")),
                                                 j.value("target", std::string("world")), 1e-6);
  return t;
}

// ---- intrinsics ----

struct CameraModel {
  Intrinsics k;
  int width = 0;
  int height = 0;
};

inline json to_json(const CameraModel& c) {
  return {{"fx", c.k.fx}, {"fy", c.k.fy}, {"cx", c.k.cx}, {"cy", c.k.cy}, {"width", c.width}, {"height", c.height}};
}

inline CameraModel camera_from_json(const json& j) {
  CameraModel c;
  c.k = {j.at("fx").get<double>(), j.at("fy").get<double>(), j.at("cx").get<double>(), j.at("cy").get<double>()};
  c.width = j.at("width").get<int>();
  c.height = j.at("height").get<int>();
  c.k.validate();
  if (c.width <= 0 || c.height <= 0) throw std::invalid_argument("intrinsics: width and height must be > 0");
  return c;
}

// ---- sampler configs ----

inline json to_json(const Interval& i) { return json::array({i.lo, i.hi}); }

inline Interval interval_from_json(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

inline json to_json(const FdSamplerConfig& c) {
  return {{"mode", to_string(c.mode)},
          {"percentile_weight", c.percentile_weight},
          {"automatic_weight", c.automatic_weight},
          {"stack_size", c.stack_size},
          {"percentile_bounds", to_json(c.percentile_bounds)},
          {"auto_near", to_json(c.auto_near)},
          {"auto_far_multiplier", to_json(c.auto_far_multiplier)},
          {"kappa", to_json(c.kappa)}};
}

inline FdSamplerConfig fd_sampler_from_json(const json& j) {
  FdSamplerConfig c;
  if (j.contains("mode")) c.mode = parse_fd_mode(j.at("mode").get<std::string>());
  c.percentile_weight = j.value("percentile_weight", c.percentile_weight);
  c.automatic_weight = j.value("automatic_weight", c.automatic_weight);
  c.stack_size = j.value("stack_size", c.stack_size);
  if (j.contains("percentile_bounds")) c.percentile_bounds = interval_from_json(j.at("percentile_bounds"));
  if (j.contains("auto_near")) c.auto_near = interval_from_json(j.at("auto_near"));
  if (j.contains("auto_far_multiplier")) c.auto_far_multiplier = interval_from_json(j.at("auto_far_multiplier"));
  if (j.contains("kappa")) c.kappa = interval_from_json(j.at("kappa"));
  c.validate();
  return c;
}

inline json to_json(const BlurSamplerConfig& c) { return {{"log2_p", to_json(c.log2_p)}, {"f_numbers", c.f_numbers}}; }

// ---- provenance ----

/// Hash of the canonical (sorted-key, compact) dump of a config object.
inline std::string config_hash(const json& config) { return hex64(fnv1a64(config.dump())); }

inline json provenance(const json& config, std::uint64_t seed, bool seeded = true) {
  json p = {{"tool_version", kToolVersion}, {"config_hash", config_hash(config)}};
  p["seed"] = seeded ? json(seed) : json(nullptr);
  return p;
}

// ---- metrics ----

inline std::string threshold_key(double t) {
  std::ostringstream os;
  os << "delta_" << std::setprecision(6) << t;
  return os.str();
}

inline json to_json(const MetricsReport& r) {
  json d = json::object();
  for (const auto& [t, v] : r.delta) d[threshold_key(t)] = v;
  return {{"abs_rel", r.abs_rel}, {"sq_rel", r.sq_rel},         {"mse", r.mse},
          {"rmse", r.rmse},       {"delta", d},                 {"silog", r.silog},
          {"grad_match", r.grad_match}, {"total_loss", r.total_loss}, {"n_valid", r.n_valid}};
}

inline std::string metrics_table(const MetricsReport& r) {
  std::ostringstream os;
  auto row = [&](const std::string& name, double v) {
    os << std::left << std::setw(14) << name << std::right << std::setw(16) << std::setprecision(8) << v << "\n";
  };
  row("abs_rel", r.abs_rel);
  row("sq_rel", r.sq_rel);
  row("mse", r.mse);
  row("rmse", r.rmse);
  for (const auto& [t, v] : r.delta) row(threshold_key(t), v);
  row("silog", r.silog);
  row("grad_match", r.grad_match);
  row("total_loss", r.total_loss);
  os << std::left << std::setw(14) << "n_valid" << std::right << std::setw(16) << r.n_valid << "\n";
  return os.str();
}

}  // namespace focuskit::io
