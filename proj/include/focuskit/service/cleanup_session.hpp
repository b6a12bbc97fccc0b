#pragma once

// Editing session over one point cloud. The current cloud is always the
// fold of the edit log over the original; undo pops the log and replays.
// Mutations are serialized; readers take immutable snapshots.

#include <cstdio>
#include <filesystem>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <unistd.h>

#include "focuskit/io/atomic_file.hpp"
#include "focuskit/io/json_io.hpp"
#include "focuskit/io/ply.hpp"
#include "focuskit/projection.hpp"

namespace focuskit::service {

using io::json;

struct Edit {
  std::vector<Pixel2> polygon;
  DepthRange depth_range;
  CameraView view;
};

/// Raised for operations that are invalid in the current session state.
class SessionStateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline json to_json(const Edit& e) {
  json poly = json::array();
  for (const auto& p : e.polygon) poly.push_back({p.u, p.v});
  json range = {e.depth_range.z_min, std::isfinite(e.depth_range.z_max) ? json(e.depth_range.z_max) : json(nullptr)};
  const auto& k = e.view.intrinsics;
  return {{"polygon", poly},
          {"depth_range", range},
          {"view", {{"intrinsics", {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}}},
                    {"cloud_to_camera", io::to_json(e.view.cloud_to_camera)}}}};
}

/// Parses an edit request. A null or missing z_max means unbounded; a
/// missing view means identity pose with unit intrinsics.
inline Edit edit_from_json(const json& j) {
  Edit e;
  const auto& poly = j.at("polygon");
  if (!poly.is_array()) throw std::invalid_argument("edit: polygon must be an array");
  for (const auto& p : poly) e.polygon.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  if (e.polygon.size() < 3) throw std::invalid_argument("edit: polygon needs at least 3 vertices");
  if (j.contains("depth_range")) {
    const auto& r = j.at("depth_range");
    e.depth_range.z_min = r.at(0).is_null() ? 0.0 : r.at(0).get<double>();
    e.depth_range.z_max = r.at(1).is_null() ? std::numeric_limits<double>::infinity() : r.at(1).get<double>();
  }
  if (!(e.depth_range.z_min <= e.depth_range.z_max)) throw std::invalid_argument("edit: z_min must be <= z_max");
  if (j.contains("view")) {
    const auto& v = j.at("view");
    const auto& k = v.at("intrinsics");
    e.view.intrinsics = {k.at("fx").get<double>(), k.at("fy").get<double>(), k.at("cx").get<double>(),
                         k.at("cy").get<double>()};
    e.view.intrinsics.validate();
    if (v.contains("cloud_to_camera")) e.view.cloud_to_camera = io::transform_from_json(v.at("cloud_to_camera"));
  }
  return e;
}

struct SessionInfo {
  std::string id;
  std::size_t original_points = 0;
  std::size_t points = 0;
  std::size_t edits = 0;
  bool dirty = false;
};

class CleanupSession {
 public:
  /// `journal` (optional) receives one JSON line per mutation, flushed to
  /// disk before the mutation is acknowledged.
  explicit CleanupSession(PointCloud original, std::optional<std::filesystem::path> journal = std::nullopt)
      : original_(std::make_shared<const PointCloud>(std::move(original))), current_(original_) {
    original_->validate();
    id_ = "session-" + io::hex64(io::fnv1a64(io::encode_ply(*original_)));
    if (journal) {
      journal_ = std::fopen(journal->c_str(), "ab");
      if (!journal_) throw std::runtime_error("cannot open journal " + journal->string());
    }
  }

  CleanupSession(const CleanupSession&) = delete;
  CleanupSession& operator=(const CleanupSession&) = delete;
  ~CleanupSession() {
    if (journal_) std::fclose(journal_);
  }

  const std::string& id() const { return id_; }

  std::shared_ptr<const PointCloud> snapshot() const {
    std::lock_guard lock(mu_);
    return current_;
  }

  std::shared_ptr<const PointCloud> original() const { return original_; }

  std::vector<Edit> edit_log() const {
    std::lock_guard lock(mu_);
    return log_;
  }

  SessionInfo info() const {
    std::lock_guard lock(mu_);
    return {id_, original_->size(), current_->size(), log_.size(), dirty_};
  }

  /// Applies one region removal; returns the number of points removed.
  std::size_t apply_edit(const Edit& edit) {
    if (edit.polygon.size() < 3) throw std::invalid_argument("edit: polygon needs at least 3 vertices");
    std::lock_guard lock(mu_);
    auto next = std::make_shared<const PointCloud>(remove_by_region(*current_, edit.view, edit.polygon, edit.depth_range));
    journal({{"op", "edit"}, {"edit", to_json(edit)}});
    const std::size_t removed = current_->size() - next->size();
    log_.push_back(edit);
    current_ = std::move(next);
    dirty_ = true;
    return removed;
  }

  /// Pops the last edit and rebuilds the cloud from the original.
  std::size_t undo() {
    std::lock_guard lock(mu_);
    if (log_.empty()) throw SessionStateError("undo: edit log is empty");
    std::vector<Edit> shorter(log_.begin(), log_.end() - 1);
    auto rebuilt = std::make_shared<const PointCloud>(replay(*original_, shorter));
    journal({{"op", "undo"}});
    log_ = std::move(shorter);
    current_ = std::move(rebuilt);
    dirty_ = true;
    return current_->size();
  }

  /// Writes <stem>.ply and <stem>.edits.json into `dir`.
  std::pair<std::filesystem::path, std::filesystem::path> save(const std::filesystem::path& dir,
                                                               const std::string& stem = "cleaned") {
    std::lock_guard lock(mu_);
    std::filesystem::create_directories(dir);
    const auto ply = dir / (stem + ".ply");
    const auto log = dir / (stem + ".edits.json");
    json edits = json::array();
    for (const auto& e : log_) edits.push_back(to_json(e));
    io::write_ply(ply, *current_);
    io::write_json(log, {{"session", id_},
                         {"original_points", original_->size()},
                         {"points", current_->size()},
                         {"edits", edits},
                         {"tool_version", kToolVersion}});
    journal({{"op", "save"}, {"path", ply.string()}});
    dirty_ = false;
    return {ply, log};
  }

  static PointCloud replay(const PointCloud& original, const std::vector<Edit>& log) {
    PointCloud cloud = original;
    for (const auto& e : log) cloud = remove_by_region(cloud, e.view, e.polygon, e.depth_range);
    return cloud;
  }

 private:
  void journal(const json& entry) {
    if (!journal_) return;
    const std::string line = entry.dump() + "\n";
    if (std::fwrite(line.data(), 1, line.size(), journal_) != line.size() || std::fflush(journal_) != 0 ||
        ::fsync(::fileno(journal_)) != 0)
      throw std::runtime_error("journal write failed");
  }

  std::shared_ptr<const PointCloud> original_;
  std::shared_ptr<const PointCloud> current_;
  std::vector<Edit> log_;
  bool dirty_ = false;
  std::string id_;
  std::FILE* journal_ = nullptr;
  mutable std::mutex mu_;
};

}  // namespace focuskit::service
