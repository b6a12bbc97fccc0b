#pragma once

// HTTP front end for a CleanupSession.
//
//   GET  /session          session summary (JSON)
//   GET  /cloud            current cloud as binary PLY, ?max_points=N decimates
//   GET  /render           z-buffer preview as PFM; query: fx fy cx cy width height
//                          [pose = 16 comma-separated row-major values] [splat]
//   POST /edit             {polygon, depth_range, view} -> {removed, points, edits}
//   POST /undo             pops the last edit; 409 when the log is empty
//   POST /save             {stem?} -> writes PLY + edit log under the output dir

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "focuskit/io/json_io.hpp"
#include "focuskit/io/pfm.hpp"
#include "focuskit/io/ply.hpp"
#include "focuskit/projection.hpp"
#include "focuskit/service/cleanup_session.hpp"

// After Eigen: httplib pulls in <resolv.h>, whose _res macro breaks Eigen headers.
#include <httplib.h>

namespace focuskit::service {

/// Every `stride`-th point so that at most max_points remain.
inline PointCloud decimate(const PointCloud& cloud, std::size_t max_points) {
  if (max_points == 0 || cloud.size() <= max_points) return cloud;
  const std::size_t stride = (cloud.size() + max_points - 1) / max_points;
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < cloud.size(); i += stride) keep.push_back(i);
  return cloud.select(keep);
}

inline RigidTransform parse_pose(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) v.push_back(std::stod(item));
  if (v.size() != 16) throw std::invalid_argument("pose: expected 16 comma-separated values");
  Eigen::Matrix4d m;
  for (int i = 0; i < 16; ++i) m(i / 4, i % 4) = v[static_cast<std::size_t>(i)];
  return RigidTransform::from_matrix(m, "cloud", "camera", 1e-6);
}

class CleanupServer {
 public:
  CleanupServer(CleanupSession& session, std::filesystem::path output_dir)
      : session_(session), output_dir_(std::move(output_dir)) {
    routes();
  }

  /// Binds to an ephemeral port on `host` and returns it.
  int bind_any(const std::string& host = "127.0.0.1") { return server_.bind_to_any_port(host); }
  bool bind(const std::string& host, int port) { return server_.bind_to_port(host, port); }
  bool listen_after_bind() { return server_.listen_after_bind(); }
  void stop() { server_.stop(); }
  void wait_until_ready() const { server_.wait_until_ready(); }

 private:
  static void reply_json(httplib::Response& res, const io::json& j, int status = 200) {
    res.status = status;
    res.set_content(j.dump(), "application/json");
  }

  static void reply_error(httplib::Response& res, int status, const std::string& msg) {
    reply_json(res, {{"error", msg}}, status);
  }

  io::json info_json() const {
    const auto s = session_.info();
    return {{"id", s.id}, {"original_points", s.original_points}, {"points", s.points}, {"edits", s.edits},
            {"dirty", s.dirty}};
  }

  void routes() {
    server_.Get("/session", [this](const httplib::Request&, httplib::Response& res) { reply_json(res, info_json()); });

    server_.Get("/cloud", [this](const httplib::Request& req, httplib::Response& res) {
      std::size_t max_points = 0;
      if (req.has_param("max_points")) max_points = std::stoul(req.get_param_value("max_points"));
      const auto snap = session_.snapshot();
      res.set_content(io::encode_ply(decimate(*snap, max_points)), "application/octet-stream");
    });

    server_.Get("/render", [this](const httplib::Request& req, httplib::Response& res) {
      try {
        auto num = [&](const char* key) { return std::stod(req.get_param_value(key)); };
        for (const char* key : {"fx", "fy", "cx", "cy", "width", "height"})
          if (!req.has_param(key)) return reply_error(res, 400, std::string("render: missing parameter ") + key);
        const Intrinsics k{num("fx"), num("fy"), num("cx"), num("cy")};
        const int w = std::stoi(req.get_param_value("width"));
        const int h = std::stoi(req.get_param_value("height"));
        const int splat = req.has_param("splat") ? std::stoi(req.get_param_value("splat")) : 1;
        if (w <= 0 || h <= 0 || w > 8192 || h > 8192) return reply_error(res, 400, "render: bad image size");
        const RigidTransform pose =
            req.has_param("pose") ? parse_pose(req.get_param_value("pose")) : RigidTransform::identity("cloud", "camera");
        const auto snap = session_.snapshot();
        PointCloud cam = pose.apply(*snap);
        res.set_content(io::encode_pfm(io::depth_to_grid(project_zbuffer(cam, k, w, h, splat))),
                        "application/octet-stream");
      } catch (const std::exception& e) {
        reply_error(res, 400, e.what());
      }
    });

    server_.Post("/edit", [this](const httplib::Request& req, httplib::Response& res) {
      Edit edit;
      try {
        edit = edit_from_json(io::json::parse(req.body));
      } catch (const std::exception& e) {
        return reply_error(res, 400, e.what());
      }
      try {
        const std::size_t removed = session_.apply_edit(edit);
        auto j = info_json();
        j["removed"] = removed;
        reply_json(res, j);
      } catch (const std::exception& e) {
        reply_error(res, 500, e.what());
      }
    });

    server_.Post("/undo", [this](const httplib::Request&, httplib::Response& res) {
      try {
        session_.undo();
        reply_json(res, info_json());
      } catch (const SessionStateError& e) {
        reply_error(res, 409, e.what());
      } catch (const std::exception& e) {
        reply_error(res, 500, e.what());
      }
    });

    server_.Post("/save", [this](const httplib::Request& req, httplib::Response& res) {
      std::string stem = "cleaned";
      try {
        if (!req.body.empty()) stem = io::json::parse(req.body).value("stem", stem);
      } catch (const std::exception& e) {
        return reply_error(res, 400, e.what());
      }
      if (stem.empty() || stem.find('/') != std::string::npos || stem.find("..") != std::string::npos)
        return reply_error(res, 400, "save: invalid stem");
      try {
        const auto [ply, log] = session_.save(output_dir_, stem);
        auto j = info_json();
        j["ply"] = ply.string();
        j["edit_log"] = log.string();
        reply_json(res, j);
      } catch (const std::exception& e) {
        reply_error(res, 500, e.what());
      }
    });
  }

  CleanupSession& session_;
  std::filesystem::path output_dir_;
  httplib::Server server_;
};

}  // namespace focuskit::service
