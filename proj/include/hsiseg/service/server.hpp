#pragma once

#include <hsiseg/io/clicks_json.hpp>
#include <hsiseg/io/envi.hpp>
#include <hsiseg/service/session.hpp>
#include <hsiseg/synth.hpp>

#include <httplib.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include <sys/socket.h>

#include <filesystem>
#include <optional>
#include <string>

namespace hsiseg::service {

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::string cors_origin = "*";
  std::optional<std::filesystem::path> static_dir;
  std::chrono::seconds idle_timeout = std::chrono::minutes(30);
  PipelineConfig pipeline{};
};

inline int http_status(Errc code) {
  switch (code) {
    case Errc::not_found: return 404;
    case Errc::conflict: return 409;
    case Errc::out_of_range:
    case Errc::dimension_mismatch:
    case Errc::numeric: return 422;
    case Errc::invalid_argument:
    case Errc::format: return 400;
    case Errc::io: return 500;
  }
  return 500;
}

inline nlohmann::json session_metadata(const Session& s) {
  nlohmann::json methods = nlohmann::json::array();
  for (auto m : s.methods()) methods.push_back(to_string(m));
  const auto& wl = s.cube().wavelengths();
  const auto snap = s.snapshot();
  nlohmann::json clicks = nlohmann::json::array();
  for (const auto& c : snap->clicks) clicks.push_back(io::to_json(c));
  return {{"id", s.id()},
          {"height", s.cube().height()},
          {"width", s.cube().width()},
          {"bands", s.cube().bands()},
          {"wavelength_range", {wl.front(), wl.back()}},
          {"methods", methods},
          {"external_rgb", s.has_external_rgb()},
          {"clicks", clicks},
          {"count", snap->clicks.size()},
          {"state_hash", hex64(snap->state_hash)}};
}

inline SessionSource session_source_from_json(const nlohmann::json& body) {
  if (!body.is_object()) fail(Errc::invalid_argument, "request body must be a JSON object");
  SessionSource src{HyperCube(1, 1, 1, {1.0}, {0.0f}), std::nullopt, ""};
  if (body.contains("scene")) {
    auto scene = generate_scene(scene_spec_from_json(body.at("scene")));
    src.cube = std::move(scene.first);
    src.origin = "scene";
  } else if (body.contains("cube_path") && body.at("cube_path").is_string()) {
    const auto path = body.at("cube_path").get<std::string>();
    src.cube = io::load_cube(path);
    src.origin = path;
  } else {
    fail(Errc::invalid_argument, "body needs 'cube_path' or 'scene'");
  }
  if (body.contains("rgb_map_path")) {
    if (!body.at("rgb_map_path").is_string()) fail(Errc::invalid_argument, "'rgb_map_path' must be a string");
    src.external_rgb = io::load_probability_map(body.at("rgb_map_path").get<std::string>());
  }
  return src;
}

/// HTTP front end over a SessionStore.
class Server {
 public:
  explicit Server(ServerOptions options)
      : options_(std::move(options)), store_(options_.pipeline, options_.idle_timeout) {
    // The library default (SO_REUSEPORT) would let two servers share a port.
    http_.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    routes();
  }

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds the listening socket; throws Errc::io if the port is taken.
  int bind() {
    if (options_.port == 0) {
      port_ = http_.bind_to_any_port(options_.host);
      if (port_ < 0) fail(Errc::io, "could not bind any port on " + options_.host);
    } else {
      if (!http_.bind_to_port(options_.host, options_.port))
        fail(Errc::io, "could not bind " + options_.host + ":" + std::to_string(options_.port) +
                           " (port in use or not permitted)");
      port_ = options_.port;
    }
    return port_;
  }

  /// Blocks until stop().
  void run() {
    spdlog::info("serving on http://{}:{}", options_.host, port_);
    http_.listen_after_bind();
  }

  void stop() { http_.stop(); }
  void wait_until_ready() const { http_.wait_until_ready(); }
  int port() const noexcept { return port_; }
  SessionStore& store() noexcept { return store_; }

 private:
  using Req = httplib::Request;
  using Res = httplib::Response;

  static void send_json(Res& res, int status, const nlohmann::json& j) {
    res.status = status;
    res.set_content(j.dump(), "application/json");
  }

  static void send_error(Res& res, int status, std::string_view code, const std::string& message) {
    send_json(res, status, {{"code", code}, {"message", message}});
  }

  template <class Fn>
  static void guarded(Res& res, Fn&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      send_error(res, http_status(e.code()), to_string(e.code()), e.what());
    } catch (const nlohmann::json::exception& e) {
      send_error(res, 400, "invalid_argument", std::string("invalid JSON: ") + e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "internal", e.what());
    }
  }

  std::shared_ptr<Session> session_of(const Req& req) { return store_.find(req.path_params.at("id")); }

  static Method method_of(const Req& req) {
    if (!req.has_param("method")) fail(Errc::invalid_argument, "query parameter 'method' is required");
    return require_method(req.get_param_value("method"));
  }

  void routes() {
    http_.set_pre_routing_handler([this](const Req& req, Res& res) {
      res.set_header("Access-Control-Allow-Origin", options_.cors_origin);
      res.set_header("Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.set_header("Access-Control-Expose-Headers",
                     "X-Map-Min, X-Map-Max, X-Map-Mean, X-State-Hash, X-Click-Count");
      if (req.method == "OPTIONS") {
        res.status = 204;
        return httplib::Server::HandlerResponse::Handled;
      }
      return httplib::Server::HandlerResponse::Unhandled;
    });
    http_.set_error_handler([](const Req&, Res& res) {
      if (res.body.empty()) send_error(res, res.status, "not_found", "no such route");
    });

    http_.Get("/health", [](const Req&, Res& res) { send_json(res, 200, {{"status", "ok"}}); });

    http_.Post("/sessions", [this](const Req& req, Res& res) {
      guarded(res, [&] {
        auto session = store_.create(session_source_from_json(nlohmann::json::parse(req.body)));
        spdlog::info("session {} created from {}", session->id(), session->origin());
        send_json(res, 201, session_metadata(*session));
      });
    });

    http_.Get("/sessions/:id", [this](const Req& req, Res& res) {
      guarded(res, [&] { send_json(res, 200, session_metadata(*session_of(req))); });
    });

    http_.Delete("/sessions/:id", [this](const Req& req, Res& res) {
      guarded(res, [&] {
        if (!store_.erase(req.path_params.at("id"))) fail(Errc::not_found, "unknown session");
        res.status = 204;
      });
    });

    http_.Get("/sessions/:id/rgb", [this](const Req& req, Res& res) {
      guarded(res, [&] {
        const auto s = session_of(req);
        const auto& png = s->rgb_png();
        res.set_content(reinterpret_cast<const char*>(png.data()), png.size(), "image/png");
      });
    });

    http_.Post("/sessions/:id/clicks", [this](const Req& req, Res& res) {
      guarded(res, [&] {
        const auto s = session_of(req);
        const auto snap = s->add_click(io::click_from_json(nlohmann::json::parse(req.body)));
        send_json(res, 200, {{"count", snap->clicks.size()}, {"state_hash", hex64(snap->state_hash)}});
      });
    });

    http_.Delete("/sessions/:id/clicks/last", [this](const Req& req, Res& res) {
      guarded(res, [&] {
        const auto snap = session_of(req)->undo_click();
        send_json(res, 200, {{"count", snap->clicks.size()}, {"state_hash", hex64(snap->state_hash)}});
      });
    });

    http_.Get("/sessions/:id/map", [this](const Req& req, Res& res) {
      guarded(res, [&] {
        const auto s = session_of(req);
        const Method method = method_of(req);
        std::shared_ptr<const MapPayload> payload;
        if (req.has_param("threshold")) {
          const auto text = req.get_param_value("threshold");
          std::size_t used = 0;
          double t = 0;
          try {
            t = std::stod(text, &used);
          } catch (const std::exception&) {
            used = 0;
          }
          if (used != text.size() || text.empty()) fail(Errc::invalid_argument, "threshold must be a number");
          payload = s->get_map(method, MapFormat::mask, t);
        } else {
          payload = s->get_map(method, MapFormat::png16);
        }
        send_payload(res, *payload);
      });
    });

    http_.Get("/sessions/:id/map.raw", [this](const Req& req, Res& res) {
      guarded(res, [&] { send_payload(res, *session_of(req)->get_map(method_of(req), MapFormat::raw)); });
    });

    if (options_.static_dir) {
      if (!http_.set_mount_point("/", options_.static_dir->string()))
        fail(Errc::not_found, "static directory not found: " + options_.static_dir->string());
    }
  }

  static void send_payload(Res& res, const MapPayload& p) {
    res.set_header("X-Map-Min", io::format_double(p.stats.min));
    res.set_header("X-Map-Max", io::format_double(p.stats.max));
    res.set_header("X-Map-Mean", io::format_double(p.stats.mean));
    res.set_header("X-State-Hash", hex64(p.state_hash));
    res.set_header("X-Click-Count", std::to_string(p.clicks));
    res.set_content(reinterpret_cast<const char*>(p.body.data()), p.body.size(), p.content_type);
  }

  ServerOptions options_;
  SessionStore store_;
  httplib::Server http_;
  int port_ = -1;
};

}  // namespace hsiseg::service
