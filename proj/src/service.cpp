#include "novact/service.hpp"

#include <httplib.h>

#include <charconv>
#include <iostream>

namespace novact {

namespace {

using ojson = nlohmann::ordered_json;

ojson spec_json(const NetworkSpec& s) {
  return {{"fast", s.fast},         {"middle", s.middle},         {"slow", s.slow},
          {"joints", s.joints},     {"units", s.units},           {"pb_dim", s.pb_dim},
          {"tau_fast", s.tau_fast}, {"tau_middle", s.tau_middle}, {"tau_slow", s.tau_slow}};
}

ojson trajectory_json(const JointTrajectory& t) {
  ojson rows = ojson::array();
  for (Eigen::Index i = 0; i < t.steps(); ++i) {
    ojson row = ojson::array();
    for (Eigen::Index j = 0; j < t.joints(); ++j) row.push_back(t.values(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

void ServeConfig::validate() const {
  require(max_steps >= 1, ErrorKind::InvalidArgument, "max steps must be at least 1");
  require(port >= 0 && port <= 65535, ErrorKind::InvalidArgument, "port must be in [0, 65535]");
  require(std::filesystem::exists(checkpoint), ErrorKind::IOError,
          "checkpoint not found: " + checkpoint.string());
}

Response error_response(int status, std::string_view code, std::string_view message) {
  return {status, ojson{{"error", code}, {"message", message}}};
}

Service::Service(Checkpoint checkpoint, std::optional<SweepResult> sweep, int max_steps)
    : checkpoint_(std::move(checkpoint)),
      sweep_(std::move(sweep)),
      classifier_(Classifier::from_checkpoint(
          checkpoint_, sweep_ ? std::optional(sweep_->learned_threshold) : std::nullopt)),
      max_steps_(max_steps) {
  require(max_steps_ >= 1, ErrorKind::InvalidArgument, "max steps must be at least 1");
  require(checkpoint_.params.spec.pb_dim == 2, ErrorKind::InvalidArgument,
          "the explorer needs a 2-D PB space");
}

Service Service::load(const ServeConfig& config) {
  config.validate();
  auto cp = load_checkpoint(config.checkpoint);
  std::optional<SweepResult> sweep;
  if (config.sweep) sweep = load_sweep(*config.sweep);
  return Service(std::move(cp), std::move(sweep), config.max_steps);
}

Response Service::info() const {
  ojson patterns = ojson::array();
  const auto points = learned_pb_points(checkpoint_);
  for (std::size_t k = 0; k < points.size(); ++k) {
    patterns.push_back(
        {{"label", checkpoint_.params.pb.labels[k]}, {"pb", {points[k].x(), points[k].y()}}});
  }
  ojson body;
  body["spec"] = spec_json(checkpoint_.params.spec);
  body["gamma"] = checkpoint_.config.gamma;
  body["patterns"] = std::move(patterns);
  body["joint_names"] = checkpoint_.training.joint_names;
  body["max_steps"] = max_steps_;
  body["default_steps"] = std::min(checkpoint_.stats.max_steps, max_steps_);
  body["learned_threshold"] = classifier_.learned_threshold;
  body["has_sweep"] = sweep_.has_value();
  return {200, std::move(body)};
}

Response Service::generate(std::string_view text) const {
  nlohmann::json body;
  try {
    body = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception&) {
    return error_response(400, "bad_request", "body is not valid JSON");
  }
  if (!body.is_object() || !body.contains("pb") || !body["pb"].is_array() ||
      body["pb"].size() != 2 || !body["pb"][0].is_number() || !body["pb"][1].is_number()) {
    return error_response(400, "bad_request", "expected {\"pb\": [x, y], \"steps\": n}");
  }
  const VectorX<double> pb = Eigen::Vector2d(body["pb"][0].get<double>(), body["pb"][1].get<double>());
  if (!pb.allFinite() || (pb.array().abs() > 1.0).any()) {
    return error_response(400, "pb_out_of_range", "pb components must lie in [-1, 1]");
  }
  int steps = std::min(checkpoint_.stats.max_steps, max_steps_);
  if (body.contains("steps")) {
    if (!body["steps"].is_number_integer()) {
      return error_response(400, "bad_request", "steps must be an integer");
    }
    const auto requested = body["steps"].get<long long>();
    if (requested < 1 || requested > max_steps_) {
      return error_response(400, "steps_out_of_range",
                            "steps must lie in [1, " + std::to_string(max_steps_) + "]");
    }
    steps = static_cast<int>(requested);
  }

  const auto traj = generate_action(checkpoint_, pb, steps);
  const auto label = classifier_(traj, checkpoint_.training);
  ojson out;
  out["pb"] = {pb(0), pb(1)};
  out["steps"] = steps;
  out["trajectory"] = trajectory_json(traj);
  out["class"] = std::string(to_string(label.cls));
  out["nearest"] = label.nearest ? ojson(*label.nearest) : ojson(nullptr);
  out["min_dtw"] = label.min_dtw ? ojson(*label.min_dtw) : ojson(nullptr);
  return {200, std::move(out)};
}

Response Service::map(std::string_view resolution) const {
  if (!sweep_) return error_response(404, "no_sweep", "no sweep record is loaded; run a sweep first");
  int res = sweep_->grid.resolution;
  if (!resolution.empty()) {
    const auto [ptr, ec] = std::from_chars(resolution.data(), resolution.data() + resolution.size(), res);
    if (ec != std::errc() || ptr != resolution.data() + resolution.size()) {
      return error_response(400, "bad_request", "resolution must be an integer");
    }
  }
  const int src = sweep_->grid.resolution;
  if (res < 2 || res > src || src % res != 0) {
    return error_response(400, "bad_request",
                          "resolution must be at least 2 and divide " + std::to_string(src));
  }
  const SweepResult view = downsample(*sweep_, res);
  const auto image = render_map(view, checkpoint_.params.pb.labels);

  ojson cells = ojson::array();
  for (const auto& c : view.cells) {
    ojson cell;
    cell["class"] = std::string(to_string(c.label.cls));
    cell["nearest"] = c.label.nearest ? ojson(*c.label.nearest) : ojson(nullptr);
    cell["sim"] = c.label.min_dtw ? ojson(similarity(*c.label.min_dtw, view.learned_threshold))
                                  : ojson(nullptr);
    cells.push_back(std::move(cell));
  }
  ojson out;
  out["resolution"] = res;
  out["source_resolution"] = src;
  out["order"] = "row-major, index = iy * resolution + ix, iy = 0 at PB2 = -1";
  out["cells"] = std::move(cells);
  out["legend"] = legend_json(image)["legend"];
  return {200, std::move(out)};
}

struct HttpServer::Impl {
  const Service& service;
  httplib::Server server;
};

HttpServer::HttpServer(const Service& service) : impl_(new Impl{service, {}}) {
  auto& srv = impl_->server;
  const auto reply = [](httplib::Response& res, const Response& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  srv.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                           {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                           {"Access-Control-Allow-Headers", "Content-Type"}});
  srv.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.status = 204;
  });
  srv.Get("/api/info", [this, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, impl_->service.info());
  });
  srv.Post("/api/generate", [this, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, impl_->service.generate(req.body));
  });
  srv.Get("/api/map", [this, reply](const httplib::Request& req, httplib::Response& res) {
    const std::string resolution =
        req.has_param("resolution") ? req.get_param_value("resolution") : std::string{};
    reply(res, impl_->service.map(resolution));
  });
  srv.set_exception_handler(
      [reply](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        std::string what = "internal error";
        try {
          std::rethrow_exception(ep);
        } catch (const std::exception& e) {
          what = e.what();
        } catch (...) {
        }
        reply(res, error_response(500, "internal", what));
      });
  srv.set_error_handler([reply](const httplib::Request&, httplib::Response& res) {
    if (res.status == 404 && res.body.empty()) {
      reply(res, error_response(404, "not_found", "unknown endpoint"));
    }
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  require(bound > 0, ErrorKind::BindError,
          "cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

void serve(const ServeConfig& config) {
  const Service service = Service::load(config);
  HttpServer server(service);
  const int port = server.bind(config.host, config.port);
  std::cout << "serving on http://" << config.host << ':' << port << std::endl;
  server.listen();
}

}  // namespace novact
