#include "oralscan/service.hpp"

#include <atomic>
#include <iostream>
#include <optional>

#include "httplib.h"
#include "json.hpp"
#include "oralscan/inference.hpp"

namespace oralscan {

using nlohmann::json;

namespace {

// Leaves room for multipart framing around a maximum-size image so the
// handler, not the transport, reports oversized images.
constexpr std::size_t kMaxRequestBytes = 2 * kMaxUploadBytes;

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, {{"error", message}});
}

json model_card(const Checkpoint& ckpt) {
  const ModelConfig& c = ckpt.model.config;
  json stages = json::array();
  for (const ConvStage& s : c.conv_stages) stages.push_back({{"filters", s.filters}, {"kernel_size", s.kernel_size}});
  json classes = json::array();
  for (ClassLabel l : kAllLabels) classes.push_back(label_name(l));
  return {{"model_digest", ckpt.digest},
          {"classes", classes},
          {"input_side", c.input_size},
          {"config",
           {{"input_size", c.input_size},
            {"conv_stages", stages},
            {"hidden_units", c.hidden_units},
            {"num_classes", c.num_classes},
            {"seed", c.seed}}},
          {"parameter_count", parameter_count(c)},
          {"training",
           {{"seed", ckpt.metadata.seed},
            {"epochs_completed", ckpt.metadata.epochs_completed},
            {"dataset_digest", ckpt.metadata.dataset_digest}}}};
}

}  // namespace

struct InferenceService::Impl {
  ServiceOptions options;
  httplib::Server server;
  std::optional<Checkpoint> checkpoint;
  std::string card;
  std::atomic<bool> is_ready{false};

  void log(const std::string& line) const {
    if (options.log_sink) {
      options.log_sink(line);
    } else {
      std::cerr << line << '\n';
    }
  }

  void predict(const httplib::Request& req, httplib::Response& res) const {
    if (!is_ready.load(std::memory_order_acquire)) return send_error(res, 503, "model not ready");
    if (!req.is_multipart_form_data()) {
      return send_error(res, 415, "expected multipart/form-data with an \"image\" field");
    }
    if (!req.has_file("image")) return send_error(res, 400, "missing \"image\" field");
    const httplib::MultipartFormData image = req.get_file_value("image");
    if (image.content.size() > kMaxUploadBytes) return send_error(res, 400, "image too large (limit 25 MiB)");

    std::optional<ResolutionTier> tier;
    if (req.has_file("tier") && !req.get_file_value("tier").content.empty()) {
      const std::string text = req.get_file_value("tier").content;
      tier = parse_tier(text);
      if (!tier) return send_error(res, 400, "unknown tier \"" + text + "\"");
    }

    Image img;
    try {
      img = decode({reinterpret_cast<const std::uint8_t*>(image.content.data()), image.content.size()});
    } catch (const ImageError& e) {
      return send_error(res, 400, std::string("undecodable image: ") + e.what());
    }

    const Classification c = classify(checkpoint->model, img, tier);
    json body = to_json(c.prediction);
    body["model_digest"] = checkpoint->digest;
    body["input_geometry"] = {{"width", c.received_width}, {"height", c.received_height}};
    body["processed_geometry"] = {{"width", c.processed_width}, {"height", c.processed_height}};
    body["tier"] = tier ? json(tier_name(*tier)) : json(nullptr);
    send_json(res, 200, body);
  }
};

InferenceService::InferenceService(ServiceOptions options) : impl_(std::make_unique<Impl>()) {
  impl_->options = std::move(options);
  Impl* self = impl_.get();
  httplib::Server& srv = self->server;
  srv.set_payload_max_length(kMaxRequestBytes);
  // SO_REUSEADDR only: the default also sets SO_REUSEPORT, which would let a
  // second server silently share an occupied port.
  srv.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof yes);
  });

  srv.Get("/api/health", [self](const httplib::Request&, httplib::Response& res) {
    if (!self->is_ready.load(std::memory_order_acquire)) {
      return send_json(res, 503, {{"status", "loading"}});
    }
    send_json(res, 200, {{"status", "ok"}, {"model_digest", self->checkpoint->digest}});
  });
  srv.Get("/api/model", [self](const httplib::Request&, httplib::Response& res) {
    if (!self->is_ready.load(std::memory_order_acquire)) return send_error(res, 503, "model not ready");
    res.set_content(self->card, "application/json");
  });
  srv.Post("/api/predict",
           [self](const httplib::Request& req, httplib::Response& res) { self->predict(req, res); });

  srv.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return;
    if (res.status == 413) {
      send_error(res, 400, "request too large (limit 25 MiB)");
    } else {
      send_error(res, res.status, httplib::status_message(res.status));
    }
  });
  srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr) {
    send_error(res, 500, "internal error");
  });

  if (self->options.cors) {
    srv.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                             {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                             {"Access-Control-Allow-Headers", "Content-Type"}});
    srv.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  }
  if (self->options.log_requests) {
    srv.set_logger([self](const httplib::Request& req, const httplib::Response& res) {
      self->log(req.method + " " + req.path + " " + std::to_string(res.status) + " " +
                std::to_string(req.body.size()) + " bytes");
    });
  }
}

InferenceService::~InferenceService() { stop(); }

void InferenceService::set_model(Checkpoint checkpoint) {
  if (impl_->is_ready.load()) throw std::logic_error("model already installed");
  impl_->card = model_card(checkpoint).dump();
  impl_->checkpoint = std::move(checkpoint);
  impl_->is_ready.store(true, std::memory_order_release);
}

bool InferenceService::ready() const { return impl_->is_ready.load(std::memory_order_acquire); }

int InferenceService::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool InferenceService::listen() { return impl_->server.listen_after_bind(); }

void InferenceService::wait_until_listening() const { impl_->server.wait_until_ready(); }

void InferenceService::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}

}  // namespace oralscan
