#ifndef ORALSCAN_SERVICE_HPP
#define ORALSCAN_SERVICE_HPP

#include <cstddef>
#include <functional>
#include <memory>
#include <string>

#include "oralscan/checkpoint.hpp"

namespace oralscan {

inline constexpr std::size_t kMaxUploadBytes = 25u << 20;

struct ServiceOptions {
  bool cors = false;          // permissive cross-origin headers for a UI on another port
  bool log_requests = false;  // method, path, status and size only; never image bytes
  std::function<void(const std::string&)> log_sink;  // defaults to stderr
};

/// HTTP inference API. The model is installed once and then shared read-only.
class InferenceService {
 public:
  explicit InferenceService(ServiceOptions options = {});
  ~InferenceService();
  InferenceService(const InferenceService&) = delete;
  InferenceService& operator=(const InferenceService&) = delete;

  /// Installs the model; requests before this answer 503. May be called once.
  void set_model(Checkpoint checkpoint);
  bool ready() const;

  /// Binds host:port (port 0 picks a free port). Returns the bound port or -1.
  int bind(const std::string& host, int port);
  /// Serves until stop(); returns false if the listen loop failed.
  bool listen();
  void wait_until_listening() const;
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace oralscan

#endif  // ORALSCAN_SERVICE_HPP
