#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <mutex>
#include <thread>

#include "oralscan/inference.hpp"
#include "oralscan/service.hpp"
// After Eigen: httplib's platform headers define macros Eigen's product kernels trip over.
#include "httplib.h"
#include "json.hpp"

using namespace oralscan;
using nlohmann::json;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.input_size = 16;
  c.conv_stages = {{4, 3}};
  c.hidden_units = 8;
  c.seed = 11;
  return c;
}

Checkpoint make_checkpoint(const ModelConfig& config) {
  return deserialize_checkpoint(serialize_checkpoint(build<float>(config), {5, 2, "feedfacecafebeef"}));
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string data_path(const std::string& name) {
  const char* dir = std::getenv("ORALSCAN_TEST_DATA");
  return std::string(dir ? dir : "tests/data") + "/" + name;
}

std::string ppm_bytes(const Image& img) {
  const auto bytes = encode_ppm(img);
  return {bytes.begin(), bytes.end()};
}

class Running {
 public:
  explicit Running(ServiceOptions options = {}) : service(std::move(options)) {
    port = service.bind("127.0.0.1", 0);
    if (port > 0) {
      thread = std::thread([this] { service.listen(); });
      service.wait_until_listening();
    }
  }
  ~Running() {
    service.stop();
    if (thread.joinable()) thread.join();
  }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port);
    c.set_read_timeout(30);
    c.set_write_timeout(30);
    return c;
  }

  InferenceService service;
  int port = -1;
  std::thread thread;
};

httplib::Result post_image(httplib::Client& c, const std::string& bytes, const std::string& tier = "") {
  httplib::MultipartFormDataItems items = {{"image", bytes, "scan.ppm", "application/octet-stream"}};
  if (!tier.empty()) items.push_back({"tier", tier, "", ""});
  return c.Post("/api/predict", items);
}

}  // namespace

TEST(Service, AnswersServiceUnavailableBeforeModelLoad) {
  Running srv;
  ASSERT_GT(srv.port, 0);
  auto c = srv.client();
  EXPECT_EQ(c.Get("/api/health")->status, 503);
  EXPECT_EQ(c.Get("/api/model")->status, 503);
  EXPECT_EQ(post_image(c, ppm_bytes(Image(4, 4)))->status, 503);
  EXPECT_FALSE(srv.service.ready());

  const Checkpoint ckpt = make_checkpoint(small_config());
  const std::string digest = ckpt.digest;
  srv.service.set_model(ckpt);
  const auto health = c.Get("/api/health");
  ASSERT_EQ(health->status, 200);
  const auto body = json::parse(health->body);
  EXPECT_EQ(body["status"], "ok");
  EXPECT_EQ(body["model_digest"], digest);
  EXPECT_THROW(srv.service.set_model(ckpt), std::logic_error);
}

TEST(Service, ModelCardForDefaultConfig) {
  Running srv;
  srv.service.set_model(make_checkpoint(ModelConfig{}));
  auto c = srv.client();
  const auto first = c.Get("/api/model");
  const auto second = c.Get("/api/model");
  ASSERT_EQ(first->status, 200);
  EXPECT_EQ(first->body, second->body);
  const auto card = json::parse(first->body);
  EXPECT_EQ(card["input_side"], 128);
  EXPECT_EQ(card["classes"], json::array({"cancerous", "non_cancerous", "negative"}));
  EXPECT_EQ(card["training"]["epochs_completed"], 2);
  EXPECT_EQ(card["training"]["dataset_digest"], "feedfacecafebeef");
  EXPECT_EQ(card["parameter_count"], parameter_count(ModelConfig{}));
}

TEST(Service, PredictMatchesInProcessClassification) {
  const Checkpoint ckpt = make_checkpoint(small_config());
  const Model<float> model = ckpt.model;
  const std::string digest = ckpt.digest;
  Running srv;
  srv.service.set_model(ckpt);
  auto c = srv.client();
  for (int i = 0; i < 3; ++i) {
    const Image img = render_synthetic(label_from_index(i), 21, i, 400, 300);
    const auto res = post_image(c, ppm_bytes(img), i == 1 ? "144p" : "");
    ASSERT_EQ(res->status, 200) << res->body;
    const auto body = json::parse(res->body);
    const auto direct =
        classify(model, img, i == 1 ? std::optional(ResolutionTier::R144) : std::nullopt).prediction;
    EXPECT_EQ(body["label"], label_name(direct.label));
    EXPECT_NEAR(body["confidence"].get<double>(), direct.confidence, 1e-12);
    double sum = 0.0;
    std::size_t argmax = 0;
    for (std::size_t k = 0; k < 3; ++k) {
      const double p = body["distribution"][k].get<double>();
      sum += p;
      if (p > body["distribution"][argmax].get<double>()) argmax = k;
    }
    EXPECT_NEAR(sum, 1.0, 1e-6);
    EXPECT_EQ(body["label"], label_name(label_from_index(static_cast<int>(argmax))));
    EXPECT_EQ(body["model_digest"], digest);
    EXPECT_EQ(body["input_geometry"]["width"], 400);
    EXPECT_EQ(body["input_geometry"]["height"], 300);
    EXPECT_EQ(body["processed_geometry"]["height"], i == 1 ? 144 : 300);
  }
}

TEST(Service, AcceptsPng) {
  Running srv;
  srv.service.set_model(make_checkpoint(small_config()));
  auto c = srv.client();
  const auto res = post_image(c, read_file(data_path("raster_rgb.png")));
  ASSERT_EQ(res->status, 200) << res->body;
  EXPECT_EQ(json::parse(res->body)["input_geometry"]["width"], 13);
}

TEST(Service, ClientErrors) {
  Running srv;
  srv.service.set_model(make_checkpoint(small_config()));
  auto c = srv.client();
  const std::string good = ppm_bytes(Image(8, 8));

  const auto garbage = post_image(c, "definitely not an image");
  EXPECT_EQ(garbage->status, 400);
  EXPECT_NE(garbage->body.find("undecodable"), std::string::npos);

  const auto tier = post_image(c, good, "480p");
  EXPECT_EQ(tier->status, 400);
  EXPECT_NE(tier->body.find("unknown tier"), std::string::npos);

  httplib::MultipartFormDataItems wrong_field = {{"file", good, "a.ppm", "application/octet-stream"}};
  EXPECT_EQ(c.Post("/api/predict", wrong_field)->status, 400);

  EXPECT_EQ(c.Post("/api/predict", good, "application/octet-stream")->status, 415);
  EXPECT_EQ(c.Post("/api/predict", "{}", "application/json")->status, 415);
}

TEST(Service, OversizedUploadsAreRejected) {
  Running srv;
  srv.service.set_model(make_checkpoint(small_config()));
  auto c = srv.client();
  const auto res = post_image(c, std::string(30u << 20, 'x'));
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
  EXPECT_NE(res->body.find("too large"), std::string::npos);
}

TEST(Service, CorsHeadersOnlyWhenEnabled) {
  {
    Running srv;
    srv.service.set_model(make_checkpoint(small_config()));
    auto c = srv.client();
    EXPECT_FALSE(c.Get("/api/health")->has_header("Access-Control-Allow-Origin"));
  }
  Running srv({true, false, {}});
  srv.service.set_model(make_checkpoint(small_config()));
  auto c = srv.client();
  EXPECT_EQ(c.Get("/api/health")->get_header_value("Access-Control-Allow-Origin"), "*");
  EXPECT_EQ(c.Options("/api/predict")->status, 204);
}

TEST(Service, RequestLoggingRecordsMetadataOnly) {
  std::mutex mu;
  std::vector<std::string> lines;
  Running srv({false, true, [&](const std::string& l) {
                 std::lock_guard lock(mu);
                 lines.push_back(l);
               }});
  srv.service.set_model(make_checkpoint(small_config()));
  auto c = srv.client();
  Image img(6, 6);
  std::fill(img.pixels.begin(), img.pixels.end(), 'Q');
  ASSERT_EQ(post_image(c, ppm_bytes(img))->status, 200);
  // The logger runs after the response is on the wire.
  for (int i = 0; i < 200; ++i) {
    {
      std::lock_guard lock(mu);
      if (!lines.empty()) break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  std::lock_guard lock(mu);
  ASSERT_EQ(lines.size(), 1u);
  EXPECT_NE(lines[0].find("POST /api/predict 200"), std::string::npos);
  EXPECT_EQ(lines[0].find("QQQ"), std::string::npos);
}

TEST(Service, ConcurrentIdenticalRequestsAgree) {
  Running srv;
  srv.service.set_model(make_checkpoint(small_config()));
  const std::string bytes = ppm_bytes(render_synthetic(ClassLabel::Negative, 2, 0, 320, 180));
  std::vector<std::string> bodies(4);
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i < bodies.size(); ++i) {
    threads.emplace_back([&, i] {
      auto c = srv.client();
      bodies[i] = post_image(c, bytes)->body;
    });
  }
  for (auto& t : threads) t.join();
  for (const auto& b : bodies) EXPECT_EQ(b, bodies[0]);
  auto c = srv.client();
  post_image(c, ppm_bytes(Image(3, 3)));
  EXPECT_EQ(post_image(c, bytes)->body, bodies[0]);
}

TEST(Service, OccupiedPortCannotBeBound) {
  Running first;
  ASSERT_GT(first.port, 0);
  InferenceService second;
  EXPECT_EQ(second.bind("127.0.0.1", first.port), -1);
}
