// oralscan: synthesize data, train, sweep tiers, predict and serve.
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <pthread.h>

#include <csignal>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "oralscan/checkpoint.hpp"
#include "oralscan/dataset.hpp"
#include "oralscan/imaging.hpp"
#include "oralscan/inference.hpp"
#include "oralscan/service.hpp"
#include "oralscan/sweep.hpp"
#include "oralscan/trainer.hpp"

using namespace oralscan;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kRuntimeFailure = 1;
constexpr int kUsageError = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

ModelConfig preset_config(const std::string& name) {
  ModelConfig c;
  if (name == "reduced") {
    c.input_size = 64;
    c.conv_stages = {{8, 3}, {16, 3}, {16, 3}};
    c.hidden_units = 32;
  } else if (name == "tiny") {
    c.input_size = 32;
    c.conv_stages = {{8, 3}, {8, 3}};
    c.hidden_units = 32;
  } else if (name != "default") {
    throw UsageError("unknown config preset " + name);
  }
  return c;
}

DatasetManifest open_manifest(const fs::path& path) {
  if (!fs::exists(path)) throw UsageError("manifest not found: " + path.string());
  return load_manifest(path);
}

Checkpoint open_checkpoint(const fs::path& path, bool missing_is_usage) {
  if (missing_is_usage && !fs::exists(path)) throw UsageError("checkpoint not found: " + path.string());
  return load_checkpoint(path);
}

std::string utc_timestamp(std::time_t t) {
  char buf[32];
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Honors SOURCE_DATE_EPOCH so reruns can produce byte-identical reports.
std::string run_timestamp() {
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) {
    char* end = nullptr;
    const long long v = std::strtoll(epoch, &end, 10);
    if (end != epoch && *end == '\0') return utc_timestamp(static_cast<std::time_t>(v));
  }
  return utc_timestamp(std::time(nullptr));
}

json per_class(const std::array<double, kNumClasses>& values) {
  json out = json::object();
  for (ClassLabel c : kAllLabels) out[std::string(label_name(c))] = values[static_cast<std::size_t>(label_index(c))];
  return out;
}

json per_class(const std::array<Ratio, kNumClasses>& values) {
  std::array<double, kNumClasses> v{};
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = values[i].value;
  return per_class(v);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

// --- gen-synthetic ---------------------------------------------------------

struct GenArgs {
  std::string out;
  int per_class = 0;
  std::uint64_t seed = 42;
};

int cmd_gen_synthetic(const GenArgs& a) {
  DatasetManifest m;
  try {
    m = gen_synthetic(a.per_class, a.seed, a.out);
  } catch (const ImageError& e) {
    throw UsageError(e.what());
  }
  std::cout << (fs::path(a.out) / "manifest.jsonl").string() << '\n' << "digest " << m.digest << '\n';
  return 0;
}

// --- validate --------------------------------------------------------------

int cmd_validate(const std::string& manifest_path) {
  const DatasetManifest m = open_manifest(manifest_path);
  const ValidationReport r = validate(m);
  json counts = json::object();
  for (ClassLabel c : kAllLabels) counts[std::string(label_name(c))] = r.class_counts[static_cast<std::size_t>(label_index(c))];
  std::cout << json{{"total", r.total},
                    {"classes", counts},
                    {"hardware", {{"with", r.with_hardware}, {"without", r.without_hardware}, {"untagged", r.untagged}}},
                    {"problems", r.problems},
                    {"digest", m.digest}}
                   .dump()
            << '\n';
  return r.problems.empty() ? 0 : kRuntimeFailure;
}

// --- train -----------------------------------------------------------------

struct TrainArgs {
  std::string manifest;
  std::string out;
  std::string preset = "default";
  HyperParams hp;
};

int cmd_train(const TrainArgs& a) {
  const DatasetManifest manifest = open_manifest(a.manifest);
  ModelConfig config = preset_config(a.preset);
  config.seed = a.hp.seed;
  const DatasetSplit split = split_dataset(manifest, a.hp.eval_fraction, a.hp.seed);
  const Index iters = iterations_per_epoch(static_cast<Index>(split.train.size()), a.hp.batch_size);

  std::cout << "run batch=" << a.hp.batch_size << " epochs=" << a.hp.epochs << " iterations_per_epoch=" << iters
            << " lr=" << a.hp.learning_rate << " momentum=" << a.hp.momentum << " seed=" << a.hp.seed
            << " config=" << a.preset << " train=" << split.train.size() << " eval=" << split.eval.size() << std::endl;

  const auto train_set = load_samples(manifest, split.train, config.input_size);
  const auto eval_set = load_samples(manifest, split.eval, config.input_size);
  Model<float> model = build<float>(config);
  const TrainHistory history = train(model, train_set, eval_set, a.hp, [](const ProgressEvent& e) {
    std::cout << json{{"epoch", e.epoch}, {"iter", e.iteration}, {"loss", e.loss}}.dump() << std::endl;
  });

  const TrainingMetadata meta{a.hp.seed, static_cast<int>(history.epochs.size()), manifest.digest};
  const std::string digest = save_checkpoint(model, meta, a.out);
  const EvalMetrics& eval = history.epochs.back().eval;
  std::cout << json{{"event", "done"},
                    {"checkpoint", a.out},
                    {"model_digest", digest},
                    {"updates", history.updates},
                    {"final_loss", history.epochs.back().mean_loss},
                    {"eval",
                     {{"images", eval.tally.total()},
                      {"accuracy", eval.accuracy},
                      {"precision", per_class(eval.precision)},
                      {"recall", per_class(eval.recall)},
                      {"average_precision", per_class(eval.average_precision)},
                      {"mean_average_precision", eval.mean_average_precision}}}}
                   .dump()
            << std::endl;
  return 0;
}

// --- sweep -----------------------------------------------------------------

struct SweepArgs {
  std::string manifest;
  std::string ckpt;
  std::string out;
  std::vector<std::string> tiers;
};

std::vector<ResolutionTier> parse_tiers(const std::vector<std::string>& names) {
  if (names.empty()) return {kAllTiers.begin(), kAllTiers.end()};
  std::vector<ResolutionTier> tiers;
  for (const std::string& n : names) {
    const auto t = parse_tier(n);
    if (!t) throw UsageError("unknown tier " + n);
    if (std::find(tiers.begin(), tiers.end(), *t) != tiers.end()) throw UsageError("tier listed twice: " + n);
    tiers.push_back(*t);
  }
  return tiers;
}

int cmd_sweep(const SweepArgs& a) {
  const auto tiers = parse_tiers(a.tiers);
  const DatasetManifest manifest = open_manifest(a.manifest);
  const Checkpoint ckpt = open_checkpoint(a.ckpt, true);
  const SweepReport report = run_sweep(ckpt.model, manifest, tiers, {ckpt.digest, ckpt.metadata.seed, run_timestamp()});

  fs::path csv = a.out;
  csv.replace_extension(".csv");
  if (csv == fs::path(a.out)) csv += ".csv";
  write_text(a.out, report_json(report, manifest).dump(2) + "\n");
  write_text(csv, report_csv(report));

  for (const TierSummary& s : report.tiers) {
    std::cout << tier_name(s.tier) << " accuracy=" << s.accuracy << " mAP=" << s.mean_average_precision << '\n';
  }
  std::cout << "predictions " << report.records.size() << '\n';
  if (report.fit) {
    std::cout << "log_fit a=" << report.fit->slope << " b=" << report.fit->intercept << " r2=" << report.fit->r2 << '\n';
  } else {
    std::cout << report.fit_notice << '\n';
  }
  std::cout << "report " << a.out << "\ncsv " << csv.string() << std::endl;
  return 0;
}

// --- predict ---------------------------------------------------------------

int cmd_predict(const std::string& ckpt_path, const std::string& image, const std::string& tier_name_arg) {
  std::optional<ResolutionTier> tier;
  if (!tier_name_arg.empty()) {
    tier = parse_tier(tier_name_arg);
    if (!tier) throw UsageError("unknown tier " + tier_name_arg);
  }
  const Checkpoint ckpt = open_checkpoint(ckpt_path, false);
  const Classification c = classify(ckpt.model, read_image(image), tier);
  std::cout << to_json(c.prediction).dump() << std::endl;
  return 0;
}

// --- serve -----------------------------------------------------------------

struct ServeArgs {
  std::string ckpt;
  std::string addr = "127.0.0.1:8080";
  bool cors = false;
  bool log_requests = false;
};

int cmd_serve(const ServeArgs& a) {
  const auto colon = a.addr.rfind(':');
  int port = -1;
  if (colon != std::string::npos) {
    try {
      port = std::stoi(a.addr.substr(colon + 1));
    } catch (const std::exception&) {
      port = -1;
    }
  }
  if (colon == std::string::npos || port < 0 || port > 65535) throw UsageError("--addr must be HOST:PORT");
  const std::string host = a.addr.substr(0, colon);

  // Block termination signals in every thread; a dedicated thread waits for them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  InferenceService service({a.cors, a.log_requests, {}});
  service.set_model(load_checkpoint(a.ckpt));
  const int bound = service.bind(host, port);
  if (bound < 0) {
    std::cerr << "error: cannot listen on " << a.addr << " (address in use or unavailable)\n";
    return kRuntimeFailure;
  }

  std::thread waiter([&service, signals] {
    int sig = 0;
    sigwait(&signals, &sig);
    service.wait_until_listening();
    service.stop();
  });
  std::cout << "listening on http://" << host << ':' << bound << std::endl;
  const bool ok = service.listen();
  if (!ok) {
    waiter.detach();
    std::cerr << "error: server loop failed\n";
    return kRuntimeFailure;
  }
  waiter.join();
  std::cout << "shutdown" << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Oral lesion screening CNN: data, training, resolution sweeps and inference service"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-synthetic", "Write a synthetic 3-class corpus and its manifest");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--per-class", gen.per_class, "Images per class")->required()->check(CLI::PositiveNumber);
  gen_cmd->add_option("--seed", gen.seed, "Generator seed");

  std::string validate_manifest;
  auto* validate_cmd = app.add_subcommand("validate", "Check that every manifest entry exists and decodes");
  validate_cmd->add_option("--manifest", validate_manifest, "Manifest file")->required();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Split, train and save a checkpoint");
  train_cmd->add_option("--manifest", tr.manifest, "Manifest file")->required();
  train_cmd->add_option("--out", tr.out, "Checkpoint path")->required();
  train_cmd->add_option("--batch", tr.hp.batch_size, "Batch size")->capture_default_str()->check(CLI::PositiveNumber);
  train_cmd->add_option("--epochs", tr.hp.epochs, "Epochs")->capture_default_str()->check(CLI::PositiveNumber);
  train_cmd->add_option("--lr", tr.hp.learning_rate, "Learning rate")->capture_default_str()->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--momentum", tr.hp.momentum, "Momentum")->capture_default_str()->check(CLI::Range(0.0, 0.999999));
  train_cmd->add_option("--eval-fraction", tr.hp.eval_fraction, "Held-out fraction")
      ->capture_default_str()
      ->check(CLI::Range(1e-9, 1.0 - 1e-9));
  train_cmd->add_option("--seed", tr.hp.seed, "Seed for init, split and shuffles")->capture_default_str();
  train_cmd->add_option("--config", tr.preset, "Architecture preset")
      ->capture_default_str()
      ->check(CLI::IsMember({"default", "reduced", "tiny"}));
  train_cmd->add_flag_callback("--tiny", [&tr] { tr.preset = "tiny"; }, "Shorthand for --config tiny");

  SweepArgs sw;
  auto* sweep_cmd = app.add_subcommand("sweep", "Evaluate a manifest at each resolution tier");
  sweep_cmd->add_option("--manifest", sw.manifest, "Manifest file")->required();
  sweep_cmd->add_option("--ckpt", sw.ckpt, "Checkpoint")->required();
  sweep_cmd->add_option("--out", sw.out, "JSON report path (CSV written alongside)")->required();
  sweep_cmd->add_option("--tiers", sw.tiers, "Tiers, e.g. 144,360 (default: all)")->delimiter(',');

  std::string pred_ckpt, pred_image, pred_tier;
  auto* predict_cmd = app.add_subcommand("predict", "Classify one image");
  predict_cmd->add_option("--ckpt", pred_ckpt, "Checkpoint")->required();
  predict_cmd->add_option("--image", pred_image, "PNG or PPM image")->required();
  predict_cmd->add_option("--tier", pred_tier, "Degrade to this tier first");

  ServeArgs sv;
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP inference API");
  serve_cmd->add_option("--ckpt", sv.ckpt, "Checkpoint")->required();
  serve_cmd->add_option("--addr", sv.addr, "HOST:PORT")->capture_default_str();
  serve_cmd->add_flag("--cors", sv.cors, "Send permissive cross-origin headers");
  serve_cmd->add_flag("--log-requests", sv.log_requests, "Log request metadata (never image bytes) to stderr");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    if (*gen_cmd) return cmd_gen_synthetic(gen);
    if (*validate_cmd) return cmd_validate(validate_manifest);
    if (*train_cmd) return cmd_train(tr);
    if (*sweep_cmd) return cmd_sweep(sw);
    if (*predict_cmd) return cmd_predict(pred_ckpt, pred_image, pred_tier);
    if (*serve_cmd) return cmd_serve(sv);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeFailure;
  }
  return kUsageError;
}
