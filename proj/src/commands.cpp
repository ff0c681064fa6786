#include "proxyseg/commands.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "proxyseg/byte_io.hpp"
#include "proxyseg/checkpoint.hpp"
#include "proxyseg/image_io.hpp"
#include "proxyseg/run_config.hpp"
#include "proxyseg/segpack.hpp"

namespace proxyseg {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void write_text(const fs::path& path, const std::string& text) {
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw FormatError(FormatError::Kind::io, "cannot create directory " + dir.string());
  }
}

RunConfig base_config(const std::optional<fs::path>& path) {
  if (!path) {
    RunConfig config;
    config.validate();
    return config;
  }
  return load_run_config(*path);
}

json iou_json(const ConfusionMatrix& cm) {
  json out = json::array();
  for (const auto& v : cm.per_class_iou()) out.push_back(v ? json(*v) : json(nullptr));
  return out;
}

void check_pack(const SegPack& pack, const ModelConfig& model, const std::string& what) {
  if (pack.num_classes != model.num_classes) {
    throw FormatError(FormatError::Kind::shape_mismatch, what + " has K=" + std::to_string(pack.num_classes) +
                                                             ", model expects K=" +
                                                             std::to_string(model.num_classes));
  }
  if (pack.channels != model.in_channels) {
    throw FormatError(FormatError::Kind::shape_mismatch, what + " has C=" + std::to_string(pack.channels) +
                                                             ", model expects C=" +
                                                             std::to_string(model.in_channels));
  }
  if (pack.size() == 0) throw FormatError(FormatError::Kind::shape_mismatch, what + " is empty");
}

// Keeps the header and the rows of epochs before `epoch` from an existing
// metrics file, so a resumed run in the same directory ends up with the same
// file as an uninterrupted one.
std::string metrics_prefix(const fs::path& path, int epoch, std::size_t num_classes) {
  std::string out = metrics_csv_header(num_classes);
  std::ifstream in(path);
  if (!in) return out;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    if (comma == std::string::npos) continue;
    if (std::stoi(line.substr(0, comma)) < epoch) out += line + "\n";
  }
  return out;
}

void write_pack_with_meta(const SegPack& pack, const fs::path& path, const std::string& domain,
                          const DomainParams& params, const SceneSpec& scene, std::uint64_t seed) {
  write_segpack(pack, path);
  const json meta = {{"domain", domain},
                     {"count", pack.size()},
                     {"seed", seed},
                     {"scene", to_json(scene)},
                     {"params", to_json(params)}};
  write_text(path.string() + ".meta.json", meta.dump(2) + "\n");
}

}  // namespace

void cmd_gen_data(const GenDataOptions& options) {
  const RunConfig config = base_config(options.config);
  ensure_dir(options.out);
  const std::uint64_t source_seed = mix_seed(options.seed, 0);
  const std::uint64_t target_seed = mix_seed(options.seed, 1);
  const std::uint64_t val_seed = mix_seed(options.seed, 2);
  const auto& s = config.scene;
  write_pack_with_meta(generate_pack(s, config.source_domain, config.counts.source, source_seed),
                       options.out / "source.segpack", "source", config.source_domain, s, source_seed);
  write_pack_with_meta(generate_pack(s, config.target_domain, config.counts.target, target_seed),
                       options.out / "target.segpack", "target", config.target_domain, s, target_seed);
  write_pack_with_meta(generate_pack(s, config.source_domain, config.counts.validation, val_seed),
                       options.out / "val_source.segpack", "source", config.source_domain, s, val_seed);
  write_pack_with_meta(generate_pack(s, config.target_domain, config.counts.validation, val_seed),
                       options.out / "val_target.segpack", "target", config.target_domain, s, val_seed);
}

json cmd_train(const TrainOptions& options) {
  RunConfig config = base_config(options.config);
  auto& tc = config.train;
  if (options.mode) {
    const auto mode = parse_mode(*options.mode);
    if (!mode) {
      std::string valid;
      for (const auto& m : mode_names()) valid += (valid.empty() ? "" : ", ") + m;
      throw ConfigError("unknown mode '" + *options.mode + "'; valid modes: " + valid);
    }
    tc.mode = *mode;
  }
  tc.seed = options.seed;
  tc.model.seed = options.seed;
  tc.output_dir = options.out.string();
  if (options.data_dir) {
    tc.source_pack = (*options.data_dir / "source.segpack").string();
    tc.target_pack = (*options.data_dir / "target.segpack").string();
    tc.val_pack = (*options.data_dir / "val_target.segpack").string();
  }
  config.validate();

  TrainingData data{read_segpack(tc.source_pack), read_segpack(tc.target_pack), read_segpack(tc.val_pack)};
  check_pack(data.source, tc.model, tc.source_pack);
  check_pack(data.target, tc.model, tc.target_pack);
  check_pack(data.validation, tc.model, tc.val_pack);

  std::optional<Trainer> trainer;
  if (options.resume) {
    auto ck = load_checkpoint(*options.resume);
    if (!(ck.model.config() == tc.model)) {
      throw ConfigError("checkpoint " + options.resume->string() + " was written for a different model config");
    }
    trainer.emplace(tc, std::move(data), std::move(ck.model), ck.state);
  } else {
    trainer.emplace(tc, std::move(data));
  }

  ensure_dir(options.out);
  write_text(options.out / "resolved_config.json", to_json(config).dump(2) + "\n");
  const fs::path metrics_path = options.out / "metrics.csv";
  const std::size_t k = tc.model.num_classes;
  std::string metrics = metrics_prefix(metrics_path, trainer->state().epoch, k);
  write_text(metrics_path, metrics);

  const auto started = std::chrono::steady_clock::now();
  std::optional<EpochRecord> last;
  while (!trainer->finished()) {
    auto rec = trainer->run_epoch();
    const auto& t = rec.train;
    metrics += metrics_csv_row(t.epoch, "train", tc.mode, t, t.loss, t.train_confusion, t.agreement_fraction);
    metrics += metrics_csv_row(t.epoch, "val", tc.mode, t, rec.validation.loss, rec.validation.confusion,
                               rec.validation.agreement_fraction);
    write_text(metrics_path, metrics);
    save_checkpoint(trainer->model(), trainer->state(), options.out / checkpoint_file_name(trainer->state().epoch));
    if (options.progress) {
      std::fprintf(stderr, "epoch %2d  gamma %.3f  rho %.3f  loss %.4f  val mIoU %.4f  agreement %.4f\n",
                   t.epoch + 1, t.gamma, t.rho, t.loss, rec.validation.confusion.mean_iou(),
                   rec.validation.agreement_fraction);
    }
    last = std::move(rec);
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  // A resumed run that had nothing left to do still reports its final state.
  const auto final_eval = last ? last->validation : evaluate(trainer->model(), trainer->data().validation);
  json summary = {{"mode", mode_name(tc.mode)},
                  {"seed", tc.seed},
                  {"epochs", trainer->state().epoch},
                  {"final_miou", final_eval.confusion.mean_iou()},
                  {"final_pixel_accuracy", final_eval.confusion.pixel_accuracy()},
                  {"per_class_iou", iou_json(final_eval.confusion)},
                  {"final_agreement_fraction", final_eval.agreement_fraction},
                  {"decoder_cosine", decoder_cosine(trainer->model())},
                  {"wall_clock_seconds", seconds}};
  write_text(options.out / "summary.json", summary.dump(2) + "\n");
  return summary;
}

json cmd_eval(const EvalOptions& options) {
  const auto ck = load_checkpoint(options.checkpoint);
  const auto pack = read_segpack(options.data);
  check_pack(pack, ck.model.config(), options.data.string());
  const auto result = evaluate(ck.model, pack);
  const auto policy = options.absent_as_zero ? AbsentClassPolicy::as_zero : AbsentClassPolicy::exclude;
  json out = {{"checkpoint", options.checkpoint.string()},
              {"data", options.data.string()},
              {"images", pack.size()},
              {"absent_classes", options.absent_as_zero ? "zero" : "excluded"},
              {"miou", result.confusion.mean_iou(policy)},
              {"pixel_accuracy", result.confusion.pixel_accuracy()},
              {"per_class_iou", iou_json(result.confusion)},
              {"agreement_fraction", result.agreement_fraction}};
  write_text(options.out, out.dump(2) + "\n");
  return out;
}

void cmd_visualize(const VisualizeOptions& options) {
  const auto ck = load_checkpoint(options.checkpoint);
  const auto pack = read_segpack(options.data);
  check_pack(pack, ck.model.config(), options.data.string());
  if (pack.channels != 3) throw FormatError(FormatError::Kind::shape_mismatch, "visualize needs 3-channel images");
  ensure_dir(options.out);
  const std::size_t count = std::min(options.count, pack.size());
  const std::size_t h = pack.height;
  const std::size_t w = pack.width;
  for (std::size_t i = 0; i < count; ++i) {
    const auto sample = pack.sample(i);
    const auto pred = predict(ck.model, pack, i, 1);
    const std::string stem = "img_" + std::to_string(i) + "_";
    write_ppm(options.out / (stem + "input.ppm"), w, h, to_rgb8(sample.image, h, w));
    write_ppm(options.out / (stem + "truth.ppm"), w, h, colorize(sample.labels));
    write_ppm(options.out / (stem + "pred.ppm"), w, h, colorize(pred.labels.values));
    std::vector<std::uint8_t> gray(h * w);
    for (std::size_t p = 0; p < gray.size(); ++p) gray[p] = pred.agreement[p] ? 255 : 0;
    write_pgm(options.out / (stem + "agreement.pgm"), w, h, gray);
  }
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Strategic-curriculum self-training for semantic segmentation on synthetic domain shift"};
  app.require_subcommand(1);

  GenDataOptions gen;
  std::string gen_config;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate source, target and validation packs");
  gen_cmd->add_option("--config", gen_config, "Run config JSON (scene, domains, pack sizes)");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--seed", gen.seed, "Generation seed")->required();

  TrainOptions train;
  std::string train_config, train_mode, train_data, train_resume;
  auto* train_cmd = app.add_subcommand("train", "Train one run");
  train_cmd->add_option("--config", train_config, "Run config JSON");
  train_cmd->add_option("--out", train.out, "Run directory")->required();
  train_cmd->add_option("--mode", train_mode, "source_only|self_train|weighted|easy_mining|full|target_oracle");
  train_cmd->add_option("--seed", train.seed, "Run seed (model init and sampling)")->required();
  train_cmd->add_option("--data", train_data, "Directory with source/target/val_target packs");
  train_cmd->add_option("--resume", train_resume, "Checkpoint to continue from");
  train_cmd->add_flag("--quiet", "No per-epoch progress on stderr");

  EvalOptions ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a pack");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--data", ev.data, "SegPack file")->required();
  eval_cmd->add_option("--out", ev.out, "Output JSON path")->required();
  eval_cmd->add_flag("--absent-as-zero", ev.absent_as_zero, "Count classes absent from truth and prediction as 0 IoU");

  VisualizeOptions vis;
  auto* vis_cmd = app.add_subcommand("visualize", "Write input, truth, prediction and agreement images");
  vis_cmd->add_option("--checkpoint", vis.checkpoint, "Checkpoint file")->required();
  vis_cmd->add_option("--data", vis.data, "SegPack file")->required();
  vis_cmd->add_option("--out", vis.out, "Output directory")->required();
  vis_cmd->add_option("--count", vis.count, "Number of images")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*gen_cmd) {
      if (!gen_config.empty()) gen.config = gen_config;
      cmd_gen_data(gen);
      std::printf("wrote 4 packs to %s\n", gen.out.string().c_str());
    } else if (*train_cmd) {
      if (!train_config.empty()) train.config = train_config;
      if (!train_mode.empty()) train.mode = train_mode;
      if (!train_data.empty()) train.data_dir = train_data;
      if (!train_resume.empty()) train.resume = train_resume;
      train.progress = train_cmd->count("--quiet") == 0;
      const auto summary = cmd_train(train);
      std::printf("%s seed %llu: mIoU %.4f, pixel accuracy %.4f\n", summary["mode"].get<std::string>().c_str(),
                  static_cast<unsigned long long>(train.seed), summary["final_miou"].get<double>(),
                  summary["final_pixel_accuracy"].get<double>());
    } else if (*eval_cmd) {
      const auto out = cmd_eval(ev);
      std::printf("mIoU %.4f, pixel accuracy %.4f\n", out["miou"].get<double>(), out["pixel_accuracy"].get<double>());
    } else if (*vis_cmd) {
      cmd_visualize(vis);
    }
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return 3;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}

}  // namespace proxyseg
