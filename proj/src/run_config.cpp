#include "proxyseg/run_config.hpp"

#include <fstream>
#include <set>

#include "proxyseg/errors.hpp"

namespace proxyseg {
namespace {

using nlohmann::json;

// Reads fields from one JSON object, remembering which keys were used so
// that leftovers can be reported as unknown.
class Fields {
 public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected a JSON object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    used_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where_ + "." + key + ": wrong type");
    }
  }

  const json* child(const char* key) {
    used_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string path(const char* key) const { return where_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!used_.contains(key)) throw ConfigError(where_ + ": unknown key '" + key + "'");
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> used_;
};

json range_json(const IntRange& r) { return json::array({r.lo, r.hi}); }

void get_range(Fields& f, const char* key, IntRange& out) {
  if (const json* j = f.child(key)) {
    if (!j->is_array() || j->size() != 2 || !(*j)[0].is_number_integer() || !(*j)[1].is_number_integer()) {
      throw ConfigError(f.path(key) + ": expected [lo, hi]");
    }
    out = {(*j)[0].get<int>(), (*j)[1].get<int>()};
  }
}

const char* similarity_name(SimilarityMode m) { return m == SimilarityMode::dot ? "dot" : "cosine"; }

void parse_curriculum(const json& j, CurriculumConfig& c) {
  Fields f(j, "curriculum");
  f.get("gamma_start", c.gamma_start);
  f.get("gamma_end", c.gamma_end);
  f.get("gamma_ramp_epochs", c.gamma_ramp_epochs);
  f.get("rho_start", c.rho_start);
  f.get("rho_end", c.rho_end);
  f.get("rho_ramp_epochs", c.rho_ramp_epochs);
  f.get("alpha0_encoder", c.alpha0_encoder);
  f.get("alpha0_decoder", c.alpha0_decoder);
  f.get("delta", c.delta);
  f.get("e_max", c.e_max);
  f.get("beta", c.beta);
  std::string mode = similarity_name(c.similarity_mode);
  f.get("similarity_mode", mode);
  if (mode == "dot") {
    c.similarity_mode = SimilarityMode::dot;
  } else if (mode == "cosine") {
    c.similarity_mode = SimilarityMode::cosine;
  } else {
    throw ConfigError("curriculum.similarity_mode: expected \"dot\" or \"cosine\", got \"" + mode + "\"");
  }
  f.get("similarity_include_biases", c.similarity_include_biases);
  f.get("doubled_classes", c.doubled_classes);
  f.get("momentum", c.momentum);
  f.get("weight_decay", c.weight_decay);
  f.finish();
}

void parse_model(const json& j, ModelConfig& m) {
  Fields f(j, "model");
  f.get("in_channels", m.in_channels);
  f.get("base_width", m.base_width);
  f.get("num_classes", m.num_classes);
  f.get("seed", m.seed);
  f.finish();
}

void parse_augment(const json& j, AugmentOptions& a) {
  Fields f(j, "augment");
  f.get("crop", a.crop);
  f.get("scale_jitter", a.scale_jitter);
  f.get("scale_min", a.scale_min);
  f.get("scale_max", a.scale_max);
  f.get("flip_probability", a.flip_probability);
  f.finish();
}

void parse_scene(const json& j, SceneSpec& s) {
  Fields f(j, "scene");
  f.get("height", s.height);
  f.get("width", s.width);
  f.get("num_classes", s.num_classes);
  f.get("occurrence", s.occurrence);
  get_range(f, "road_height", s.road_height);
  get_range(f, "large_blob_radius", s.large_blob_radius);
  get_range(f, "small_blob_radius", s.small_blob_radius);
  get_range(f, "stripe_width", s.stripe_width);
  get_range(f, "rare_dot_radius", s.rare_dot_radius);
  f.finish();
}

void parse_domain(const json& j, const char* where, DomainParams& d) {
  Fields f(j, where);
  f.get("palette", d.palette);
  f.get("gain", d.gain);
  f.get("noise_sigma", d.noise_sigma);
  f.get("texture_frequency", d.texture_frequency);
  f.get("texture_amplitude", d.texture_amplitude);
  f.finish();
}

void parse_counts(const json& j, DataCounts& c) {
  Fields f(j, "data");
  f.get("source", c.source);
  f.get("target", c.target);
  f.get("validation", c.validation);
  f.finish();
}

}  // namespace

void RunConfig::validate() const {
  train.validate();
  scene.validate();
  source_domain.validate(scene.num_classes);
  target_domain.validate(scene.num_classes);
  if (train.model.num_classes != scene.num_classes) {
    throw ConfigError("model.num_classes must match scene.num_classes");
  }
  if (counts.source == 0 || counts.target == 0 || counts.validation == 0) {
    throw ConfigError("data: pack sizes must be positive");
  }
}

json to_json(const SceneSpec& s) {
  return {{"height", s.height},
          {"width", s.width},
          {"num_classes", s.num_classes},
          {"occurrence", s.occurrence},
          {"road_height", range_json(s.road_height)},
          {"large_blob_radius", range_json(s.large_blob_radius)},
          {"small_blob_radius", range_json(s.small_blob_radius)},
          {"stripe_width", range_json(s.stripe_width)},
          {"rare_dot_radius", range_json(s.rare_dot_radius)}};
}

json to_json(const DomainParams& d) {
  return {{"palette", d.palette},
          {"gain", d.gain},
          {"noise_sigma", d.noise_sigma},
          {"texture_frequency", d.texture_frequency},
          {"texture_amplitude", d.texture_amplitude}};
}

json to_json(const RunConfig& config) {
  const auto& t = config.train;
  const auto& c = t.curriculum;
  json j;
  j["mode"] = mode_name(t.mode);
  j["seed"] = t.seed;
  j["batch_size"] = t.batch_size;
  j["iterations_per_epoch"] = t.iterations_per_epoch;
  j["source_pack"] = t.source_pack;
  j["target_pack"] = t.target_pack;
  j["val_pack"] = t.val_pack;
  j["output_dir"] = t.output_dir;
  j["curriculum"] = {{"gamma_start", c.gamma_start},
                     {"gamma_end", c.gamma_end},
                     {"gamma_ramp_epochs", c.gamma_ramp_epochs},
                     {"rho_start", c.rho_start},
                     {"rho_end", c.rho_end},
                     {"rho_ramp_epochs", c.rho_ramp_epochs},
                     {"alpha0_encoder", c.alpha0_encoder},
                     {"alpha0_decoder", c.alpha0_decoder},
                     {"delta", c.delta},
                     {"e_max", c.e_max},
                     {"beta", c.beta},
                     {"similarity_mode", similarity_name(c.similarity_mode)},
                     {"similarity_include_biases", c.similarity_include_biases},
                     {"doubled_classes", c.doubled_classes},
                     {"momentum", c.momentum},
                     {"weight_decay", c.weight_decay}};
  j["model"] = {{"in_channels", t.model.in_channels},
                {"base_width", t.model.base_width},
                {"num_classes", t.model.num_classes},
                {"seed", t.model.seed}};
  j["augment"] = {{"crop", t.augment.crop},
                  {"scale_jitter", t.augment.scale_jitter},
                  {"scale_min", t.augment.scale_min},
                  {"scale_max", t.augment.scale_max},
                  {"flip_probability", t.augment.flip_probability}};
  j["scene"] = to_json(config.scene);
  j["source_domain"] = to_json(config.source_domain);
  j["target_domain"] = to_json(config.target_domain);
  j["data"] = {{"source", config.counts.source},
               {"target", config.counts.target},
               {"validation", config.counts.validation}};
  return j;
}

RunConfig parse_run_config(const json& j) {
  RunConfig config;
  auto& t = config.train;
  Fields f(j, "config");
  std::string mode(mode_name(t.mode));
  f.get("mode", mode);
  const auto parsed = parse_mode(mode);
  if (!parsed) throw ConfigError("config.mode: unknown mode '" + mode + "'");
  t.mode = *parsed;
  f.get("seed", t.seed);
  f.get("batch_size", t.batch_size);
  f.get("iterations_per_epoch", t.iterations_per_epoch);
  f.get("source_pack", t.source_pack);
  f.get("target_pack", t.target_pack);
  f.get("val_pack", t.val_pack);
  f.get("output_dir", t.output_dir);
  if (const json* c = f.child("curriculum")) parse_curriculum(*c, t.curriculum);
  if (const json* m = f.child("model")) parse_model(*m, t.model);
  if (const json* a = f.child("augment")) parse_augment(*a, t.augment);
  if (const json* s = f.child("scene")) parse_scene(*s, config.scene);
  if (const json* d = f.child("source_domain")) parse_domain(*d, "source_domain", config.source_domain);
  if (const json* d = f.child("target_domain")) parse_domain(*d, "target_domain", config.target_domain);
  if (const json* d = f.child("data")) parse_counts(*d, config.counts);
  f.finish();
  config.validate();
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(FormatError::Kind::io, "cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return parse_run_config(j);
}

}  // namespace proxyseg
