#include "drmn/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <vector>

#include "drmn/dtf.hpp"
#include "drmn/errors.hpp"
#include "drmn/format.hpp"

namespace drmn {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty() || !std::isfinite(out)) {
    throw ConfigError(key + ": expected a finite number, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

struct Field {
  const char* key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

template <typename T>
Field size_field(const char* key, T RunConfig::*group, std::size_t T::*member) {
  return {key, [=](const RunConfig& c) { return std::to_string(c.*group.*member); },
          [=](RunConfig& c, const std::string& v) { c.*group.*member = parse_uint(key, v); }};
}

template <typename T>
Field real_field(const char* key, T RunConfig::*group, double T::*member) {
  return {key, [=](const RunConfig& c) { return format_double(c.*group.*member); },
          [=](RunConfig& c, const std::string& v) { c.*group.*member = parse_real(key, v); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      size_field("height", &RunConfig::model, &ModelConfig::height),
      size_field("width", &RunConfig::model, &ModelConfig::width),
      size_field("channels", &RunConfig::model, &ModelConfig::channels),
      size_field("phrase_dim", &RunConfig::model, &ModelConfig::phrase_dim),
      size_field("heads", &RunConfig::model, &ModelConfig::heads),
      size_field("points", &RunConfig::model, &ModelConfig::points),
      real_field("ffn_ratio", &RunConfig::model, &ModelConfig::ffn_ratio),
      size_field("encoder_layers", &RunConfig::model, &ModelConfig::encoder_layers),
      size_field("rounds", &RunConfig::model, &ModelConfig::rounds),
      size_field("topk", &RunConfig::model, &ModelConfig::topk),
      real_field("dropout", &RunConfig::model, &ModelConfig::dropout),
      {"ffn_residual", [](const RunConfig& c) { return std::string(c.model.ffn_residual ? "true" : "false"); },
       [](RunConfig& c, const std::string& v) { c.model.ffn_residual = parse_bool("ffn_residual", v); }},
      {"sharing", [](const RunConfig& c) { return std::string(to_string(c.model.sharing)); },
       [](RunConfig& c, const std::string& v) { c.model.sharing = sharing_from_string(v); }},
      real_field("pos_temperature", &RunConfig::model, &ModelConfig::pos_temperature),
      real_field("norm_eps", &RunConfig::model, &ModelConfig::norm_eps),
      real_field("offset_init", &RunConfig::model, &ModelConfig::offset_init),
      {"lambda_bce", [](const RunConfig& c) { return format_double(c.train.loss.lambda_bce); },
       [](RunConfig& c, const std::string& v) { c.train.loss.lambda_bce = parse_real("lambda_bce", v); }},
      {"lambda_dice", [](const RunConfig& c) { return format_double(c.train.loss.lambda_dice); },
       [](RunConfig& c, const std::string& v) { c.train.loss.lambda_dice = parse_real("lambda_dice", v); }},
      {"dice_eps", [](const RunConfig& c) { return format_double(c.train.loss.dice_eps); },
       [](RunConfig& c, const std::string& v) { c.train.loss.dice_eps = parse_real("dice_eps", v); }},
      {"threshold", [](const RunConfig& c) { return format_double(c.threshold); },
       [](RunConfig& c, const std::string& v) { c.threshold = parse_real("threshold", v); }},
      real_field("lr", &RunConfig::train, &TrainConfig::lr),
      size_field("epochs", &RunConfig::train, &TrainConfig::epochs),
      size_field("batch_size", &RunConfig::train, &TrainConfig::batch_size),
      real_field("beta1", &RunConfig::train, &TrainConfig::beta1),
      real_field("beta2", &RunConfig::train, &TrainConfig::beta2),
      real_field("adam_eps", &RunConfig::train, &TrainConfig::adam_eps),
      {"scenes", [](const RunConfig& c) { return std::to_string(c.scenes); },
       [](RunConfig& c, const std::string& v) { c.scenes = parse_uint("scenes", v); }},
      {"eval_scenes", [](const RunConfig& c) { return std::to_string(c.eval_scenes); },
       [](RunConfig& c, const std::string& v) { c.eval_scenes = parse_uint("eval_scenes", v); }},
      {"noise_sigma", [](const RunConfig& c) { return format_double(c.noise_sigma); },
       [](RunConfig& c, const std::string& v) { c.noise_sigma = parse_real("noise_sigma", v); }},
      size_field("min_objects", &RunConfig::scene, &SceneConfig::min_objects),
      size_field("max_objects", &RunConfig::scene, &SceneConfig::max_objects),
      size_field("num_classes", &RunConfig::scene, &SceneConfig::num_classes),
      real_field("plural_prob", &RunConfig::scene, &SceneConfig::plural_prob),
      real_field("stuff_prob", &RunConfig::scene, &SceneConfig::stuff_prob),
      real_field("instance_jitter", &RunConfig::scene, &SceneConfig::instance_jitter),
      real_field("phrase_jitter", &RunConfig::scene, &SceneConfig::phrase_jitter),
      {"thing_kinds",
       [](const RunConfig& c) {
         std::string out;
         for (ShapeKind k : c.scene.thing_kinds) out += (out.empty() ? "" : ",") + std::string(to_string(k));
         return out;
       },
       [](RunConfig& c, const std::string& v) {
         c.scene.thing_kinds.clear();
         std::size_t start = 0;
         while (start <= v.size()) {
           const auto comma = v.find(',', start);
           const std::string item = trim(std::string_view(v).substr(start, comma - start));
           if (!item.empty()) c.scene.thing_kinds.push_back(shape_kind_from_string(item));
           if (comma == std::string::npos) break;
           start = comma + 1;
         }
       }},
      {"palette_seed", [](const RunConfig& c) { return std::to_string(c.scene.palette_seed); },
       [](RunConfig& c, const std::string& v) { c.scene.palette_seed = parse_uint("palette_seed", v); }},
      {"seed", [](const RunConfig& c) { return std::to_string(c.seed); },
       [](RunConfig& c, const std::string& v) { c.seed = parse_uint("seed", v); }},
  };
  return f;
}

}  // namespace

void RunConfig::sync() {
  scene.height = model.height;
  scene.width = model.width;
  scene.channels = model.channels;
  scene.phrase_dim = model.phrase_dim;
}

void RunConfig::validate() const {
  model.validate();
  scene.validate();
  train.validate();
  if (scene.height != model.height || scene.width != model.width || scene.channels != model.channels ||
      scene.phrase_dim != model.phrase_dim) {
    throw ConfigError("scene and model dimensions disagree");
  }
  if (!(noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be >= 0");
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("threshold must be in (0, 1)");
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const Field& f : fields()) out += std::string(f.key) + " = " + f.get(*this) + "\n";
  return out;
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const Field& f : fields()) j[f.key] = f.get(*this);
  return j;
}

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const Field& f : fields()) {
    if (key == f.key) {
      f.set(cfg, value);
      cfg.sync();
      return;
    }
  }
  throw ConfigError("unknown key '" + key + "'");
}

RunConfig parse_run_config(std::string_view text, const std::string& source) {
  RunConfig cfg;
  cfg.sync();
  std::vector<std::string> seen;
  std::size_t line_no = 0, pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(raw.substr(0, hash));
    if (!line.empty()) {
      const auto eq = line.find('=');
      const std::string where = source + ":" + std::to_string(line_no) + ": ";
      if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
      const std::string key = trim(std::string_view(line).substr(0, eq));
      const std::string value = trim(std::string_view(line).substr(eq + 1));
      if (std::find(seen.begin(), seen.end(), key) != seen.end()) {
        throw ConfigError(where + "duplicate key '" + key + "'");
      }
      seen.push_back(key);
      try {
        set_config_value(cfg, key, value);
      } catch (const ConfigError& e) {
        throw ConfigError(where + e.what());
      }
    }
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path) { return parse_run_config(read_file(path), path); }

}  // namespace drmn
