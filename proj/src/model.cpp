#include "drmn/model.hpp"

#include <cmath>

#include "drmn/dtf.hpp"
#include "drmn/errors.hpp"
#include "drmn/matching.hpp"

namespace drmn {

const char* to_string(Sharing s) {
  switch (s) {
    case Sharing::rounds: return "rounds";
    case Sharing::per_round: return "per-round";
    case Sharing::encoder: return "encoder";
  }
  return "?";
}

Sharing sharing_from_string(const std::string& name) {
  if (name == "rounds") return Sharing::rounds;
  if (name == "per-round") return Sharing::per_round;
  if (name == "encoder") return Sharing::encoder;
  throw ConfigError("unknown sharing scheme '" + name + "' (rounds, per-round, encoder)");
}

void ModelConfig::validate() const {
  const auto shapes = pyramid_shapes(height, width);
  if (channels == 0 || channels % 4 != 0) throw ConfigError("channels must be a positive multiple of 4");
  if (phrase_dim == 0) throw ConfigError("phrase_dim must be positive");
  if (heads == 0 || channels % heads != 0) throw ConfigError("heads must divide channels");
  if (points == 0) throw ConfigError("points must be positive");
  if (!(ffn_ratio > 0.0) || !std::isfinite(ffn_ratio)) throw ConfigError("ffn_ratio must be positive");
  ffn_hidden(channels, ffn_ratio);
  const std::size_t cells = shapes[kMatchLevel].cells();
  if (topk == 0 || topk > cells) {
    throw ConfigError("topk must be in [1, " + std::to_string(cells) + "] for a " +
                      std::to_string(height) + "x" + std::to_string(width) + " image");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
  if (!(pos_temperature > 0.0) || !std::isfinite(pos_temperature)) {
    throw ConfigError("pos_temperature must be positive");
  }
  if (!(norm_eps > 0.0)) throw ConfigError("norm_eps must be positive");
  if (!(offset_init >= 0.0) || !std::isfinite(offset_init)) throw ConfigError("offset_init must be >= 0");
  if (sharing == Sharing::encoder && encoder_layers == 0 && rounds > 0) {
    throw ConfigError("sharing = encoder needs at least one encoder layer");
  }
}

LevelShape ModelConfig::match_shape() const { return pyramid_shapes(height, width)[kMatchLevel]; }

nlohmann::json ModelConfig::to_json() const {
  return {{"height", height},
          {"width", width},
          {"channels", channels},
          {"phrase_dim", phrase_dim},
          {"heads", heads},
          {"points", points},
          {"ffn_ratio", ffn_ratio},
          {"encoder_layers", encoder_layers},
          {"rounds", rounds},
          {"topk", topk},
          {"dropout", dropout},
          {"ffn_residual", ffn_residual},
          {"sharing", to_string(sharing)},
          {"pos_temperature", pos_temperature},
          {"norm_eps", norm_eps},
          {"offset_init", offset_init}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.height = j.at("height").get<std::size_t>();
    c.width = j.at("width").get<std::size_t>();
    c.channels = j.at("channels").get<std::size_t>();
    c.phrase_dim = j.at("phrase_dim").get<std::size_t>();
    c.heads = j.at("heads").get<std::size_t>();
    c.points = j.at("points").get<std::size_t>();
    c.ffn_ratio = j.at("ffn_ratio").get<double>();
    c.encoder_layers = j.at("encoder_layers").get<std::size_t>();
    c.rounds = j.at("rounds").get<std::size_t>();
    c.topk = j.at("topk").get<std::size_t>();
    c.dropout = j.at("dropout").get<double>();
    c.ffn_residual = j.at("ffn_residual").get<bool>();
    c.sharing = sharing_from_string(j.at("sharing").get<std::string>());
    c.pos_temperature = j.at("pos_temperature").get<double>();
    c.norm_eps = j.at("norm_eps").get<double>();
    c.offset_init = j.at("offset_init").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("model metadata: ") + e.what());
  }
  c.validate();
  return c;
}

Model Model::init(const ModelConfig& cfg, RngState& rng) {
  cfg.validate();
  Model m;
  m.config = cfg;
  RngState proj_rng = rng.fork(0);
  m.phrase_projection = xavier_uniform(cfg.phrase_dim, cfg.channels, proj_rng);
  for (std::size_t t = 0; t < cfg.encoder_layers; ++t) {
    RngState r = rng.fork(100 + t);
    m.encoder.push_back(DeformLayerParams::init(cfg.channels, cfg.heads, cfg.points, cfg.ffn_ratio, r,
                                                cfg.offset_init));
  }
  std::size_t refine_count = 0, cross_count = 0;
  if (cfg.rounds > 0) {
    switch (cfg.sharing) {
      case Sharing::rounds: refine_count = cross_count = 1; break;
      case Sharing::per_round: refine_count = cross_count = cfg.rounds; break;
      case Sharing::encoder: cross_count = 1; break;
    }
  }
  for (std::size_t i = 0; i < refine_count; ++i) {
    RngState r = rng.fork(200 + i);
    m.refine.push_back(DeformLayerParams::init(cfg.channels, cfg.heads, cfg.points, cfg.ffn_ratio, r,
                                               cfg.offset_init));
  }
  for (std::size_t i = 0; i < cross_count; ++i) {
    RngState r = rng.fork(300 + i);
    m.cross.push_back(CrossAttnParams::init(cfg.channels, cfg.heads, cfg.ffn_ratio, r));
  }
  return m;
}

NamedTensors Model::named_parameters() const {
  NamedTensors out;
  out.emplace_back("phrase_projection", phrase_projection);
  for (std::size_t t = 0; t < encoder.size(); ++t) encoder[t].append_named(out, "encoder" + std::to_string(t));
  for (std::size_t i = 0; i < refine.size(); ++i) refine[i].append_named(out, "refine" + std::to_string(i));
  for (std::size_t i = 0; i < cross.size(); ++i) cross[i].append_named(out, "cross" + std::to_string(i));
  return out;
}

std::vector<Tensor> Model::parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const Tensor& t : parameters()) n += t.size();
  return n;
}

const DeformLayerParams& Model::refine_for_round(std::size_t r) const {
  if (config.sharing == Sharing::encoder) return encoder.back();
  return config.sharing == Sharing::per_round ? refine.at(r) : refine.at(0);
}

const CrossAttnParams& Model::cross_for_round(std::size_t r) const {
  return config.sharing == Sharing::per_round ? cross.at(r) : cross.at(0);
}

void Model::save(const std::filesystem::path& dir) const {
  Bundle b;
  b.tensors = named_parameters();
  b.metadata = {{"model", config.to_json()}};
  write_bundle(dir, b);
}

Model Model::load(const std::filesystem::path& dir) {
  Bundle b = read_bundle(dir);
  if (!b.metadata.contains("model")) throw IoError("checkpoint " + dir.string() + " has no model metadata");
  ModelConfig cfg = ModelConfig::from_json(b.metadata.at("model"));
  RngState rng(0);
  Model m = init(cfg, rng);
  load_into(m.phrase_projection, b, "phrase_projection");
  for (std::size_t t = 0; t < m.encoder.size(); ++t) m.encoder[t].load_named(b, "encoder" + std::to_string(t));
  for (std::size_t i = 0; i < m.refine.size(); ++i) m.refine[i].load_named(b, "refine" + std::to_string(i));
  for (std::size_t i = 0; i < m.cross.size(); ++i) m.cross[i].load_named(b, "cross" + std::to_string(i));
  if (b.tensors.size() != m.named_parameters().size()) {
    throw IoError("checkpoint " + dir.string() + " has " + std::to_string(b.tensors.size()) +
                  " tensors, model expects " + std::to_string(m.named_parameters().size()));
  }
  return m;
}

ForwardResult forward(Tape& tape, const Model& model, const FeaturePyramid& pyramid,
                      const Tensor& phrases, RngState& rng, bool training) {
  const ModelConfig& cfg = model.config;
  const auto shapes = pyramid_shapes(cfg.height, cfg.width);
  if (pyramid.shapes != shapes || pyramid.channels != cfg.channels) {
    throw DimensionError("forward: feature pyramid does not match a " + std::to_string(cfg.height) + "x" +
                         std::to_string(cfg.width) + "x" + std::to_string(cfg.channels) + " model");
  }
  if (phrases.rank() != 2 || phrases.cols() != cfg.phrase_dim || phrases.rows() == 0) {
    throw DimensionError("forward: phrases " + shape_string(phrases.shape()));
  }
  DeformOptions opts{cfg.dropout, training, cfg.ffn_residual, cfg.norm_eps};
  PosEncoder pos(cfg.channels, cfg.pos_temperature);

  LevelMaps raw{pyramid.features, shapes};
  std::vector<Tensor> queries;
  for (std::size_t l = 0; l < kNumLevels; ++l) {
    queries.push_back(add(tape, pyramid.features[l], pos.encode(pyramid.ref_points[l])));
  }
  Tensor q = concat_rows(tape, queries);
  Tensor encoded = stack_encoder(tape, q, raw, pyramid.stacked_ref_points(tape), model.encoder, opts, rng);

  ForwardResult res;
  res.encoded = split_levels(tape, encoded, shapes);
  const LevelShape target = shapes[kMatchLevel];
  FusedMap fused = fuse_levels(tape, res.encoded, shapes, target);
  Tensor ghat = project_phrases(tape, phrases, model.phrase_projection);

  res.state = begin_rounds(tape, fused.features, target, ghat, cfg.height, cfg.width);
  LevelMaps maps{res.encoded, shapes};
  RoundSpec spec;
  spec.k = cfg.topk;
  spec.maps = &maps;
  spec.pos = &pos;
  spec.opts = opts;
  for (std::size_t r = 0; r < cfg.rounds; ++r) {
    spec.refine.push_back(&model.refine_for_round(r));
    spec.cross.push_back(&model.cross_for_round(r));
  }
  run_rounds(tape, res.state, spec, rng);
  res.history = res.state.history;
  return res;
}

}  // namespace drmn
