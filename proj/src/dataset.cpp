#include "drmn/dataset.hpp"

#include <cstdio>

#include "drmn/dtf.hpp"
#include "drmn/errors.hpp"

namespace drmn {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string scene_dir_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "scene_%05zu", i);
  return buf;
}

json geometry_to_json(const Geometry& g) {
  if (const auto* d = std::get_if<Disc>(&g)) {
    return {{"type", "disc"}, {"cy", d->cy}, {"cx", d->cx}, {"radius", d->radius}};
  }
  const auto& b = std::get<Box>(g);
  return {{"type", "box"}, {"top", b.top}, {"left", b.left}, {"bottom", b.bottom}, {"right", b.right}};
}

Geometry geometry_from_json(const json& j) {
  const auto type = j.at("type").get<std::string>();
  if (type == "disc") return Disc{j.at("cy").get<double>(), j.at("cx").get<double>(), j.at("radius").get<double>()};
  if (type == "box") {
    return Box{j.at("top").get<double>(), j.at("left").get<double>(), j.at("bottom").get<double>(),
               j.at("right").get<double>()};
  }
  throw IoError("unknown geometry type '" + type + "'");
}

json scene_to_json(const SyntheticScene& s) {
  json objects = json::array();
  for (const auto& o : s.objects) {
    objects.push_back({{"kind", to_string(o.kind)},
                       {"geometry", geometry_to_json(o.geometry)},
                       {"class_id", o.class_id},
                       {"appearance", o.appearance}});
  }
  json phrases = json::array();
  for (const auto& p : s.phrases) {
    phrases.push_back({{"objects", p.objects}, {"class_id", p.class_id}, {"plural", p.plural}, {"stuff", p.stuff}});
  }
  return {{"height", s.height}, {"width", s.width},     {"seed", s.seed},
          {"objects", objects}, {"phrases", phrases}, {"background", s.background}};
}

SyntheticScene scene_from_json(const json& j) {
  SyntheticScene s;
  s.height = j.at("height").get<std::size_t>();
  s.width = j.at("width").get<std::size_t>();
  s.seed = j.at("seed").get<std::uint64_t>();
  s.background = j.at("background").get<std::vector<double>>();
  for (const auto& o : j.at("objects")) {
    SceneObject obj;
    obj.kind = shape_kind_from_string(o.at("kind").get<std::string>());
    obj.geometry = geometry_from_json(o.at("geometry"));
    obj.class_id = o.at("class_id").get<std::size_t>();
    obj.appearance = o.at("appearance").get<std::vector<double>>();
    s.objects.push_back(std::move(obj));
  }
  for (const auto& p : j.at("phrases")) {
    Phrase ph;
    ph.objects = p.at("objects").get<std::vector<std::size_t>>();
    ph.class_id = p.at("class_id").get<std::size_t>();
    ph.plural = p.at("plural").get<bool>();
    ph.stuff = p.at("stuff").get<bool>();
    for (std::size_t o : ph.objects) {
      if (o >= s.objects.size()) throw IoError("phrase refers to missing object " + std::to_string(o));
    }
    s.phrases.push_back(std::move(ph));
  }
  return s;
}

json parse_json_file(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace

json scene_config_to_json(const SceneConfig& c) {
  json kinds = json::array();
  for (ShapeKind k : c.thing_kinds) kinds.push_back(to_string(k));
  return {{"height", c.height},
          {"width", c.width},
          {"channels", c.channels},
          {"phrase_dim", c.phrase_dim},
          {"min_objects", c.min_objects},
          {"max_objects", c.max_objects},
          {"num_classes", c.num_classes},
          {"plural_prob", c.plural_prob},
          {"stuff_prob", c.stuff_prob},
          {"instance_jitter", c.instance_jitter},
          {"phrase_jitter", c.phrase_jitter},
          {"thing_kinds", kinds},
          {"palette_seed", c.palette_seed}};
}

SceneConfig scene_config_from_json(const json& j) {
  SceneConfig c;
  c.height = j.at("height").get<std::size_t>();
  c.width = j.at("width").get<std::size_t>();
  c.channels = j.at("channels").get<std::size_t>();
  c.phrase_dim = j.at("phrase_dim").get<std::size_t>();
  c.min_objects = j.at("min_objects").get<std::size_t>();
  c.max_objects = j.at("max_objects").get<std::size_t>();
  c.num_classes = j.at("num_classes").get<std::size_t>();
  c.plural_prob = j.at("plural_prob").get<double>();
  c.stuff_prob = j.at("stuff_prob").get<double>();
  c.instance_jitter = j.at("instance_jitter").get<double>();
  c.phrase_jitter = j.value("phrase_jitter", 0.0);
  c.thing_kinds.clear();
  for (const auto& k : j.at("thing_kinds")) c.thing_kinds.push_back(shape_kind_from_string(k.get<std::string>()));
  c.palette_seed = j.at("palette_seed").get<std::uint64_t>();
  c.validate();
  return c;
}

Dataset generate_dataset(const SceneConfig& cfg, double noise_sigma, std::size_t count,
                         std::uint64_t seed) {
  cfg.validate();
  if (!(noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be >= 0");
  Dataset d;
  d.scene_config = cfg;
  d.noise_sigma = noise_sigma;
  d.seed = seed;
  const RngState root(seed);
  for (std::size_t i = 0; i < count; ++i) {
    RngState stream = root.fork(i);
    RngState scene_rng = stream.fork(0);
    RngState noise_rng = stream.fork(1);
    Sample s;
    s.scene = gen_scene(cfg, scene_rng);
    s.pyramid = synth_pyramid(s.scene, noise_sigma, noise_rng);
    d.scene_seeds.push_back(stream.seed());
    d.samples.push_back(std::move(s));
  }
  return d;
}

void save_dataset(const fs::path& dir, const Dataset& data) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  json scenes = json::array();
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    const Sample& s = data.samples[i];
    const std::string name = scene_dir_name(i);
    const fs::path sd = dir / name;
    fs::create_directories(sd, ec);
    if (ec) throw IoError("cannot create " + sd.string() + ": " + ec.message());
    write_file(sd / "scene.json", scene_to_json(s.scene).dump(2) + "\n");
    write_dtf(sd / "masks.dtf", s.scene.masks);
    write_dtf(sd / "phrases.dtf", s.scene.phrase_embeddings);
    for (std::size_t l = 0; l < kNumLevels; ++l) {
      write_dtf(sd / ("features_l" + std::to_string(kPyramidLevels[l]) + ".dtf"), s.pyramid.features[l]);
    }
    scenes.push_back({{"dir", name}, {"seed", data.scene_seeds.at(i)}, {"phrases", s.scene.phrases.size()}});
  }
  json manifest = {{"format", "drmn-dataset"},
                   {"version", 1},
                   {"seed", data.seed},
                   {"count", data.samples.size()},
                   {"noise_sigma", data.noise_sigma},
                   {"scene_config", scene_config_to_json(data.scene_config)},
                   {"scenes", scenes}};
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

Dataset load_dataset(const fs::path& dir) {
  const fs::path mpath = dir / "manifest.json";
  if (!fs::exists(mpath)) throw IoError("no dataset manifest at " + mpath.string());
  const json manifest = parse_json_file(mpath);
  Dataset d;
  try {
    if (manifest.at("format").get<std::string>() != "drmn-dataset") {
      throw IoError(mpath.string() + ": not a dataset manifest");
    }
    d.seed = manifest.at("seed").get<std::uint64_t>();
    d.noise_sigma = manifest.at("noise_sigma").get<double>();
    d.scene_config = scene_config_from_json(manifest.at("scene_config"));
    const auto shapes = pyramid_shapes(d.scene_config.height, d.scene_config.width);
    for (const auto& entry : manifest.at("scenes")) {
      const fs::path sd = dir / entry.at("dir").get<std::string>();
      Sample s;
      s.scene = scene_from_json(parse_json_file(sd / "scene.json"));
      const std::size_t hw = s.scene.height * s.scene.width;
      std::vector<double> flat;
      for (const auto& o : s.scene.objects) {
        auto m = rasterize(o.geometry, s.scene.height, s.scene.width);
        flat.insert(flat.end(), m.begin(), m.end());
      }
      if (!s.scene.objects.empty()) s.scene.object_masks = Tensor::matrix(s.scene.objects.size(), hw, std::move(flat));
      s.scene.masks = read_dtf(sd / "masks.dtf");
      s.scene.phrase_embeddings = read_dtf(sd / "phrases.dtf");
      if (s.scene.masks.shape() != Shape{s.scene.phrases.size(), hw} ||
          s.scene.phrase_embeddings.shape() != Shape{s.scene.phrases.size(), d.scene_config.phrase_dim}) {
        throw IoError(sd.string() + ": masks or phrases do not match scene.json");
      }
      s.pyramid.channels = d.scene_config.channels;
      s.pyramid.shapes = shapes;
      for (std::size_t l = 0; l < kNumLevels; ++l) {
        Tensor f = read_dtf(sd / ("features_l" + std::to_string(kPyramidLevels[l]) + ".dtf"));
        if (f.shape() != Shape{shapes[l].cells(), d.scene_config.channels}) {
          throw IoError(sd.string() + ": level " + std::to_string(kPyramidLevels[l]) + " features have shape " +
                        shape_string(f.shape()));
        }
        s.pyramid.features.push_back(f);
        s.pyramid.ref_points.push_back(make_grid(shapes[l]));
      }
      d.scene_seeds.push_back(entry.at("seed").get<std::uint64_t>());
      d.samples.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw IoError(mpath.string() + ": " + e.what());
  }
  if (d.samples.size() != manifest.value("count", std::size_t{0})) {
    throw IoError(mpath.string() + ": scene count does not match manifest");
  }
  return d;
}

}  // namespace drmn
