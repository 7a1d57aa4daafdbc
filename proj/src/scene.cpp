#include "drmn/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "drmn/errors.hpp"

namespace drmn {

namespace {

std::vector<double> unit_gaussian(RngState& rng, std::size_t n) {
  std::vector<double> v(n);
  double norm = 0.0;
  for (double& x : v) {
    x = rng.normal();
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

Geometry random_geometry(ShapeKind kind, std::size_t height, std::size_t width, RngState& rng) {
  const double h = static_cast<double>(height);
  const double w = static_cast<double>(width);
  const double extent = std::min(h, w);
  switch (kind) {
    case ShapeKind::disc: {
      const double r = rng.uniform(0.12, 0.28) * extent;
      return Disc{rng.uniform(0.0, h), rng.uniform(0.0, w), r};
    }
    case ShapeKind::rectangle: {
      const double bh = rng.uniform(0.2, 0.5) * h;
      const double bw = rng.uniform(0.2, 0.5) * w;
      const double top = rng.uniform(0.0, h - bh);
      const double left = rng.uniform(0.0, w - bw);
      return Box{top, left, top + bh, left + bw};
    }
    case ShapeKind::stripe: {
      const bool horizontal = rng.uniform() < 0.5;
      const double span = horizontal ? h : w;
      const double thickness = rng.uniform(0.2, 0.4) * span;
      const double start = rng.uniform(0.0, span - thickness);
      if (horizontal) return Box{start, 0.0, start + thickness, w};
      return Box{0.0, start, h, start + thickness};
    }
  }
  throw ContractError("unknown shape kind");
}

}  // namespace

const char* to_string(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::disc: return "disc";
    case ShapeKind::rectangle: return "rectangle";
    case ShapeKind::stripe: return "stripe";
  }
  return "?";
}

ShapeKind shape_kind_from_string(const std::string& name) {
  if (name == "disc") return ShapeKind::disc;
  if (name == "rectangle") return ShapeKind::rectangle;
  if (name == "stripe") return ShapeKind::stripe;
  throw ConfigError("unknown shape kind '" + name + "'");
}

void SceneConfig::validate() const {
  pyramid_shapes(height, width);
  if (channels == 0 || channels % 4 != 0) throw ConfigError("channels must be a positive multiple of 4");
  if (phrase_dim == 0) throw ConfigError("phrase_dim must be positive");
  if (min_objects < 1 || max_objects < min_objects) {
    throw ConfigError("object counts need 1 <= min_objects <= max_objects");
  }
  if (num_classes < max_objects) throw ConfigError("num_classes must be >= max_objects");
  if (!(plural_prob >= 0.0 && plural_prob <= 1.0)) throw ConfigError("plural_prob must lie in [0, 1]");
  if (!(stuff_prob >= 0.0 && stuff_prob <= 1.0)) throw ConfigError("stuff_prob must lie in [0, 1]");
  if (!(instance_jitter >= 0.0)) throw ConfigError("instance_jitter must be non-negative");
  if (!(phrase_jitter >= 0.0)) throw ConfigError("phrase_jitter must be non-negative");
  if (thing_kinds.empty() && stuff_prob < 1.0) throw ConfigError("no thing kinds allowed");
  for (ShapeKind k : thing_kinds) {
    if (k == ShapeKind::stripe) throw ConfigError("stripes are stuff, not a thing kind");
  }
}

Palette Palette::make(const SceneConfig& cfg) {
  RngState rng(cfg.palette_seed);
  const std::size_t c = cfg.channels, d = cfg.phrase_dim;
  std::vector<double> protos;
  protos.reserve(cfg.num_classes * c);
  for (std::size_t k = 0; k < cfg.num_classes; ++k) {
    auto v = unit_gaussian(rng, c);
    protos.insert(protos.end(), v.begin(), v.end());
  }
  Palette p;
  p.prototypes = Tensor::matrix(cfg.num_classes, c, std::move(protos));
  p.background = Tensor::vector(unit_gaussian(rng, c));
  std::vector<double> proj(c * d);
  const double s = 1.0 / std::sqrt(static_cast<double>(c));
  for (double& x : proj) x = rng.normal() * s;
  p.text_projection = Tensor::matrix(c, d, std::move(proj));
  return p;
}

std::vector<double> Palette::embed(std::size_t class_id) const {
  return embed(class_id, std::vector<double>(prototypes.cols(), 0.0));
}

std::vector<double> Palette::embed(std::size_t class_id, const std::vector<double>& shift) const {
  const std::size_t c = prototypes.cols(), d = text_projection.cols();
  if (class_id >= prototypes.rows()) throw ContractError("class id out of range");
  if (shift.size() != c) throw ContractError("embedding shift has wrong length");
  std::vector<double> g(d, 0.0);
  for (std::size_t i = 0; i < c; ++i) {
    const double p = prototypes(class_id, i) + shift[i];
    for (std::size_t j = 0; j < d; ++j) g[j] += p * text_projection(i, j);
  }
  return g;
}

std::vector<double> rasterize(const Geometry& geometry, std::size_t height, std::size_t width) {
  std::vector<double> mask(height * width, 0.0);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const double py = static_cast<double>(y) + 0.5;
      const double px = static_cast<double>(x) + 0.5;
      bool in = false;
      if (const auto* d = std::get_if<Disc>(&geometry)) {
        const double dy = py - d->cy, dx = px - d->cx;
        in = dy * dy + dx * dx <= d->radius * d->radius;
      } else {
        const auto& b = std::get<Box>(geometry);
        in = py >= b.top && py < b.bottom && px >= b.left && px < b.right;
      }
      mask[y * width + x] = in ? 1.0 : 0.0;
    }
  }
  return mask;
}

void finalize_scene(SyntheticScene& scene, const Palette& palette) {
  const std::size_t hw = scene.height * scene.width;
  scene.background = palette.background.to_vector();
  std::vector<std::vector<double>> object_masks;
  std::vector<double> flat_objects;
  for (const auto& obj : scene.objects) {
    auto m = rasterize(obj.geometry, scene.height, scene.width);
    if (std::accumulate(m.begin(), m.end(), 0.0) == 0.0) {
      throw ContractError("scene object has an empty mask");
    }
    flat_objects.insert(flat_objects.end(), m.begin(), m.end());
    object_masks.push_back(std::move(m));
  }
  if (!scene.objects.empty()) {
    scene.object_masks = Tensor::matrix(scene.objects.size(), hw, std::move(flat_objects));
  }
  if (scene.phrases.empty()) return;
  std::vector<double> masks(scene.phrases.size() * hw, 0.0);
  std::vector<double> emb;
  for (std::size_t j = 0; j < scene.phrases.size(); ++j) {
    for (std::size_t o : scene.phrases[j].objects) {
      for (std::size_t i = 0; i < hw; ++i) {
        if (object_masks.at(o)[i] > 0.0) masks[j * hw + i] = 1.0;
      }
    }
    auto g = palette.embed(scene.phrases[j].class_id);
    emb.insert(emb.end(), g.begin(), g.end());
  }
  scene.masks = Tensor::matrix(scene.phrases.size(), hw, std::move(masks));
  scene.phrase_embeddings =
      Tensor::matrix(scene.phrases.size(), palette.text_projection.cols(), std::move(emb));
}

SyntheticScene gen_scene(const SceneConfig& cfg, RngState& rng) {
  cfg.validate();
  const Palette palette = Palette::make(cfg);
  SyntheticScene scene;
  scene.height = cfg.height;
  scene.width = cfg.width;
  scene.seed = rng.seed();

  const std::size_t n_obj = cfg.min_objects + rng.below(cfg.max_objects - cfg.min_objects + 1);

  // Optional plural pair (a, b): b copies a's class and thing/stuff category.
  bool plural = false;
  std::size_t a = 0, b = 0;
  if (n_obj >= 2 && rng.uniform() < cfg.plural_prob) {
    plural = true;
    a = rng.below(n_obj);
    b = rng.below(n_obj - 1);
    if (b >= a) ++b;
    if (b < a) std::swap(a, b);
  }

  std::vector<ShapeKind> kinds(n_obj);
  for (auto& k : kinds) {
    k = (rng.uniform() < cfg.stuff_prob || cfg.thing_kinds.empty())
            ? ShapeKind::stripe
            : cfg.thing_kinds[rng.below(cfg.thing_kinds.size())];
  }
  if (plural) {
    if (kinds[a] == ShapeKind::stripe) {
      kinds[b] = ShapeKind::stripe;
    } else if (kinds[b] == ShapeKind::stripe) {
      kinds[b] = cfg.thing_kinds[rng.below(cfg.thing_kinds.size())];
    }
  }

  // Distinct classes per phrase: partial Fisher-Yates over the palette.
  const std::size_t n_phrases = n_obj - (plural ? 1 : 0);
  std::vector<std::size_t> classes(cfg.num_classes);
  std::iota(classes.begin(), classes.end(), 0);
  for (std::size_t i = 0; i < n_phrases; ++i) {
    std::swap(classes[i], classes[i + rng.below(cfg.num_classes - i)]);
  }

  const double jitter = cfg.instance_jitter / std::sqrt(static_cast<double>(cfg.channels));
  std::size_t next_phrase = 0;
  std::vector<std::size_t> phrase_of(n_obj);
  for (std::size_t o = 0; o < n_obj; ++o) {
    SceneObject obj;
    obj.kind = kinds[o];
    obj.geometry = random_geometry(obj.kind, cfg.height, cfg.width, rng);
    if (plural && o == b) {
      phrase_of[o] = phrase_of[a];
      scene.phrases[phrase_of[a]].objects.push_back(o);
      scene.phrases[phrase_of[a]].plural = true;
    } else {
      phrase_of[o] = next_phrase;
      Phrase p;
      p.objects = {o};
      p.class_id = classes[next_phrase];
      p.stuff = obj.kind == ShapeKind::stripe;
      scene.phrases.push_back(p);
      ++next_phrase;
    }
    obj.class_id = scene.phrases[phrase_of[o]].class_id;
    obj.appearance.resize(cfg.channels);
    for (std::size_t i = 0; i < cfg.channels; ++i) {
      obj.appearance[i] = palette.prototypes(obj.class_id, i) + jitter * rng.normal();
    }
    scene.objects.push_back(std::move(obj));
  }
  finalize_scene(scene, palette);
  if (cfg.phrase_jitter > 0.0 && !scene.phrases.empty()) {
    // separate stream so the geometry draws do not depend on this knob
    RngState pr = rng.fork(0x70687261);
    const double pj = cfg.phrase_jitter / std::sqrt(static_cast<double>(cfg.channels));
    std::vector<double> emb;
    for (const auto& ph : scene.phrases) {
      std::vector<double> shift(cfg.channels);
      for (double& v : shift) v = pj * pr.normal();
      const auto g = palette.embed(ph.class_id, shift);
      emb.insert(emb.end(), g.begin(), g.end());
    }
    scene.phrase_embeddings = Tensor::matrix(scene.phrases.size(), cfg.phrase_dim, std::move(emb));
  }
  return scene;
}

FeaturePyramid synth_pyramid(const SyntheticScene& scene, double sigma, RngState& rng) {
  if (!(sigma >= 0.0)) throw ParameterError("noise sigma must be non-negative");
  const auto shapes = pyramid_shapes(scene.height, scene.width);
  const std::size_t c = scene.channels();
  const std::size_t n_obj = scene.objects.size();
  auto obj_mask = [&](std::size_t o, std::size_t y, std::size_t x) {
    return scene.object_masks(o, y * scene.width + x) > 0.0;
  };

  FeaturePyramid pyr;
  pyr.channels = c;
  pyr.shapes = shapes;
  for (std::size_t li = 0; li < kNumLevels; ++li) {
    const std::size_t stride = std::size_t{1} << kPyramidLevels[li];
    const LevelShape s = shapes[li];
    std::vector<double> feats(s.cells() * c, 0.0);
    std::vector<double> counts(n_obj);
    for (std::size_t i = 0; i < s.rows; ++i) {
      for (std::size_t j = 0; j < s.cols; ++j) {
        std::fill(counts.begin(), counts.end(), 0.0);
        double uncovered = 0.0;
        for (std::size_t y = i * stride; y < (i + 1) * stride; ++y) {
          for (std::size_t x = j * stride; x < (j + 1) * stride; ++x) {
            bool any = false;
            for (std::size_t o = 0; o < n_obj; ++o) {
              if (obj_mask(o, y, x)) {
                counts[o] += 1.0;
                any = true;
              }
            }
            if (!any) uncovered += 1.0;
          }
        }
        double* dst = feats.data() + (i * s.cols + j) * c;
        double total = uncovered;
        for (std::size_t ch = 0; ch < c; ++ch) dst[ch] = uncovered * scene.background[ch];
        for (std::size_t o = 0; o < n_obj; ++o) {
          if (counts[o] == 0.0) continue;
          total += counts[o];
          for (std::size_t ch = 0; ch < c; ++ch) dst[ch] += counts[o] * scene.objects[o].appearance[ch];
        }
        for (std::size_t ch = 0; ch < c; ++ch) {
          dst[ch] /= total;
          if (sigma > 0.0) dst[ch] += sigma * rng.normal();
        }
      }
    }
    pyr.features.push_back(Tensor::matrix(s.cells(), c, std::move(feats)));
    pyr.ref_points.push_back(make_grid(s));
  }
  return pyr;
}

}  // namespace drmn
