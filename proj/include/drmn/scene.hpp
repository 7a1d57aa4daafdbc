#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "drmn/featuremaps.hpp"
#include "drmn/rng.hpp"
#include "drmn/tensor.hpp"

// Procedural stand-in for the image and text backbones: scenes made of
// discs and rectangles ("things") and full-width/height stripes ("stuff"),
// each phrase referring to one object or to a same-class group of objects.
namespace drmn {

enum class ShapeKind { disc, rectangle, stripe };

const char* to_string(ShapeKind kind);
ShapeKind shape_kind_from_string(const std::string& name);

/// Pixel-space geometry; pixel (y, x) is covered when its centre
/// (y + 0.5, x + 0.5) lies inside.
struct Disc {
  double cy = 0, cx = 0, radius = 0;
};
struct Box {
  double top = 0, left = 0, bottom = 0, right = 0;  // half-open
};
using Geometry = std::variant<Disc, Box>;

struct SceneObject {
  ShapeKind kind = ShapeKind::disc;
  Geometry geometry;
  std::size_t class_id = 0;
  std::vector<double> appearance;  // class prototype plus instance jitter, length c
};

struct Phrase {
  std::vector<std::size_t> objects;
  std::size_t class_id = 0;
  bool plural = false;
  bool stuff = false;
};

struct SceneConfig {
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t channels = 32;
  std::size_t phrase_dim = 32;
  std::size_t min_objects = 2;
  std::size_t max_objects = 4;
  std::size_t num_classes = 16;
  double plural_prob = 0.3;
  double stuff_prob = 0.3;
  double instance_jitter = 0.3;
  double phrase_jitter = 0.0;  // noise on the class vector a phrase describes
  std::vector<ShapeKind> thing_kinds{ShapeKind::disc, ShapeKind::rectangle};
  std::uint64_t palette_seed = 1234;

  void validate() const;
};

/// Dataset-wide class prototypes, background vector and text projection.
struct Palette {
  Tensor prototypes;       // num_classes x c, unit rows
  Tensor background;       // c
  Tensor text_projection;  // c x d

  static Palette make(const SceneConfig& cfg);
  /// Phrase embedding for a class: prototype row times the text projection.
  std::vector<double> embed(std::size_t class_id) const;
  /// Same, with `shift` added to the prototype row first.
  std::vector<double> embed(std::size_t class_id, const std::vector<double>& shift) const;
};

struct SyntheticScene {
  std::size_t height = 0;
  std::size_t width = 0;
  std::uint64_t seed = 0;
  std::vector<SceneObject> objects;
  std::vector<Phrase> phrases;
  std::vector<double> background;
  Tensor object_masks;       // objects x (h*w), binary
  Tensor masks;              // Y: phrases x (h*w), binary
  Tensor phrase_embeddings;  // G: phrases x d

  std::size_t channels() const { return background.size(); }
};

/// Binary coverage of one geometry on an h x w raster.
std::vector<double> rasterize(const Geometry& geometry, std::size_t height, std::size_t width);

SyntheticScene gen_scene(const SceneConfig& cfg, RngState& rng);

/// Rebuild masks and embeddings of a scene whose objects/phrases are known.
void finalize_scene(SyntheticScene& scene, const Palette& palette);

/// Level-l feature of a cell: pixel-coverage-weighted mean of the covering
/// objects' appearance vectors and the background vector (weighted by the
/// uncovered pixels), plus N(0, sigma^2) noise per entry.
FeaturePyramid synth_pyramid(const SyntheticScene& scene, double sigma, RngState& rng);

}  // namespace drmn
