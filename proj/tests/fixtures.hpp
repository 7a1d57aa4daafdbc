#pragma once

#include <vector>

#include "drmn/aggregation.hpp"
#include "drmn/deform_attn.hpp"
#include "drmn/featuremaps.hpp"
#include "drmn/model.hpp"
#include "reference_impl.hpp"
#include "support.hpp"

namespace fixtures {

using namespace drmn;

inline void randomize(Tensor t, RngState& rng, double lo, double hi) {
  std::vector<double> v(t.size());
  for (double& a : v) a = rng.uniform(lo, hi);
  t.assign(v);
}

inline std::vector<Tensor> tensors_of(const NamedTensors& named) {
  std::vector<Tensor> out;
  for (const auto& [name, t] : named) out.push_back(t);
  return out;
}

/// Non-trivial values everywhere, small offsets so samples stay inside the
/// unit square for reference points in [0.2, 0.8].
inline void randomize(DeformLayerParams& p, RngState& rng, double offset_scale = 0.03) {
  NamedTensors named;
  p.append_named(named, "l");
  for (auto& [name, t] : named) {
    if (name.find("offset") != std::string::npos) {
      randomize(t, rng, -offset_scale, offset_scale);
    } else if (name.find("norm.scale") != std::string::npos) {
      randomize(t, rng, 0.5, 1.5);
    } else {
      randomize(t, rng, -0.5, 0.5);
    }
  }
}

inline void randomize(CrossAttnParams& p, RngState& rng) {
  NamedTensors named;
  p.append_named(named, "x");
  for (auto& [name, t] : named) {
    if (name.find("norm.scale") != std::string::npos) {
      randomize(t, rng, 0.5, 1.5);
    } else {
      randomize(t, rng, -0.5, 0.5);
    }
  }
}

inline LevelMaps random_levels(std::size_t height, std::size_t width, std::size_t c, RngState& rng,
                               bool grad = false) {
  LevelMaps m;
  m.shapes = pyramid_shapes(height, width);
  for (const auto& s : m.shapes) m.maps.push_back(support::random_tensor({s.cells(), c}, rng, -1, 1, grad));
  return m;
}

inline std::vector<ref::Level> to_ref(const LevelMaps& m) {
  std::vector<ref::Level> out;
  for (std::size_t l = 0; l < m.maps.size(); ++l) out.push_back({ref::Mat(m.maps[l]), m.shapes[l].rows, m.shapes[l].cols});
  return out;
}

inline Tensor random_points(std::size_t rows, RngState& rng, double lo = 0.2, double hi = 0.8, bool grad = false) {
  return support::random_tensor({rows, 2}, rng, lo, hi, grad);
}

inline FeaturePyramid random_pyramid(std::size_t height, std::size_t width, std::size_t c, RngState& rng) {
  FeaturePyramid p;
  p.channels = c;
  p.shapes = pyramid_shapes(height, width);
  for (const auto& s : p.shapes) {
    p.features.push_back(support::random_tensor({s.cells(), c}, rng, -1, 1));
    p.ref_points.push_back(make_grid(s));
  }
  return p;
}

/// Randomizes every parameter of a model in place.
inline void randomize(Model& m, RngState& rng, double offset_scale = 0.03) {
  randomize(m.phrase_projection, rng, -0.5, 0.5);
  for (auto& l : m.encoder) randomize(l, rng, offset_scale);
  for (auto& l : m.refine) randomize(l, rng, offset_scale);
  for (auto& x : m.cross) randomize(x, rng);
}

}  // namespace fixtures
