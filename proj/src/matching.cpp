#include "drmn/matching.hpp"

#include <string>

#include "drmn/errors.hpp"
#include "drmn/ops.hpp"

namespace drmn {

Tensor resample_level(Tape& tape, const Tensor& map, LevelShape from, LevelShape to) {
  if (map.rank() != 2 || map.rows() != from.cells()) {
    throw DimensionError("resample_level: map " + shape_string(map.shape()) + " is not " +
                         std::to_string(from.rows) + "x" + std::to_string(from.cols) + " cells");
  }
  if (from == to) return map;
  Tensor grid = reshape(tape, map, {from.rows, from.cols, map.cols()});
  return bilinear_sample(tape, grid, make_grid(to));
}

FusedMap fuse(Tape& tape, std::span<const Tensor> maps, LevelShape shape) {
  if (maps.empty()) throw ContractError("fuse: no maps");
  Tensor acc = maps[0];
  for (std::size_t i = 0; i < maps.size(); ++i) {
    if (maps[i].rank() != 2 || maps[i].rows() != shape.cells() ||
        maps[i].cols() != maps[0].cols()) {
      throw ContractError("fuse: map " + std::to_string(i) + " has shape " +
                          shape_string(maps[i].shape()) + ", expected " +
                          std::to_string(shape.cells()) + " x " + std::to_string(maps[0].cols()));
    }
    if (i > 0) acc = add(tape, acc, maps[i]);
  }
  return {scale(tape, acc, 1.0 / static_cast<double>(maps.size())), shape};
}

FusedMap fuse_levels(Tape& tape, std::span<const Tensor> maps, std::span<const LevelShape> shapes,
                     LevelShape target) {
  if (maps.size() != shapes.size()) throw ContractError("fuse_levels: one shape per map");
  std::vector<Tensor> resampled;
  resampled.reserve(maps.size());
  for (std::size_t l = 0; l < maps.size(); ++l) {
    resampled.push_back(resample_level(tape, maps[l], shapes[l], target));
  }
  return fuse(tape, resampled, target);
}

Tensor project_phrases(Tape& tape, const Tensor& phrases, const Tensor& projection) {
  if (phrases.rank() != 2 || projection.rank() != 2 || phrases.cols() != projection.rows()) {
    throw DimensionError("project_phrases: G " + shape_string(phrases.shape()) +
                         " does not match projection " + shape_string(projection.shape()));
  }
  return matmul(tape, phrases, projection);
}

Tensor similarity(Tape& tape, const Tensor& phrases, const Tensor& pixels) {
  if (phrases.rank() != 2 || pixels.rank() != 2 || phrases.cols() != pixels.cols()) {
    throw DimensionError("similarity: phrase " + shape_string(phrases.shape()) + " vs pixel " +
                         shape_string(pixels.shape()));
  }
  return sigmoid(tape, matmul(tape, phrases, transpose(tape, pixels)));
}

Tensor upsample_similarity(Tape& tape, const Tensor& h, LevelShape shape, std::size_t height,
                           std::size_t width) {
  if (h.rank() != 2 || h.cols() != shape.cells()) {
    throw DimensionError("upsample_similarity: H " + shape_string(h.shape()) + " vs " +
                         std::to_string(shape.cells()) + " cells");
  }
  Tensor per_cell = transpose(tape, h);
  Tensor up = resample_level(tape, per_cell, shape, LevelShape{height, width});
  return transpose(tape, up);
}

}  // namespace drmn
