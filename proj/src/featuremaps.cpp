#include "drmn/featuremaps.hpp"

#include <cmath>
#include <string>

#include "drmn/errors.hpp"

namespace drmn {

std::vector<LevelShape> pyramid_shapes(std::size_t height, std::size_t width) {
  if (height == 0 || width == 0 || height % 32 != 0 || width % 32 != 0) {
    throw ConfigError("image size must be a positive multiple of 32, got " +
                      std::to_string(height) + "x" + std::to_string(width));
  }
  std::vector<LevelShape> shapes;
  for (int l : kPyramidLevels) shapes.push_back({height >> l, width >> l});
  return shapes;
}

Tensor make_grid(LevelShape shape) {
  if (shape.rows == 0 || shape.cols == 0) throw DimensionError("make_grid: empty level shape");
  std::vector<double> pts;
  pts.reserve(shape.cells() * 2);
  for (std::size_t i = 0; i < shape.rows; ++i) {
    for (std::size_t j = 0; j < shape.cols; ++j) {
      pts.push_back((static_cast<double>(i) + 0.5) / static_cast<double>(shape.rows));
      pts.push_back((static_cast<double>(j) + 0.5) / static_cast<double>(shape.cols));
    }
  }
  return Tensor::matrix(shape.cells(), 2, std::move(pts));
}

PosEncoder::PosEncoder(std::size_t channels, double temperature)
    : channels_(channels), temperature_(temperature) {
  if (channels == 0 || channels % 4 != 0) {
    throw ConfigError("positional encoding needs channels divisible by 4, got " +
                      std::to_string(channels));
  }
  if (!(temperature > 0.0)) throw ConfigError("positional encoding temperature must be positive");
}

Tensor PosEncoder::encode(const Tensor& pts) const {
  if (pts.rank() != 2 || pts.cols() != 2) {
    throw DimensionError("pos_encode: points must be k x 2, got " + shape_string(pts.shape()));
  }
  const std::size_t k = pts.rows();
  const std::size_t half = channels_ / 2;
  std::vector<double> freq(half);
  for (std::size_t q = 0; q < half; ++q) {
    const double exponent = 2.0 * static_cast<double>(q / 2) / static_cast<double>(half);
    freq[q] = std::pow(temperature_, exponent);
  }
  std::vector<double> out(k * channels_);
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t axis = 0; axis < 2; ++axis) {
      const double p = pts(r, axis);
      double* dst = out.data() + r * channels_ + axis * half;
      for (std::size_t q = 0; q < half; ++q) {
        const double arg = p / freq[q];
        dst[q] = (q % 2 == 0) ? std::sin(arg) : std::cos(arg);
      }
    }
  }
  return Tensor::matrix(k, channels_, std::move(out));
}

std::size_t FeaturePyramid::total_rows() const {
  std::size_t n = 0;
  for (const auto& s : shapes) n += s.cells();
  return n;
}

std::size_t FeaturePyramid::level_offset(std::size_t level_index) const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < level_index; ++i) n += shapes[i].cells();
  return n;
}

Tensor FeaturePyramid::stacked_ref_points(Tape& tape) const { return concat_rows(tape, ref_points); }

std::vector<Tensor> split_levels(Tape& tape, const Tensor& stacked,
                                 std::span<const LevelShape> shapes) {
  std::size_t total = 0;
  for (const auto& s : shapes) total += s.cells();
  if (stacked.rows() != total) {
    throw DimensionError("split_levels: " + std::to_string(stacked.rows()) + " rows for " +
                         std::to_string(total) + " pyramid cells");
  }
  std::vector<Tensor> out;
  std::size_t offset = 0;
  for (const auto& s : shapes) {
    out.push_back(slice_rows(tape, stacked, offset, s.cells()));
    offset += s.cells();
  }
  return out;
}

}  // namespace drmn
