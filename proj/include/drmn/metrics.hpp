#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace drmn {

struct EvalRecord {
  double iou = 0.0;
  bool stuff = false;
  bool plural = false;
  std::size_t scene = 0;
  std::size_t phrase = 0;
};

/// |A ∩ B| / |A ∪ B| of binary masks; 1 when both are empty.
double iou(std::span<const double> pred, std::span<const double> gt);

/// Elementwise union of one phrase's ground-truth masks.
std::vector<double> merge_plural(std::span<const std::vector<double>> masks);

/// 0, 0.01, ..., 1.
std::vector<double> default_thresholds();

struct RecallCurve {
  std::vector<double> thresholds;
  std::vector<double> recall;  // fraction of records with IoU >= threshold
  double area = 0.0;           // trapezoidal AR
  std::size_t count = 0;
};

/// Throws on an empty record set.
RecallCurve recall_curve(std::span<const double> ious, std::span<const double> thresholds);
double trapezoid(std::span<const double> x, std::span<const double> y);

/// Overall curve plus per-category splits; a split with no records has
/// count 0 and NaN recall/area.
struct CategoryCurves {
  RecallCurve overall, things, stuff, singulars, plurals;
};

CategoryCurves average_recall(std::span<const EvalRecord> records,
                              std::span<const double> thresholds);

/// threshold,overall,things,stuff,singulars,plurals
std::string curves_csv(const CategoryCurves& curves);

/// scene,phrase,stuff,plural,iou
std::string records_csv(std::span<const EvalRecord> records);

}  // namespace drmn
