#include "drmn/metrics.hpp"

#include <cmath>
#include <limits>

#include "drmn/errors.hpp"
#include "drmn/format.hpp"

namespace drmn {

double iou(std::span<const double> pred, std::span<const double> gt) {
  if (pred.size() != gt.size()) {
    throw DimensionError("iou: masks of " + std::to_string(pred.size()) + " and " +
                         std::to_string(gt.size()) + " pixels");
  }
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool a = pred[i] > 0.5, b = gt[i] > 0.5;
    inter += a && b;
    uni += a || b;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<double> merge_plural(std::span<const std::vector<double>> masks) {
  if (masks.empty()) throw ContractError("merge_plural: no masks");
  std::vector<double> out(masks[0].size(), 0.0);
  for (const auto& m : masks) {
    if (m.size() != out.size()) throw DimensionError("merge_plural: masks differ in size");
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (m[i] > 0.5) out[i] = 1.0;
    }
  }
  return out;
}

std::vector<double> default_thresholds() {
  std::vector<double> t(101);
  for (std::size_t i = 0; i <= 100; ++i) t[i] = static_cast<double>(i) / 100.0;
  return t;
}

double trapezoid(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DimensionError("trapezoid: x and y differ in length");
  double area = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) area += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
  return area;
}

RecallCurve recall_curve(std::span<const double> ious, std::span<const double> thresholds) {
  if (ious.empty()) throw ContractError("average recall of an empty record set");
  RecallCurve c;
  c.thresholds.assign(thresholds.begin(), thresholds.end());
  c.count = ious.size();
  for (double tau : thresholds) {
    std::size_t hit = 0;
    for (double v : ious) hit += v >= tau;
    c.recall.push_back(static_cast<double>(hit) / static_cast<double>(ious.size()));
  }
  c.area = trapezoid(c.thresholds, c.recall);
  return c;
}

namespace {

template <typename Pred>
RecallCurve split_curve(std::span<const EvalRecord> records, std::span<const double> thresholds, Pred keep) {
  std::vector<double> ious;
  for (const auto& r : records) {
    if (keep(r)) ious.push_back(r.iou);
  }
  if (ious.empty()) {
    RecallCurve c;
    c.thresholds.assign(thresholds.begin(), thresholds.end());
    c.recall.assign(thresholds.size(), std::numeric_limits<double>::quiet_NaN());
    c.area = std::numeric_limits<double>::quiet_NaN();
    return c;
  }
  return recall_curve(ious, thresholds);
}

}  // namespace

CategoryCurves average_recall(std::span<const EvalRecord> records, std::span<const double> thresholds) {
  if (records.empty()) throw ContractError("average recall of an empty record set");
  CategoryCurves c;
  c.overall = split_curve(records, thresholds, [](const EvalRecord&) { return true; });
  c.things = split_curve(records, thresholds, [](const EvalRecord& r) { return !r.stuff; });
  c.stuff = split_curve(records, thresholds, [](const EvalRecord& r) { return r.stuff; });
  c.singulars = split_curve(records, thresholds, [](const EvalRecord& r) { return !r.plural; });
  c.plurals = split_curve(records, thresholds, [](const EvalRecord& r) { return r.plural; });
  return c;
}

std::string curves_csv(const CategoryCurves& c) {
  std::string out = "threshold,overall,things,stuff,singulars,plurals\n";
  for (std::size_t i = 0; i < c.overall.thresholds.size(); ++i) {
    out += format_double(c.overall.thresholds[i]) + "," + format_double(c.overall.recall[i]) + "," +
           format_double(c.things.recall[i]) + "," + format_double(c.stuff.recall[i]) + "," +
           format_double(c.singulars.recall[i]) + "," + format_double(c.plurals.recall[i]) + "\n";
  }
  return out;
}

std::string records_csv(std::span<const EvalRecord> records) {
  std::string out = "scene,phrase,stuff,plural,iou\n";
  for (const auto& r : records) {
    out += std::to_string(r.scene) + "," + std::to_string(r.phrase) + "," + (r.stuff ? "1" : "0") + "," +
           (r.plural ? "1" : "0") + "," + format_double(r.iou) + "\n";
  }
  return out;
}

}  // namespace drmn
