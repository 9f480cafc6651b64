#include "spnet/eval.hpp"

#include <cmath>
#include <limits>
#include <unordered_map>

#include "spnet/error.hpp"

namespace spnet::eval {

namespace {

double accuracy(std::span<const double> distances, std::size_t total, double threshold) {
  std::size_t hits = 0;
  for (double d : distances) {
    if (d <= threshold) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(total);
}

std::vector<double> pair_distances(std::span<const PredictionPair> results) {
  std::vector<double> d;
  d.reserve(results.size());
  for (const auto& r : results) d.push_back(distance(r.pred, r.gt));
  return d;
}

}  // namespace

double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

bool is_true_detection(Point pred, Point gt, double threshold) {
  return distance(pred, gt) <= threshold;
}

double tdr(std::span<const PredictionPair> results, double threshold) {
  if (results.empty()) throw EmptyResultsError("tdr: no results");
  const auto d = pair_distances(results);
  return accuracy(d, d.size(), threshold);
}

std::vector<double> default_thresholds() {
  std::vector<double> t;
  for (int i = 0; i <= 40; ++i) t.push_back(i);
  return t;
}

std::vector<CurvePoint> distance_accuracy_curve(std::span<const PredictionPair> results,
                                                std::span<const double> thresholds) {
  if (results.empty()) throw EmptyResultsError("distance_accuracy_curve: no results");
  const auto d = pair_distances(results);
  std::vector<CurvePoint> curve;
  for (double t : thresholds) curve.push_back({t, accuracy(d, d.size(), t)});
  return curve;
}

std::vector<CurvePoint> distance_accuracy_curve(std::span<const PredictionPair> results) {
  const auto t = default_thresholds();
  return distance_accuracy_curve(results, t);
}

EvalReport build_report(const std::vector<data::ManifestRow>& predictions,
                        const std::vector<data::ManifestRow>& truth,
                        const ReportOptions& options) {
  EvalReport report;
  report.threshold = options.threshold;
  report.model_id = options.model_id;
  report.dataset_id = options.dataset_id;

  std::unordered_map<std::string, const data::ManifestRow*> by_name;
  for (const auto& p : predictions) by_name.emplace(p.filename, &p);

  std::unordered_map<std::string, bool> in_truth;
  std::vector<double> distances;
  for (const auto& t : truth) {
    in_truth.emplace(t.filename, true);
    if (!t.point) {
      ++report.unannotated;
      continue;
    }
    SampleResult s;
    s.id = t.filename;
    s.gt = *t.point;
    const auto it = by_name.find(t.filename);
    if (it != by_name.end() && it->second->point) {
      s.pred = *it->second->point;
      s.distance = distance(*s.pred, s.gt);
      distances.push_back(*s.distance);
    } else {
      ++report.missing_predictions;
    }
    report.samples.push_back(std::move(s));
  }
  for (const auto& p : predictions) {
    if (!in_truth.count(p.filename)) ++report.unmatched_predictions;
  }
  if (report.samples.empty()) {
    throw EmptyResultsError("build_report: no annotated sample in the ground truth");
  }

  const std::size_t total = report.samples.size();
  report.tdr = accuracy(distances, total, options.threshold);
  for (double t : options.thresholds) report.curve.push_back({t, accuracy(distances, total, t)});
  return report;
}

}  // namespace spnet::eval
