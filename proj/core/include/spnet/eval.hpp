#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spnet/dataset.hpp"

namespace spnet::eval {

using data::Point;

inline constexpr double kDefaultThreshold = 20.0;

struct PredictionPair {
  Point pred;
  Point gt;
};

double distance(Point a, Point b);

// Boundary inclusive: true iff |pred - gt| <= threshold.
bool is_true_detection(Point pred, Point gt, double threshold = kDefaultThreshold);

// Fraction of pairs that are true detections. Throws EmptyResultsError.
double tdr(std::span<const PredictionPair> results, double threshold = kDefaultThreshold);

struct CurvePoint {
  double threshold = 0.0;
  double accuracy = 0.0;
  friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

// 0, 1, ..., 40 pixels.
std::vector<double> default_thresholds();

// tdr at every threshold. Throws EmptyResultsError.
std::vector<CurvePoint> distance_accuracy_curve(std::span<const PredictionPair> results,
                                                std::span<const double> thresholds);
std::vector<CurvePoint> distance_accuracy_curve(std::span<const PredictionPair> results);

struct SampleResult {
  std::string id;
  std::optional<Point> pred;  // empty: the detector produced nothing
  Point gt;
  std::optional<double> distance;
  friend bool operator==(const SampleResult&, const SampleResult&) = default;
};

inline constexpr int kReportSchema = 1;

struct EvalReport {
  int schema = kReportSchema;
  double threshold = kDefaultThreshold;
  std::string model_id;
  std::string dataset_id;
  std::vector<SampleResult> samples;
  double tdr = 0.0;
  std::vector<CurvePoint> curve;
  // Annotated samples with no prediction; scored as misses.
  std::size_t missing_predictions = 0;
  // Ground-truth rows without a point; excluded from scoring.
  std::size_t unannotated = 0;
  // Prediction rows with no ground-truth row; ignored.
  std::size_t unmatched_predictions = 0;
  std::string curve_semantics = "cumulative: fraction of samples with distance <= threshold";
  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

struct ReportOptions {
  double threshold = kDefaultThreshold;
  std::string model_id;
  std::string dataset_id;
  std::vector<double> thresholds = default_thresholds();
};

// Joins predictions to ground truth by filename (ground-truth order). Both
// must be in original-image pixels. Throws EmptyResultsError when no
// annotated sample remains.
EvalReport build_report(const std::vector<data::ManifestRow>& predictions,
                        const std::vector<data::ManifestRow>& truth,
                        const ReportOptions& options = {});

std::string report_to_json(const EvalReport& report);
// Throws IoError on malformed input or an unknown schema.
EvalReport parse_report(const std::string& json);
EvalReport read_report(const std::filesystem::path& path);

std::string distances_csv(const EvalReport& report);
std::string curve_svg(const EvalReport& report);

// Writes report.json, distances.csv and curve.svg into `directory` (created if
// needed). Throws IoError.
void emit_report(const EvalReport& report, const std::filesystem::path& directory);

}  // namespace spnet::eval
