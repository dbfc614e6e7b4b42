#pragma once

#include <span>
#include <vector>

#include "nucd/image.hpp"
#include "nucd/synthesis.hpp"

namespace nucd {

struct Detection {
  BBox bbox;
  double score = 0.0;  // component peak / global peak of the top-hat response
};

struct DetectorParams {
  int tophat_radius = 7;
  double threshold_k = 5.0;
  int min_area = 2;
  int max_area = 2000;
};

/// img - opening(img) with a disk of the given radius. Pixels outside the
/// image are ignored by the min/max filters.
GrayImage white_tophat(const GrayImage& img, int radius);

/// Top-hat -> threshold at median + k * 1.4826 * MAD of the response ->
/// 8-connected components. Each component then grows downhill through
/// neighbours still at or above 10% of its own peak, and its box and area count
/// only pixels at or above that level (matching how target boxes are
/// annotated). Components are filtered by area. Results are ordered by
/// descending score.
std::vector<Detection> detect(const GrayImage& img, const DetectorParams& params = {});

double iou(const BBox& a, const BBox& b);

struct PrReport {
  long tp = 0;
  long fp = 0;
  long fn = 0;
  double precision = 0.0;  // 0 when there are no detections
  double recall = 0.0;     // 0 when there are no ground truths
  double iou_threshold = 0.5;

  void finalize();
  PrReport& operator+=(const PrReport& other);
};

struct MatchResult {
  /// true_positive[i] refers to dets[i] in the caller's order.
  std::vector<bool> true_positive;
  PrReport report;
};

/// Greedy one-to-one matching in descending score order (ties keep input
/// order). A detection whose best IoU against a still-unmatched ground truth
/// reaches the threshold is a true positive.
MatchResult match_detections(std::span<const Detection> dets, std::span<const BBox> gts,
                             double iou_threshold = 0.5);

PrReport match_and_score(std::span<const Detection> dets, std::span<const BBox> gts,
                         double iou_threshold = 0.5);

/// A detection already classified against its image's ground truth.
struct ScoredOutcome {
  double score = 0.0;
  bool true_positive = false;
};

struct PrPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

struct PrCurve {
  std::vector<PrPoint> points;  // descending threshold
  double auc = 0.0;             // trapezoid over recall, starting at recall 0
};

/// Sweeps the threshold over the distinct scores, or over `thresholds` when
/// non-empty. Curve area is 0 when nothing is ever detected.
PrCurve pr_curve(std::span<const ScoredOutcome> outcomes, long total_ground_truth,
                 std::span<const double> thresholds = {});

}  // namespace nucd
