#include "nucd/detection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "nucd/errors.hpp"

namespace nucd {

namespace {

constexpr double kMadToSigma = 1.4826;
constexpr double kGrowFraction = 0.1;

// Running min (or max) over [i-half, i+half], out-of-range samples ignored.
// van Herk / Gil-Werman: three comparisons per sample for any window length.
void sliding_extremum(std::span<const double> in, int half, bool take_min,
                      std::span<double> out) {
  const int n = static_cast<int>(in.size());
  if (half == 0) {
    std::copy(in.begin(), in.end(), out.begin());
    return;
  }
  const double pad = take_min ? std::numeric_limits<double>::infinity()
                              : -std::numeric_limits<double>::infinity();
  auto pick = [take_min](double a, double b) { return take_min ? std::min(a, b) : std::max(a, b); };
  const int k = 2 * half + 1;
  const int len = n + 2 * half;
  const int padded_len = (len + k - 1) / k * k;
  std::vector<double> p(padded_len, pad), g(padded_len), h(padded_len);
  std::copy(in.begin(), in.end(), p.begin() + half);
  for (int b = 0; b < padded_len; b += k) {
    g[b] = p[b];
    for (int i = b + 1; i < b + k; ++i) g[i] = pick(g[i - 1], p[i]);
    h[b + k - 1] = p[b + k - 1];
    for (int i = b + k - 2; i >= b; --i) h[i] = pick(h[i + 1], p[i]);
  }
  for (int x = 0; x < n; ++x) out[x] = pick(h[x], g[x + k - 1]);
}

// Min or max filter over a disk, decomposed into one horizontal run per row
// offset.
GrayImage disk_filter(const GrayImage& img, int radius, bool take_min) {
  const int w = img.width();
  const int h = img.height();
  std::vector<int> half_width(radius + 1);
  for (int dy = 0; dy <= radius; ++dy) {
    half_width[dy] = static_cast<int>(std::floor(std::sqrt(double(radius * radius - dy * dy))));
  }
  // One horizontally filtered image per distinct run length.
  std::vector<int> distinct(half_width);
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  std::vector<GrayImage> runs;
  runs.reserve(distinct.size());
  for (int hw : distinct) {
    GrayImage r(w, h);
    for (int y = 0; y < h; ++y) sliding_extremum(img.row(y), hw, take_min, r.row(y));
    runs.push_back(std::move(r));
  }
  auto run_for = [&](int dy) -> const GrayImage& {
    const int hw = half_width[std::abs(dy)];
    return runs[std::lower_bound(distinct.begin(), distinct.end(), hw) - distinct.begin()];
  };

  const double init = take_min ? std::numeric_limits<double>::infinity()
                               : -std::numeric_limits<double>::infinity();
  GrayImage out(w, h, init);
  for (int y = 0; y < h; ++y) {
    auto dst = out.row(y);
    for (int dy = -radius; dy <= radius; ++dy) {
      const int sy = y + dy;
      if (sy < 0 || sy >= h) continue;
      const auto src = run_for(dy).row(sy);
      if (take_min) {
        for (int x = 0; x < w; ++x) dst[x] = std::min(dst[x], src[x]);
      } else {
        for (int x = 0; x < w; ++x) dst[x] = std::max(dst[x], src[x]);
      }
    }
  }
  return out;
}

double median_inplace(std::vector<double>& v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + mid));
  return m;
}

}  // namespace

GrayImage white_tophat(const GrayImage& img, int radius) {
  if (radius < 1) throw ParameterError("top-hat radius must be >= 1");
  const GrayImage opened = disk_filter(disk_filter(img, radius, true), radius, false);
  GrayImage out(img.width(), img.height());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.pixels()[i] = std::max(0.0, img.pixels()[i] - opened.pixels()[i]);
  }
  return out;
}

std::vector<Detection> detect(const GrayImage& img, const DetectorParams& params) {
  const int diameter = 2 * params.tophat_radius + 1;
  if (img.width() <= diameter || img.height() <= diameter) {
    throw ParameterError("image is not larger than the top-hat structuring element");
  }
  if (params.min_area < 1 || params.max_area < params.min_area) {
    throw ParameterError("invalid detector area limits");
  }
  const GrayImage response = white_tophat(img, params.tophat_radius);
  const double global_peak = response.max();
  if (!(global_peak > 0.0)) return {};

  std::vector<double> scratch(response.pixels().begin(), response.pixels().end());
  const double med = median_inplace(scratch);
  for (double& v : scratch) v = std::abs(v - med);
  const double sigma = kMadToSigma * median_inplace(scratch);
  const double threshold = med + params.threshold_k * sigma;

  const int w = img.width();
  const int h = img.height();
  std::vector<int> label(response.size(), -1);
  std::vector<int> stack;
  std::vector<int> members;
  std::vector<Detection> out;
  int next_label = 0;
  for (int start = 0; start < static_cast<int>(response.size()); ++start) {
    if (label[start] >= 0 || !(response.pixels()[start] > threshold)) continue;
    members.clear();
    stack.assign(1, start);
    label[start] = next_label;
    double peak = 0.0;
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      members.push_back(p);
      peak = std::max(peak, response.pixels()[p]);
      const int px = p % w;
      const int py = p / w;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int nx = px + dx;
          const int ny = py + dy;
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          const int q = ny * w + nx;
          if (label[q] < 0 && response.pixels()[q] > threshold) {
            label[q] = next_label;
            stack.push_back(q);
          }
        }
      }
    }
    // Grow the seed region down to a fixed fraction of its own peak.
    const double floor_level = kGrowFraction * peak;
    stack.assign(members.begin(), members.end());
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      const int px = p % w;
      const int py = p / w;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int nx = px + dx;
          const int ny = py + dy;
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          const int q = ny * w + nx;
          if (label[q] < 0 && response.pixels()[q] >= floor_level &&
              response.pixels()[q] <= response.pixels()[p]) {
            label[q] = next_label;
            members.push_back(q);
            stack.push_back(q);
          }
        }
      }
    }
    ++next_label;

    // The box covers the members at or above the same fraction, so a seed
    // threshold below it (flat, noiseless input) does not inflate the box.
    int x0 = w, y0 = h, x1 = -1, y1 = -1;
    long area = 0;
    for (int p : members) {
      if (response.pixels()[p] < floor_level) continue;
      ++area;
      const int px = p % w;
      const int py = p / w;
      x0 = std::min(x0, px);
      x1 = std::max(x1, px);
      y0 = std::min(y0, py);
      y1 = std::max(y1, py);
    }
    if (area < params.min_area || area > params.max_area) continue;
    out.push_back({BBox{x0, y0, x1 - x0 + 1, y1 - y0 + 1}, peak / global_peak});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Detection& a, const Detection& b) { return a.score > b.score; });
  return out;
}

double iou(const BBox& a, const BBox& b) {
  const long ix = std::max(0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
  const long iy = std::max(0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
  const long inter = ix * iy;
  const long uni = a.area() + b.area() - inter;
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

void PrReport::finalize() {
  precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
}

PrReport& PrReport::operator+=(const PrReport& other) {
  tp += other.tp;
  fp += other.fp;
  fn += other.fn;
  finalize();
  return *this;
}

MatchResult match_detections(std::span<const Detection> dets, std::span<const BBox> gts,
                             double iou_threshold) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });

  MatchResult result;
  result.true_positive.assign(dets.size(), false);
  std::vector<bool> taken(gts.size(), false);
  for (std::size_t idx : order) {
    double best = -1.0;
    std::size_t best_gt = gts.size();
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g]) continue;
      const double v = iou(dets[idx].bbox, gts[g]);
      if (v > best) {
        best = v;
        best_gt = g;
      }
    }
    if (best_gt < gts.size() && best >= iou_threshold) {
      taken[best_gt] = true;
      result.true_positive[idx] = true;
      ++result.report.tp;
    } else {
      ++result.report.fp;
    }
  }
  result.report.fn = static_cast<long>(gts.size()) - result.report.tp;
  result.report.iou_threshold = iou_threshold;
  result.report.finalize();
  return result;
}

PrReport match_and_score(std::span<const Detection> dets, std::span<const BBox> gts,
                         double iou_threshold) {
  return match_detections(dets, gts, iou_threshold).report;
}

PrCurve pr_curve(std::span<const ScoredOutcome> outcomes, long total_ground_truth,
                 std::span<const double> thresholds) {
  std::vector<ScoredOutcome> sorted(outcomes.begin(), outcomes.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const ScoredOutcome& a, const ScoredOutcome& b) { return a.score > b.score; });
  std::vector<double> sweep(thresholds.begin(), thresholds.end());
  if (sweep.empty()) {
    for (const auto& o : sorted) {
      if (sweep.empty() || o.score != sweep.back()) sweep.push_back(o.score);
    }
  }
  std::sort(sweep.begin(), sweep.end(), std::greater<>());

  PrCurve curve;
  std::size_t included = 0;
  long tp = 0;
  for (double t : sweep) {
    while (included < sorted.size() && sorted[included].score >= t) {
      tp += sorted[included].true_positive ? 1 : 0;
      ++included;
    }
    PrPoint pt{t, included > 0 ? static_cast<double>(tp) / static_cast<double>(included) : 0.0,
               total_ground_truth > 0 ? static_cast<double>(tp) / static_cast<double>(total_ground_truth) : 0.0};
    curve.points.push_back(pt);
  }

  double prev_recall = 0.0;
  double prev_precision = -1.0;
  for (const PrPoint& pt : curve.points) {
    if (prev_precision < 0.0) {
      if (pt.precision == 0.0 && pt.recall == 0.0) continue;  // nothing detected yet
      prev_precision = pt.precision;
    }
    curve.auc += (pt.recall - prev_recall) * (pt.precision + prev_precision) / 2.0;
    prev_recall = pt.recall;
    prev_precision = pt.precision;
  }
  return curve;
}

}  // namespace nucd
