#include "nucd/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "nucd/corpus.hpp"
#include "nucd/errors.hpp"
#include "nucd/image_io.hpp"
#include "nucd/metrics.hpp"
#include "nucd/parallel.hpp"

namespace nucd {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

ordered_json number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "NaN";
  return v > 0 ? "Infinity" : "-Infinity";
}

ordered_json optional_number(const std::optional<double>& v) {
  return v ? number(*v) : ordered_json(nullptr);
}

std::optional<double> try_scr(const GrayImage& img, const BBox& box) {
  try {
    return scr(img, ScrSpec{box});
  } catch (const DegenerateError&) {
    return std::nullopt;
  }
}

GrayImage display(GrayImage img, bool clamp) {
  if (clamp) {
    for (double& v : img.pixels()) v = std::clamp(v, 0.0, 1.0);
  }
  return img;
}

struct ImageInputs {
  std::string name;
  GrayImage degraded;
  std::optional<GrayImage> clear;
  std::optional<GrayImage> corrected;
  std::optional<FitResult> fit;
  std::vector<BBox> targets;
};

ImageRow score_image(const ImageInputs& in, const DetectorParams& detector, double iou_threshold,
                     bool clamp_display) {
  ImageRow row;
  row.image = in.name;
  if (in.clear) {
    row.psnr_degraded = psnr(in.degraded, *in.clear);
    row.ssim_degraded = ssim(in.degraded, *in.clear);
    if (in.corrected) {
      row.psnr = psnr(*in.corrected, *in.clear);
      row.ssim = ssim(*in.corrected, *in.clear);
    }
  }
  if (in.fit) {
    row.residual_rms = in.fit->residual_rms;
    row.condition_estimate = in.fit->condition_estimate;
  }

  double scrg_sum = 0.0;
  int scrg_count = 0;
  for (const BBox& box : in.targets) {
    TargetRow t;
    t.bbox = box;
    if (box.valid_in(in.degraded.width(), in.degraded.height())) {
      t.scr_in = try_scr(in.degraded, box);
      if (in.corrected) {
        t.scr_out = try_scr(*in.corrected, box);
        if (t.scr_in && t.scr_out && *t.scr_in > 0.0) {
          t.scrg = *t.scr_out / *t.scr_in;
          scrg_sum += *t.scrg;
          ++scrg_count;
        }
      }
    }
    row.targets.push_back(t);
  }
  if (scrg_count > 0) row.scrg_mean = scrg_sum / scrg_count;

  const GrayImage& source = in.corrected ? *in.corrected : in.degraded;
  const std::vector<Detection> dets = detect(display(source, clamp_display), detector);
  const MatchResult match = match_detections(dets, in.targets, iou_threshold);
  row.detections = static_cast<long>(dets.size());
  row.pr = match.report;
  row.outcomes.reserve(dets.size());
  for (std::size_t i = 0; i < dets.size(); ++i) {
    row.outcomes.push_back({dets[i].score, match.true_positive[i]});
  }
  return row;
}

void finish_report(EvalReport& report, double iou_threshold) {
  report.pr = PrReport{};
  report.pr.iou_threshold = iou_threshold;
  std::vector<ScoredOutcome> outcomes;
  for (const ImageRow& row : report.rows) {
    report.pr += row.pr;
    outcomes.insert(outcomes.end(), row.outcomes.begin(), row.outcomes.end());
  }
  report.pr.finalize();
  report.curve = pr_curve(outcomes, report.pr.tp + report.pr.fn);
}

void throw_missing(const std::vector<std::string>& missing, const std::string& what) {
  if (missing.empty()) return;
  std::string msg = "missing " + what + ":";
  for (const auto& m : missing) msg += " " + m;
  throw IoError(IoErrorKind::kNotFound, msg);
}

ordered_json detector_json(const DetectorParams& d) {
  return {{"tophat_radius", d.tophat_radius},
          {"threshold_k", d.threshold_k},
          {"min_area", d.min_area},
          {"max_area", d.max_area}};
}

template <typename F>
std::optional<double> mean_of(const std::vector<ImageRow>& rows, F field) {
  double sum = 0.0;
  int n = 0;
  for (const ImageRow& r : rows) {
    if (const std::optional<double> v = field(r)) {
      sum += *v;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

}  // namespace

std::string to_string(Strategy strategy) {
  switch (strategy) {
    case Strategy::kDirect: return "direct";
    case Strategy::kBlindCorrect: return "blind-correct";
    case Strategy::kPairedCorrect: return "paired-correct";
  }
  return "direct";
}

Strategy strategy_from_string(const std::string& name) {
  if (name == "direct") return Strategy::kDirect;
  if (name == "blind-correct") return Strategy::kBlindCorrect;
  if (name == "paired-correct") return Strategy::kPairedCorrect;
  throw ParameterError("unknown strategy '" + name + "'");
}

std::string strategy_label(Strategy strategy) {
  switch (strategy) {
    case Strategy::kDirect: return "direct detection on degraded images";
    case Strategy::kBlindCorrect: return "separate: blind correction then detection";
    case Strategy::kPairedCorrect: return "upper bound for union: oracle paired correction then detection";
  }
  return "";
}

EvalReport run_pipeline(const PipelineConfig& config) {
  if (config.jobs < 1) throw ParameterError("jobs must be >= 1");
  if (!(config.iou_threshold > 0.0 && config.iou_threshold <= 1.0)) {
    throw ParameterError("iou threshold must lie in (0, 1]");
  }
  coeff_count(config.degree);
  const Corpus corpus(config.corpus);
  const int n = corpus.size();

  if (config.strategy == Strategy::kPairedCorrect) {
    std::vector<std::string> missing;
    for (int i = 0; i < n; ++i) {
      if (!corpus.has_clear(i)) missing.push_back(("clear/" + corpus.name(i)));
    }
    throw_missing(missing, "clear images required by paired-correct");
  }

  EvalReport report;
  report.strategy = to_string(config.strategy);
  report.label = strategy_label(config.strategy);
  report.config = {{"strategy", report.strategy},
                   {"corpus", config.corpus.string()},
                   {"degree", config.degree},
                   {"coord", to_string(config.coord.mode)},
                   {"blind",
                    {{"blur_sigma", config.blind.blur_sigma},
                     {"downsample_first", config.blind.downsample_first},
                     {"robust_iters", config.blind.robust_iters}}},
                   {"detector", detector_json(config.detector)},
                   {"iou_threshold", config.iou_threshold},
                   {"clamp_display", config.clamp_display},
                   {"seed", config.seed}};
  report.rows.resize(n);

  parallel_for(n, config.jobs, [&](int i) {
    ImageInputs in{corpus.name(i), corpus.load_degraded(i), std::nullopt, std::nullopt,
                   std::nullopt, corpus.annotations(i)};
    if (corpus.has_clear(i)) in.clear = corpus.load_clear(i);
    switch (config.strategy) {
      case Strategy::kDirect:
        break;
      case Strategy::kBlindCorrect:
        in.fit = fit_blind(in.degraded, config.degree, config.coord, config.blind);
        break;
      case Strategy::kPairedCorrect:
        if (!in.clear->same_shape(in.degraded)) {
          throw IoError(IoErrorKind::kMalformed, "clear/" + in.name + " differs in size from its degraded image");
        }
        in.fit = fit_paired(in.degraded, *in.clear, config.degree, config.coord);
        break;
    }
    if (in.fit) in.corrected = correct(in.degraded, *in.fit);
    report.rows[i] = score_image(in, config.detector, config.iou_threshold, config.clamp_display);
  });

  finish_report(report, config.iou_threshold);
  return report;
}

EvalReport evaluate_corrected(const fs::path& corpus_dir, const fs::path& corrected,
                              const DetectorParams& detector, double iou_threshold,
                              bool clamp_display, int jobs) {
  if (jobs < 1) throw ParameterError("jobs must be >= 1");
  const Corpus corpus(corpus_dir);
  const int n = corpus.size();
  std::vector<std::string> missing;
  for (int i = 0; i < n; ++i) {
    if (!fs::is_regular_file(corrected / corpus.name(i))) {
      missing.push_back((corrected / corpus.name(i)).string());
    }
  }
  throw_missing(missing, "corrected images");

  EvalReport report;
  report.strategy = "external";
  report.label = "externally corrected images";
  report.config = {{"corpus", corpus_dir.string()},
                   {"corrected", corrected.string()},
                   {"detector", detector_json(detector)},
                   {"iou_threshold", iou_threshold},
                   {"clamp_display", clamp_display}};
  report.rows.resize(n);
  parallel_for(n, jobs, [&](int i) {
    ImageInputs in{corpus.name(i), corpus.load_degraded(i), std::nullopt, std::nullopt,
                   std::nullopt, corpus.annotations(i)};
    if (corpus.has_clear(i)) in.clear = corpus.load_clear(i);
    in.corrected = load_image(corrected / in.name);
    if (!in.corrected->same_shape(in.degraded)) {
      throw IoError(IoErrorKind::kMalformed, (corrected / in.name).string() + " differs in size from the corpus image");
    }
    report.rows[i] = score_image(in, detector, iou_threshold, clamp_display);
  });
  finish_report(report, iou_threshold);
  return report;
}

ordered_json to_json(const EvalReport& report) {
  ordered_json images = ordered_json::array();
  for (const ImageRow& r : report.rows) {
    ordered_json targets = ordered_json::array();
    for (const TargetRow& t : r.targets) {
      targets.push_back({{"bbox", {t.bbox.x, t.bbox.y, t.bbox.w, t.bbox.h}},
                         {"scr_in", optional_number(t.scr_in)},
                         {"scr_out", optional_number(t.scr_out)},
                         {"scrg", optional_number(t.scrg)}});
    }
    ordered_json row;
    row["image"] = r.image;
    if (r.psnr_degraded) row["psnr_degraded"] = number(*r.psnr_degraded);
    if (r.ssim_degraded) row["ssim_degraded"] = number(*r.ssim_degraded);
    if (r.psnr) row["psnr"] = number(*r.psnr);
    if (r.ssim) row["ssim"] = number(*r.ssim);
    if (r.residual_rms) row["residual_rms"] = number(*r.residual_rms);
    if (r.condition_estimate) row["condition_estimate"] = number(*r.condition_estimate);
    row["targets"] = std::move(targets);
    row["scrg_mean"] = optional_number(r.scrg_mean);
    row["detections"] = r.detections;
    row["tp"] = r.pr.tp;
    row["fp"] = r.pr.fp;
    row["fn"] = r.pr.fn;
    images.push_back(std::move(row));
  }

  double scrg_sum = 0.0;
  long scrg_n = 0;
  for (const ImageRow& r : report.rows) {
    for (const TargetRow& t : r.targets) {
      if (t.scrg) {
        scrg_sum += *t.scrg;
        ++scrg_n;
      }
    }
  }
  ordered_json aggregate;
  aggregate["images"] = report.rows.size();
  aggregate["psnr_degraded"] = optional_number(mean_of(report.rows, [](const ImageRow& r) { return r.psnr_degraded; }));
  aggregate["ssim_degraded"] = optional_number(mean_of(report.rows, [](const ImageRow& r) { return r.ssim_degraded; }));
  aggregate["psnr"] = optional_number(mean_of(report.rows, [](const ImageRow& r) { return r.psnr; }));
  aggregate["ssim"] = optional_number(mean_of(report.rows, [](const ImageRow& r) { return r.ssim; }));
  aggregate["scrg"] = scrg_n > 0 ? number(scrg_sum / scrg_n) : ordered_json(nullptr);
  aggregate["precision"] = report.pr.precision;
  aggregate["recall"] = report.pr.recall;
  aggregate["tp"] = report.pr.tp;
  aggregate["fp"] = report.pr.fp;
  aggregate["fn"] = report.pr.fn;
  aggregate["iou_threshold"] = report.pr.iou_threshold;
  aggregate["pr_auc"] = report.curve.auc;

  ordered_json j;
  j["strategy"] = report.strategy;
  j["label"] = report.label;
  j["config"] = report.config;
  j["aggregate"] = std::move(aggregate);
  j["images"] = std::move(images);
  return j;
}

void write_json_atomic(const ordered_json& j, const fs::path& path) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    out << j.dump(2) << '\n';
    out.close();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw IoError(IoErrorKind::kWrite, "cannot write " + path.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError(IoErrorKind::kWrite, "cannot write " + path.string());
  }
}

std::string pr_curve_csv(const PrCurve& curve) {
  std::string out = "threshold,precision,recall\n";
  char buf[96];
  for (const PrPoint& p : curve.points) {
    std::snprintf(buf, sizeof buf, "%.12g,%.12g,%.12g\n", p.threshold, p.precision, p.recall);
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "# auc,%.12g\n", curve.auc);
  out += buf;
  return out;
}

}  // namespace nucd
