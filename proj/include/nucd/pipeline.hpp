#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nucd/biasfield.hpp"
#include "nucd/detection.hpp"
#include "nucd/estimation.hpp"

namespace nucd {

enum class Strategy { kDirect, kBlindCorrect, kPairedCorrect };

/// "direct", "blind-correct", "paired-correct"
std::string to_string(Strategy strategy);
Strategy strategy_from_string(const std::string& name);
/// Human-readable role of a strategy in reports.
std::string strategy_label(Strategy strategy);

struct PipelineConfig {
  Strategy strategy = Strategy::kDirect;
  std::filesystem::path corpus;
  std::filesystem::path report;
  /// Optional CSV of the precision-recall sweep.
  std::filesystem::path pr_curve;
  DetectorParams detector;
  double iou_threshold = 0.5;
  int degree = 3;
  CoordNorm coord;
  BlindParams blind;
  /// Clamp detector input to [0,1], as a display or a saturating sensor
  /// would.
  bool clamp_display = true;
  std::uint64_t seed = 0;
  int jobs = 1;
};

struct TargetRow {
  BBox bbox;
  std::optional<double> scr_in;   // on the degraded image
  std::optional<double> scr_out;  // on the corrected image
  std::optional<double> scrg;
};

struct ImageRow {
  std::string image;
  std::optional<double> psnr_degraded;  // degraded vs clear
  std::optional<double> psnr;           // corrected vs clear
  std::optional<double> ssim_degraded;
  std::optional<double> ssim;
  std::optional<double> residual_rms;
  std::optional<double> condition_estimate;
  std::vector<TargetRow> targets;
  std::optional<double> scrg_mean;
  long detections = 0;
  PrReport pr;
  std::vector<ScoredOutcome> outcomes;  // feeds the corpus-level curve
};

struct EvalReport {
  std::string strategy;
  std::string label;
  nlohmann::ordered_json config;
  std::vector<ImageRow> rows;
  PrReport pr;
  PrCurve curve;
};

/// Runs one strategy over a corpus. Throws IoError naming every missing input
/// before any work is done.
EvalReport run_pipeline(const PipelineConfig& config);

/// Scores externally corrected images (same file names as the corpus) against
/// the corpus clear images and annotations.
EvalReport evaluate_corrected(const std::filesystem::path& corpus,
                              const std::filesystem::path& corrected,
                              const DetectorParams& detector, double iou_threshold,
                              bool clamp_display, int jobs);

/// Deterministic JSON. Non-finite numbers are written as the strings
/// "Infinity", "-Infinity" or "NaN".
nlohmann::ordered_json to_json(const EvalReport& report);

/// Writes via a temporary file and rename, so a failed run never leaves a
/// partial report behind.
void write_json_atomic(const nlohmann::ordered_json& j, const std::filesystem::path& path);

/// "threshold,precision,recall" rows then a "# auc,<value>" footer.
std::string pr_curve_csv(const PrCurve& curve);

}  // namespace nucd
