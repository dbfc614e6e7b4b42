#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "nucd/corpus.hpp"
#include "nucd/detection.hpp"
#include "nucd/errors.hpp"
#include "nucd/estimation.hpp"
#include "nucd/image_io.hpp"
#include "nucd/losses.hpp"
#include "nucd/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

void add_config(CLI::App* sub) {
  sub->add_option("--config", "Read option values from a flat JSON object; explicit flags win [none]")
      ->type_name("FILE");
}

std::string config_scalar(const json& v, const std::string& key) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number()) return v.dump();
  throw nucd::ParameterError("config value for '" + key + "' must be a scalar or an array of scalars");
}

// Splices the JSON named by "<subcommand> ... --config FILE" into the argument
// list right after the subcommand. Keys are long option names (underscores
// allowed for dashes); keys also given on the command line are skipped.
std::vector<std::string> expand_config(int argc, char** argv, const std::vector<std::string>& subcommands) {
  std::vector<std::string> args(argv, argv + argc);
  const auto sub = std::find_if(args.begin() + 1, args.end(), [&](const std::string& a) {
    return std::find(subcommands.begin(), subcommands.end(), a) != subcommands.end();
  });
  if (sub == args.end()) return args;
  const std::size_t sub_pos = static_cast<std::size_t>(sub - args.begin());
  std::string path;
  std::size_t at = 0, width = 0;
  for (std::size_t i = sub_pos + 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1], at = i, width = 2;
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9), at = i, width = 1;
    }
  }
  if (width == 0) return args;
  args.erase(args.begin() + static_cast<long>(at), args.begin() + static_cast<long>(at + width));

  std::ifstream in(path, std::ios::binary);
  if (!in) throw nucd::IoError(nucd::IoErrorKind::kNotFound, "cannot open config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw nucd::IoError(nucd::IoErrorKind::kMalformed, path + ": " + e.what());
  }
  if (!j.is_object()) throw nucd::ParameterError(path + ": config must be a JSON object");

  std::vector<std::string> injected;
  for (const auto& [key, value] : j.items()) {
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    const bool explicit_flag = std::any_of(args.begin() + static_cast<long>(sub_pos) + 1, args.end(),
                                           [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
    if (explicit_flag) continue;
    injected.push_back(flag);
    if (value.is_array()) {
      for (const auto& v : value) injected.push_back(config_scalar(v, key));
    } else {
      injected.push_back(config_scalar(value, key));
    }
  }
  args.insert(args.begin() + static_cast<long>(sub_pos) + 1, injected.begin(), injected.end());
  return args;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw nucd::IoError(nucd::IoErrorKind::kNotFound, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  out.close();
  if (!out) throw nucd::IoError(nucd::IoErrorKind::kWrite, "cannot write " + path.string());
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw nucd::IoError(nucd::IoErrorKind::kMalformed, where + ": bad number '" + s + "'");
}

std::string format_g(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

// ---------------------------------------------------------------- matrices

bool looks_like_image(const fs::path& path) {
  const std::string head = read_file(path).substr(0, 8);
  return head.rfind("\x89PNG", 0) == 0 || head.rfind("P5", 0) == 0;
}

// Whitespace-separated reals, one row per line; blank lines separate maps.
std::vector<nucd::GrayImage> read_text_maps(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::vector<nucd::GrayImage> maps;
  std::vector<double> values;
  int width = -1;
  int rows = 0;
  int lineno = 0;
  auto flush = [&] {
    if (rows == 0) return;
    maps.emplace_back(width, rows, std::move(values));
    values.clear();
    width = -1;
    rows = 0;
  };
  std::string line;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::vector<double> row;
    std::string tok;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    while (ls >> tok) row.push_back(parse_double(tok, where));
    if (row.empty()) {
      flush();
      continue;
    }
    if (width >= 0 && static_cast<int>(row.size()) != width) {
      throw nucd::IoError(nucd::IoErrorKind::kMalformed, where + ": ragged row");
    }
    width = static_cast<int>(row.size());
    values.insert(values.end(), row.begin(), row.end());
    ++rows;
  }
  flush();
  if (maps.empty()) throw nucd::IoError(nucd::IoErrorKind::kMalformed, path.string() + ": no matrix data");
  return maps;
}

std::vector<nucd::GrayImage> read_maps(const std::vector<std::string>& files) {
  std::vector<nucd::GrayImage> maps;
  for (const auto& f : files) {
    if (looks_like_image(f)) {
      maps.push_back(nucd::load_image(f));
    } else {
      auto block = read_text_maps(f);
      maps.insert(maps.end(), std::make_move_iterator(block.begin()), std::make_move_iterator(block.end()));
    }
  }
  return maps;
}

std::vector<nucd::FeatureStack> to_stacks(std::vector<nucd::GrayImage> maps, const char* what) {
  if (maps.empty() || maps.size() % 4 != 0) {
    throw nucd::ParameterError(std::string(what) + " must hold a multiple of 4 maps (one per stage), got " +
                               std::to_string(maps.size()));
  }
  std::vector<nucd::FeatureStack> stacks;
  for (std::size_t i = 0; i < maps.size(); i += 4) {
    stacks.push_back({std::move(maps[i]), std::move(maps[i + 1]), std::move(maps[i + 2]), std::move(maps[i + 3])});
  }
  return stacks;
}

// ---------------------------------------------------------------- detections

std::string detections_csv(const std::vector<nucd::Detection>& dets) {
  std::string out = "x,y,w,h,score\n";
  for (const auto& d : dets) {
    out += std::to_string(d.bbox.x) + "," + std::to_string(d.bbox.y) + "," + std::to_string(d.bbox.w) + "," +
           std::to_string(d.bbox.h) + "," + format_g(d.score, 17) + "\n";
  }
  return out;
}

// name -> detections. Files without an image column use the key "".
std::map<std::string, std::vector<nucd::Detection>> read_detections(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw nucd::IoError(nucd::IoErrorKind::kMalformed, path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  bool named = false;
  if (line == "image,x,y,w,h,score") {
    named = true;
  } else if (line != "x,y,w,h,score") {
    throw nucd::IoError(nucd::IoErrorKind::kMalformed, path.string() + ": expected header 'x,y,w,h,score'");
  }
  std::map<std::string, std::vector<nucd::Detection>> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split(line, ',');
    const std::string where = path.string() + ":" + std::to_string(lineno);
    const std::size_t base = named ? 1 : 0;
    if (f.size() != base + 5) throw nucd::IoError(nucd::IoErrorKind::kMalformed, where + ": wrong field count");
    auto as_int = [&](const std::string& s) {
      const double v = parse_double(s, where);
      if (v != static_cast<int>(v)) throw nucd::IoError(nucd::IoErrorKind::kMalformed, where + ": bad integer");
      return static_cast<int>(v);
    };
    nucd::Detection d{{as_int(f[base]), as_int(f[base + 1]), as_int(f[base + 2]), as_int(f[base + 3])},
                      parse_double(f[base + 4], where)};
    out[named ? f[0] : std::string()].push_back(d);
  }
  return out;
}

ordered_json pr_json(const nucd::PrReport& pr, double auc) {
  return {{"iou_threshold", pr.iou_threshold}, {"tp", pr.tp},          {"fp", pr.fp},
          {"fn", pr.fn},                       {"precision", pr.precision}, {"recall", pr.recall},
          {"pr_auc", auc}};
}

// ---------------------------------------------------------------- options

struct DetectorOpts {
  nucd::DetectorParams params;
  void add(CLI::App* sub) {
    sub->add_option("--tophat-radius", params.tophat_radius, "Disk radius of the top-hat")
        ->check(CLI::PositiveNumber);
    sub->add_option("--threshold-k", params.threshold_k, "Threshold = median + k * MAD of the response");
    sub->add_option("--min-area", params.min_area, "Smallest component kept (pixels)");
    sub->add_option("--max-area", params.max_area, "Largest component kept (pixels)");
  }
};

struct EstimatorOpts {
  int degree = 3;
  std::string coord = "unit-centered";
  nucd::BlindParams blind;
  void add(CLI::App* sub) {
    sub->add_option("--degree", degree, "Polynomial degree of the bias field")->check(CLI::NonNegativeNumber);
    sub->add_option("--coord", coord, "Coordinate normalization")
        ->check(CLI::IsMember({"unit-centered", "pixel-raw"}));
    sub->add_option("--blur-sigma", blind.blur_sigma, "Blind estimator blur sigma (full-resolution pixels)");
    sub->add_option("--downsample", blind.downsample_first, "Pool 2x2 before the blind fit");
    sub->add_option("--robust-iters", blind.robust_iters, "Tukey reweighting passes of the blind fit")
        ->check(CLI::NonNegativeNumber);
  }
  nucd::CoordNorm norm() const { return {nucd::coord_mode_from_string(coord)}; }
};

ordered_json fit_json(const nucd::FitResult& fit) {
  nucd::SampleMeta meta;
  meta.width = fit.width;
  meta.height = fit.height;
  meta.coeffs = fit.coeffs;
  meta.coord = fit.coord;
  meta.k = 1.0;
  ordered_json j;
  const ordered_json full = nucd::to_json(meta);
  for (const char* key : {"width", "height", "degree", "coord", "coeffs", "k", "scale", "offset"}) j[key] = full[key];
  j["residual_rms"] = fit.residual_rms;
  j["method"] = nucd::to_string(fit.method);
  j["condition_estimate"] = fit.condition_estimate;
  if (fit.method == nucd::FitMethod::kBlind) j["removed_constant"] = fit.removed_constant;
  return j;
}

std::pair<int, int> parse_size(const std::string& s) {
  const auto x = s.find('x');
  try {
    if (x != std::string::npos) {
      std::size_t a = 0, b = 0;
      const int w = std::stoi(s.substr(0, x), &a);
      const int h = std::stoi(s.substr(x + 1), &b);
      if (a == x && b == s.size() - x - 1 && w > 0 && h > 0) return {w, h};
    }
  } catch (const std::exception&) {
  }
  throw nucd::ParameterError("size must look like WxH, got '" + s + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Polynomial bias-field estimation, correction and detection scoring"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  add_config(synth);
  nucd::CorpusConfig corpus_cfg;
  std::string size = "640x512";
  std::string out_dir;
  std::string coord_name = "unit-centered";
  std::vector<double> background_mix(corpus_cfg.scene.background_mix.begin(), corpus_cfg.scene.background_mix.end());
  std::vector<double> scale_mix(corpus_cfg.scene.scale_mix.begin(), corpus_cfg.scene.scale_mix.end());
  synth->add_option("--count", corpus_cfg.count, "Number of samples")->check(CLI::PositiveNumber);
  synth->add_option("--size", size, "Image size WxH");
  synth->add_option("--degree", corpus_cfg.scene.degree, "Bias-field degree")->check(CLI::NonNegativeNumber);
  synth->add_option("--k", corpus_cfg.scene.k, "Nonuniformity severity")->check(CLI::NonNegativeNumber);
  synth->add_option("--seed", corpus_cfg.seed, "Corpus seed");
  synth->add_option("--out", out_dir, "Output directory")->required();
  synth->add_option("--coord", coord_name, "Coordinate normalization")
      ->check(CLI::IsMember({"unit-centered", "pixel-raw"}));
  synth->add_option("--background-mix", background_mix, "Weights of flat, gradient, cloud-noise, structured")
      ->expected(4);
  synth->add_option("--scale-mix", scale_mix, "Weights of target side bins [2,10) [10,20) [20,30) [30,40)")
      ->expected(4);
  synth->add_option("--min-targets", corpus_cfg.scene.min_targets, "Fewest targets per image");
  synth->add_option("--max-targets", corpus_cfg.scene.max_targets, "Most targets per image");
  synth->add_option("--min-contrast", corpus_cfg.scene.min_contrast, "Lowest target peak contrast");
  synth->add_option("--max-contrast", corpus_cfg.scene.max_contrast, "Highest target peak contrast");
  synth->add_option("--amplitude-bounds", corpus_cfg.scene.amplitude.bounds,
                    "Coefficient bound per total order 0, 1, 2, ...");
  synth->add_option("--zero-mean", corpus_cfg.scene.amplitude.zero_mean,
                    "Replace a00 so each field has zero mean over the image square");
  synth->add_option("--jobs", corpus_cfg.jobs, "Worker threads")->check(CLI::PositiveNumber);

  // correct
  auto* corr = app.add_subcommand("correct", "Estimate and remove the bias field of one image");
  add_config(corr);
  std::string corr_in, corr_out, corr_paired, corr_coeffs;
  EstimatorOpts corr_est;
  corr->add_option("--in", corr_in, "Degraded image")->required();
  corr->add_option("--out", corr_out, "Corrected image (clamped to [0,1], 16-bit)")->required();
  corr->add_option("--paired", corr_paired, "Clear image; switches to the paired least-squares fit [none: blind fit]");
  corr->add_option("--emit-coeffs", corr_coeffs, "Write the fitted coefficients as JSON [none]");
  corr_est.add(corr);

  // detect
  auto* det = app.add_subcommand("detect", "Detect bright small targets");
  add_config(det);
  std::string det_in, det_out;
  DetectorOpts det_opts;
  det->add_option("--in", det_in, "Input image")->required();
  det->add_option("--out", det_out, "Detections CSV (x,y,w,h,score)")->required();
  det_opts.add(det);

  // score
  auto* score = app.add_subcommand("score", "Match detections against ground truth");
  add_config(score);
  std::string score_dets, score_gt, score_report, score_image, score_curve;
  double score_iou = 0.5;
  score->add_option("--dets", score_dets, "Detections CSV")->required();
  score->add_option("--gt", score_gt, "Annotations CSV (image,x,y,w,h)")->required();
  score->add_option("--iou", score_iou, "IoU threshold for a match")->check(CLI::Range(0.0, 1.0));
  score->add_option("--report", score_report, "Precision/recall JSON")->required();
  score->add_option("--image", score_image, "Annotation image name for single-image detection files [none: use the CSV image column]");
  score->add_option("--pr-curve", score_curve, "Write the precision-recall sweep as CSV [none]");

  // eval
  auto* eval = app.add_subcommand("eval", "Score externally corrected images against a corpus");
  add_config(eval);
  std::string eval_corpus, eval_corrected, eval_report, eval_curve;
  double eval_iou = 0.5;
  bool eval_clamp = true;
  int eval_jobs = 1;
  DetectorOpts eval_det;
  eval->add_option("--corpus", eval_corpus, "Corpus directory")->required();
  eval->add_option("--corrected", eval_corrected, "Directory of corrected images named like the corpus")
      ->required();
  eval->add_option("--report", eval_report, "Report JSON")->required();
  eval->add_option("--pr-curve", eval_curve, "Write the precision-recall sweep as CSV [none]");
  eval->add_option("--iou", eval_iou, "IoU threshold for a match")->check(CLI::Range(0.0, 1.0));
  eval->add_option("--clamp-display", eval_clamp, "Clamp detector input to [0,1]");
  eval->add_option("--jobs", eval_jobs, "Worker threads")->check(CLI::PositiveNumber);
  eval_det.add(eval);

  // loss
  auto* loss = app.add_subcommand("loss", "Evaluate a training loss on feature maps");
  add_config(loss);
  std::string loss_op;
  std::vector<std::string> loss_a, loss_b;
  std::string loss_mask;
  loss->add_option("--op", loss_op, "tebs, br or cossim")->required()->check(CLI::IsMember({"tebs", "br", "cossim"}));
  loss->add_option("--a", loss_a, "Feature maps (PNG or text matrices; 4 per stack)")->required();
  loss->add_option("--b", loss_b, "Second feature maps (br, cossim)");
  loss->add_option("--mask", loss_mask, "Target mask (tebs); nonzero means target [none]");

  // pipeline
  auto* pipe = app.add_subcommand("pipeline", "Run one strategy over a corpus and report");
  add_config(pipe);
  nucd::PipelineConfig pipe_cfg;
  std::string pipe_strategy = "direct", pipe_corpus, pipe_report, pipe_curve;
  EstimatorOpts pipe_est;
  DetectorOpts pipe_det;
  pipe->add_option("--strategy", pipe_strategy, "direct, blind-correct, or paired-correct (upper bound for union)")
      ->check(CLI::IsMember({"direct", "blind-correct", "paired-correct"}));
  pipe->add_option("--corpus", pipe_corpus, "Corpus directory")->required();
  pipe->add_option("--report", pipe_report, "Report JSON")->required();
  pipe->add_option("--pr-curve", pipe_curve, "Write the precision-recall sweep as CSV [none]");
  pipe->add_option("--iou", pipe_cfg.iou_threshold, "IoU threshold for a match")->check(CLI::Range(0.0, 1.0));
  pipe->add_option("--clamp-display", pipe_cfg.clamp_display, "Clamp detector input to [0,1]");
  pipe->add_option("--seed", pipe_cfg.seed, "Recorded in the report");
  pipe->add_option("--jobs", pipe_cfg.jobs, "Worker threads")->check(CLI::PositiveNumber);
  pipe_est.add(pipe);
  pipe_det.add(pipe);

  try {
    std::vector<std::string> subcommands;
    for (const CLI::App* sub : app.get_subcommands({})) subcommands.push_back(sub->get_name());
    std::vector<std::string> args = expand_config(argc, argv, subcommands);
    std::vector<char*> ptrs;
    for (auto& a : args) ptrs.push_back(a.data());
    app.parse(static_cast<int>(ptrs.size()), ptrs.data());
  } catch (const nucd::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*synth) {
      const auto [w, h] = parse_size(size);
      corpus_cfg.scene.width = w;
      corpus_cfg.scene.height = h;
      corpus_cfg.scene.coord = {nucd::coord_mode_from_string(coord_name)};
      std::copy(background_mix.begin(), background_mix.end(), corpus_cfg.scene.background_mix.begin());
      std::copy(scale_mix.begin(), scale_mix.end(), corpus_cfg.scene.scale_mix.begin());
      nucd::generate_corpus(corpus_cfg, out_dir);
    } else if (*corr) {
      const nucd::GrayImage y = nucd::load_image(corr_in);
      nucd::FitResult fit = corr_paired.empty()
                                ? nucd::fit_blind(y, corr_est.degree, corr_est.norm(), corr_est.blind)
                                : nucd::fit_paired(y, nucd::load_image(corr_paired), corr_est.degree, corr_est.norm());
      nucd::save_image(nucd::correct(y, fit), corr_out);
      if (!corr_coeffs.empty()) write_file(corr_coeffs, fit_json(fit).dump(2) + "\n");
    } else if (*det) {
      write_file(det_out, detections_csv(nucd::detect(nucd::load_image(det_in), det_opts.params)));
    } else if (*score) {
      const auto dets = read_detections(score_dets);
      const nucd::AnnotationTable gt = nucd::read_annotations(score_gt);
      std::vector<std::string> names;
      if (dets.count("")) {
        if (!score_image.empty()) {
          names.push_back(score_image);
        } else if (gt.size() == 1) {
          names.push_back(gt.begin()->first);
        } else if (!gt.empty()) {
          throw nucd::ParameterError("annotations cover several images; pass --image");
        }
      } else {
        for (const auto& [name, boxes] : gt) names.push_back(name);
        for (const auto& [name, ds] : dets) {
          if (!gt.count(name)) names.push_back(name);
        }
        std::sort(names.begin(), names.end());
      }
      nucd::PrReport total;
      total.iou_threshold = score_iou;
      std::vector<nucd::ScoredOutcome> outcomes;
      auto score_one = [&](const std::vector<nucd::Detection>& ds, const std::vector<nucd::BBox>& gts) {
        const auto m = nucd::match_detections(ds, gts, score_iou);
        total += m.report;
        for (std::size_t i = 0; i < ds.size(); ++i) outcomes.push_back({ds[i].score, m.true_positive[i]});
      };
      static const std::vector<nucd::Detection> kNone;
      static const std::vector<nucd::BBox> kNoBoxes;
      if (dets.count("") && names.empty()) score_one(dets.at(""), kNoBoxes);
      for (const auto& name : names) {
        const auto d = dets.count("") ? dets.find("") : dets.find(name);
        const auto g = gt.find(name);
        score_one(d == dets.end() ? kNone : d->second, g == gt.end() ? kNoBoxes : g->second);
      }
      total.finalize();
      const nucd::PrCurve curve = nucd::pr_curve(outcomes, total.tp + total.fn);
      nucd::write_json_atomic(pr_json(total, curve.auc), score_report);
      if (!score_curve.empty()) write_file(score_curve, nucd::pr_curve_csv(curve));
    } else if (*eval) {
      const nucd::EvalReport report =
          nucd::evaluate_corrected(eval_corpus, eval_corrected, eval_det.params, eval_iou, eval_clamp, eval_jobs);
      nucd::write_json_atomic(nucd::to_json(report), eval_report);
      if (!eval_curve.empty()) write_file(eval_curve, nucd::pr_curve_csv(report.curve));
    } else if (*loss) {
      double value = 0.0;
      if (loss_op == "cossim") {
        const auto a = read_maps(loss_a);
        const auto b = read_maps(loss_b);
        if (a.size() != 1 || b.size() != 1) throw nucd::ParameterError("cossim takes exactly one map in --a and --b");
        value = nucd::cos_sim(a[0], b[0]);
      } else if (loss_op == "br") {
        const auto a = to_stacks(read_maps(loss_a), "--a");
        const auto b = to_stacks(read_maps(loss_b), "--b");
        if (a.size() != b.size()) throw nucd::ParameterError("--a and --b hold different channel counts");
        value = nucd::br_loss(a, b);
      } else {
        if (loss_mask.empty()) throw nucd::ParameterError("tebs needs --mask");
        const auto mask_maps = read_maps({loss_mask});
        if (mask_maps.size() != 1) throw nucd::ParameterError("--mask must hold one map");
        const nucd::GrayImage& m = mask_maps[0];
        nucd::BinaryMask mask(m.width(), m.height());
        for (int y = 0; y < m.height(); ++y) {
          for (int x = 0; x < m.width(); ++x) mask.set(x, y, m(x, y) != 0.0);
        }
        value = nucd::tebs_loss(mask, to_stacks(read_maps(loss_a), "--a"));
      }
      std::cout << format_g(value, 12) << "\n";
    } else if (*pipe) {
      pipe_cfg.strategy = nucd::strategy_from_string(pipe_strategy);
      pipe_cfg.corpus = pipe_corpus;
      pipe_cfg.report = pipe_report;
      pipe_cfg.pr_curve = pipe_curve;
      pipe_cfg.degree = pipe_est.degree;
      pipe_cfg.coord = pipe_est.norm();
      pipe_cfg.blind = pipe_est.blind;
      pipe_cfg.detector = pipe_det.params;
      const nucd::EvalReport report = nucd::run_pipeline(pipe_cfg);
      nucd::write_json_atomic(nucd::to_json(report), pipe_cfg.report);
      if (!pipe_curve.empty()) write_file(pipe_curve, nucd::pr_curve_csv(report.curve));
    }
  } catch (const nucd::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
