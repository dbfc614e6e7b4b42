#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nucd/biasfield.hpp"
#include "nucd/image.hpp"
#include "nucd/synthesis.hpp"

namespace nucd {

/// Per-sample sidecar. The degraded PNG stores (Y - offset) / scale at 16 bit.
struct SampleMeta {
  int width = 0;
  int height = 0;
  CoeffVector coeffs{3};
  CoordNorm coord;
  double k = 0.0;
  double scale = 1.0;
  double offset = 0.0;
  AmplitudeSpec amplitude;
  BackgroundKind background = BackgroundKind::kFlat;
  std::uint64_t seed = 0;
};

nlohmann::ordered_json to_json(const SampleMeta& meta);
/// Throws IoError(kMalformed) on missing or ill-typed fields.
SampleMeta sample_meta_from_json(const nlohmann::json& j);

struct CorpusConfig {
  int count = 100;
  SceneConfig scene;
  std::uint64_t seed = 0;
  int jobs = 1;
};

/// "00042"
std::string sample_stem(int index);

/// Writes clear/, degraded/, meta/ and annotations.csv under `dir`.
/// Output bytes depend only on the config, never on `jobs`.
void generate_corpus(const CorpusConfig& config, const std::filesystem::path& dir);

/// image file name -> boxes, in file order.
using AnnotationTable = std::map<std::string, std::vector<BBox>>;

AnnotationTable read_annotations(const std::filesystem::path& csv);
void write_annotations(const AnnotationTable& table, const std::filesystem::path& csv);

/// Read-only view of a corpus directory.
class Corpus {
 public:
  /// Indexes degraded/*.png. Throws IoError when the directory is missing or
  /// holds no samples.
  explicit Corpus(std::filesystem::path dir);

  const std::filesystem::path& dir() const noexcept { return dir_; }
  int size() const noexcept { return static_cast<int>(names_.size()); }
  /// File name ("00042.png") of sample i, in sorted order.
  const std::string& name(int i) const { return names_.at(i); }

  bool has_clear(int i) const;
  bool has_meta(int i) const;
  bool has_annotations() const noexcept { return has_annotations_; }

  GrayImage load_clear(int i) const;
  /// Degraded image in model units: file values mapped back through the
  /// sidecar scale and offset when a sidecar is present.
  GrayImage load_degraded(int i) const;
  SampleMeta load_meta(int i) const;
  /// Empty when the corpus has no annotations or none for this image.
  std::vector<BBox> annotations(int i) const;

 private:
  std::filesystem::path dir_;
  std::vector<std::string> names_;
  AnnotationTable annotations_;
  bool has_annotations_ = false;
};

}  // namespace nucd
