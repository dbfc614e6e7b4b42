#include "nucd/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "nucd/errors.hpp"
#include "nucd/image_io.hpp"
#include "nucd/parallel.hpp"

namespace nucd {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr const char* kAnnotationHeader = "image,x,y,w,h";

template <typename T>
T required(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw IoError(IoErrorKind::kMalformed, std::string("sidecar is missing \"") + key + "\"");
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw IoError(IoErrorKind::kMalformed, std::string("sidecar field \"") + key + "\" has the wrong type");
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  out.close();
  if (!out) throw IoError(IoErrorKind::kWrite, "cannot write " + path.string());
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError(IoErrorKind::kWrite, "cannot create directory " + dir.string());
  }
}

int parse_int(std::string_view field, const std::string& where) {
  int value = 0;
  const auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || end != field.data() + field.size()) {
    throw IoError(IoErrorKind::kMalformed, where + ": bad integer '" + std::string(field) + "'");
  }
  return value;
}

std::string stem_of(const std::string& name) { return fs::path(name).stem().string(); }

}  // namespace

ordered_json to_json(const SampleMeta& meta) {
  ordered_json j;
  j["width"] = meta.width;
  j["height"] = meta.height;
  j["degree"] = meta.coeffs.degree();
  j["coord"] = to_string(meta.coord.mode);
  j["coeffs"] = std::vector<double>(meta.coeffs.values().begin(), meta.coeffs.values().end());
  j["k"] = meta.k;
  j["scale"] = meta.scale;
  j["offset"] = meta.offset;
  j["amplitude"] = {{"bounds", meta.amplitude.bounds}, {"zero_mean", meta.amplitude.zero_mean}};
  j["background"] = to_string(meta.background);
  j["seed"] = meta.seed;
  return j;
}

SampleMeta sample_meta_from_json(const json& j) {
  SampleMeta meta;
  meta.width = required<int>(j, "width");
  meta.height = required<int>(j, "height");
  try {
    meta.coeffs = CoeffVector(required<int>(j, "degree"), required<std::vector<double>>(j, "coeffs"));
    meta.coord.mode = coord_mode_from_string(required<std::string>(j, "coord"));
    meta.background = background_kind_from_string(required<std::string>(j, "background"));
  } catch (const ParameterError& e) {
    throw IoError(IoErrorKind::kMalformed, std::string("sidecar: ") + e.what());
  }
  meta.k = required<double>(j, "k");
  meta.scale = required<double>(j, "scale");
  meta.offset = required<double>(j, "offset");
  const json amplitude = required<json>(j, "amplitude");
  meta.amplitude.bounds = required<std::vector<double>>(amplitude, "bounds");
  meta.amplitude.zero_mean = required<bool>(amplitude, "zero_mean");
  meta.seed = required<std::uint64_t>(j, "seed");
  if (meta.width < 1 || meta.height < 1 || !(meta.scale > 0.0)) {
    throw IoError(IoErrorKind::kMalformed, "sidecar has invalid size or scale");
  }
  return meta;
}

std::string sample_stem(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%05d", index);
  return buf;
}

void generate_corpus(const CorpusConfig& config, const fs::path& dir) {
  if (config.count < 1) throw ParameterError("corpus count must be >= 1");
  if (config.jobs < 1) throw ParameterError("jobs must be >= 1");
  // Fail on bad scene parameters before touching the filesystem.
  SceneConfig probe = config.scene;
  probe.width = std::min(probe.width, 64);
  probe.height = std::min(probe.height, 64);
  probe.min_targets = probe.max_targets = 0;
  make_scene(probe, 0);

  for (const char* sub : {"clear", "degraded", "meta"}) make_dir(dir / sub);

  std::vector<std::vector<BBox>> boxes(config.count);
  parallel_for(config.count, config.jobs, [&](int i) {
    const SceneRecord scene = make_scene(config.scene, scene_seed(config.seed, i));
    const std::string stem = sample_stem(i);

    const double lo = scene.degraded.min();
    const double hi = scene.degraded.max();
    SampleMeta meta;
    meta.width = scene.clear.width();
    meta.height = scene.clear.height();
    meta.coeffs = scene.coeffs;
    meta.coord = scene.coord;
    meta.k = scene.severity;
    meta.offset = lo;
    meta.scale = hi > lo ? hi - lo : 1.0;
    meta.amplitude = config.scene.amplitude;
    meta.background = scene.background;
    meta.seed = scene.seed;

    GrayImage stored = scene.degraded;
    for (double& v : stored.pixels()) v = (v - meta.offset) / meta.scale;

    save_image(scene.clear, dir / "clear" / (stem + ".png"));
    save_image(stored, dir / "degraded" / (stem + ".png"));
    write_text(dir / "meta" / (stem + ".json"), to_json(meta).dump(2) + "\n");
    boxes[i] = scene.annotations;
  });

  AnnotationTable table;
  for (int i = 0; i < config.count; ++i) table[sample_stem(i) + ".png"] = boxes[i];
  write_annotations(table, dir / "annotations.csv");
}

AnnotationTable read_annotations(const fs::path& csv) {
  std::ifstream in(csv, std::ios::binary);
  if (!in) throw IoError(IoErrorKind::kNotFound, "cannot open " + csv.string());
  AnnotationTable table;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1) {
      if (line != kAnnotationHeader) {
        throw IoError(IoErrorKind::kMalformed,
                      csv.string() + ": expected header '" + kAnnotationHeader + "'");
      }
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    for (std::size_t comma; (comma = rest.find(',')) != std::string_view::npos;) {
      fields.push_back(rest.substr(0, comma));
      rest.remove_prefix(comma + 1);
    }
    fields.push_back(rest);
    const std::string where = csv.string() + ":" + std::to_string(lineno);
    if (fields.size() != 5 || fields[0].empty()) {
      throw IoError(IoErrorKind::kMalformed, where + ": expected 5 fields");
    }
    const BBox box{parse_int(fields[1], where), parse_int(fields[2], where),
                   parse_int(fields[3], where), parse_int(fields[4], where)};
    if (box.w < 1 || box.h < 1) {
      throw IoError(IoErrorKind::kMalformed, where + ": box extents must be positive");
    }
    table[std::string(fields[0])].push_back(box);
  }
  if (lineno == 0) throw IoError(IoErrorKind::kMalformed, csv.string() + ": empty file");
  return table;
}

void write_annotations(const AnnotationTable& table, const fs::path& csv) {
  std::ostringstream out;
  out << kAnnotationHeader << '\n';
  for (const auto& [name, boxes] : table) {
    for (const BBox& b : boxes) {
      out << name << ',' << b.x << ',' << b.y << ',' << b.w << ',' << b.h << '\n';
    }
  }
  write_text(csv, out.str());
}

Corpus::Corpus(fs::path dir) : dir_(std::move(dir)) {
  const fs::path degraded = dir_ / "degraded";
  if (!fs::is_directory(degraded)) {
    throw IoError(IoErrorKind::kNotFound, "no degraded/ directory under " + dir_.string());
  }
  for (const auto& entry : fs::directory_iterator(degraded)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") {
      names_.push_back(entry.path().filename().string());
    }
  }
  if (names_.empty()) throw IoError(IoErrorKind::kNotFound, "no images in " + degraded.string());
  std::sort(names_.begin(), names_.end());
  if (fs::exists(dir_ / "annotations.csv")) {
    annotations_ = read_annotations(dir_ / "annotations.csv");
    has_annotations_ = true;
  }
}

bool Corpus::has_clear(int i) const { return fs::is_regular_file(dir_ / "clear" / name(i)); }

bool Corpus::has_meta(int i) const {
  return fs::is_regular_file(dir_ / "meta" / (stem_of(name(i)) + ".json"));
}

GrayImage Corpus::load_clear(int i) const { return load_image(dir_ / "clear" / name(i)); }

GrayImage Corpus::load_degraded(int i) const {
  GrayImage img = load_image(dir_ / "degraded" / name(i));
  if (has_meta(i)) {
    const SampleMeta meta = load_meta(i);
    for (double& v : img.pixels()) v = meta.offset + meta.scale * v;
  }
  return img;
}

SampleMeta Corpus::load_meta(int i) const {
  const fs::path path = dir_ / "meta" / (stem_of(name(i)) + ".json");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(IoErrorKind::kNotFound, "cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw IoError(IoErrorKind::kMalformed, path.string() + ": " + e.what());
  }
  return sample_meta_from_json(j);
}

std::vector<BBox> Corpus::annotations(int i) const {
  const auto it = annotations_.find(name(i));
  return it == annotations_.end() ? std::vector<BBox>{} : it->second;
}

}  // namespace nucd
