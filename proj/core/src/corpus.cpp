#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "bubbletrack/corpus.hpp"
#include "bubbletrack/error.hpp"

namespace bubbletrack {

using nlohmann::json;

Calibration calibrate(double reference_px, double reference_cm, double frame_rate) {
  const auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!positive(reference_px) || !positive(reference_cm) || !positive(frame_rate)) {
    throw DomainError("calibration inputs must be positive and finite");
  }
  return Calibration{reference_px / reference_cm, frame_rate};
}

double box_iou(const Box& a, const Box& b) {
  const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
  const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
  const double inter = ix * iy;
  const double uni = std::max(0.0, a.area()) + std::max(0.0, b.area()) - inter;
  if (uni <= 0.0) throw DomainError("IoU of two empty boxes is undefined");
  return inter / uni;
}

std::string_view to_string(Category c) {
  switch (c) {
    case Category::Attached: return "attached";
    case Category::Detached: return "detached";
    case Category::Bubble: return "bubble";
  }
  return "bubble";
}

std::optional<Category> parse_category(std::string_view name) {
  if (name == "attached") return Category::Attached;
  if (name == "detached") return Category::Detached;
  if (name == "bubble") return Category::Bubble;
  return std::nullopt;
}

const Frame* Dataset::find_frame(int frame_index) const {
  const auto it = std::lower_bound(frames.begin(), frames.end(), frame_index,
                                   [](const Frame& f, int i) { return f.index < i; });
  if (it == frames.end() || it->index != frame_index) return nullptr;
  return &*it;
}

double Dataset::duration_s() const {
  if (frames.empty()) return 0.0;
  return (frames.back().index - frames.front().index + 1) / calibration.frame_rate;
}

std::size_t Dataset::detection_count() const {
  std::size_t n = 0;
  for (const Frame& f : frames) n += f.detections.size();
  return n;
}

namespace {

// Tight bounds straight from the runs, without materializing the mask.
std::optional<Box> rle_bounds(const Rle& rle) {
  const std::uint64_t h = static_cast<std::uint64_t>(rle.height);
  std::uint64_t pos = 0;
  std::uint64_t x0 = UINT64_MAX, x1 = 0, y0 = UINT64_MAX, y1 = 0;
  bool any = false;
  for (std::size_t i = 0; i < rle.counts.size(); ++i) {
    const std::uint64_t run = rle.counts[i];
    if (i % 2 == 1 && run > 0) {
      const std::uint64_t first = pos, last = pos + run - 1;
      const std::uint64_t c0 = first / h, c1 = last / h;
      any = true;
      x0 = std::min(x0, c0);
      x1 = std::max(x1, c1);
      if (c0 == c1) {
        y0 = std::min(y0, first % h);
        y1 = std::max(y1, last % h);
      } else {
        y0 = 0;
        y1 = h - 1;
      }
    }
    pos += run;
  }
  if (!any) return std::nullopt;
  return Box{static_cast<double>(x0), static_cast<double>(y0), static_cast<double>(x1 - x0 + 1),
             static_cast<double>(y1 - y0 + 1)};
}

std::string index_path(const std::string& base, std::size_t i) {
  return base + "[" + std::to_string(i) + "]";
}

const json& require(const json& obj, const std::string& path, const char* key) {
  if (!obj.is_object()) throw ParseError(path, "expected object");
  const auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(path + "." + key, "missing field");
  return *it;
}

double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ParseError(path, "expected number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ParseError(path, "expected finite number");
  return v;
}

std::int64_t as_integer(const json& j, const std::string& path) {
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_number_float()) {
    const double v = j.get<double>();
    if (std::isfinite(v) && std::floor(v) == v) return static_cast<std::int64_t>(v);
  }
  throw ParseError(path, "expected integer");
}

const json& as_array(const json& j, const std::string& path) {
  if (!j.is_array()) throw ParseError(path, "expected array");
  return j;
}

Rle parse_mask(const json& m, const std::string& path, int width, int height) {
  const json& format = require(m, path, "format");
  if (!format.is_string()) throw ParseError(path + ".format", "expected string");
  const std::string fmt = format.get<std::string>();
  if (fmt == "rle") {
    const std::string cpath = path + ".counts";
    const json& counts = as_array(require(m, path, "counts"), cpath);
    std::vector<std::uint32_t> runs;
    runs.reserve(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) {
      const std::int64_t c = as_integer(counts[i], index_path(cpath, i));
      if (c < 0 || c > UINT32_MAX) throw ParseError(index_path(cpath, i), "run out of range");
      runs.push_back(static_cast<std::uint32_t>(c));
    }
    std::uint64_t sum = 0;
    for (const auto r : runs) sum += r;
    if (sum != static_cast<std::uint64_t>(width) * static_cast<std::uint64_t>(height)) {
      throw DecodeError(cpath + ": RLE counts sum to " + std::to_string(sum) + ", expected " +
                        std::to_string(static_cast<std::uint64_t>(width) * height));
    }
    // Canonicalize (merge zero-length interior runs) by a decode/encode pass
    // only when needed.
    const bool canonical =
        std::none_of(runs.begin() + (runs.empty() ? 0 : 1), runs.end(), [](auto r) { return r == 0; });
    if (!canonical) return encode_mask(decode_rle(runs, width, height));
    return Rle{width, height, std::move(runs)};
  }
  if (fmt == "polygon") {
    const std::string ppath = path + ".points";
    const json& pts = as_array(require(m, path, "points"), ppath);
    std::vector<Point> points;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const std::string vp = index_path(ppath, i);
      if (!pts[i].is_array() || pts[i].size() != 2) throw ParseError(vp, "expected [x, y]");
      points.push_back({as_number(pts[i][0], vp + "[0]"), as_number(pts[i][1], vp + "[1]")});
    }
    try {
      return encode_mask(decode_polygon(points, width, height));
    } catch (const DecodeError& e) {
      throw DecodeError(ppath + ": " + e.what());
    }
  }
  throw ParseError(path + ".format", "unknown mask format '" + fmt + "'");
}

Detection parse_detection(const json& d, const std::string& path, int width, int height) {
  Detection det;
  const std::string bpath = path + ".bbox";
  const json& bbox = as_array(require(d, path, "bbox"), bpath);
  if (bbox.size() != 4) throw ParseError(bpath, "expected [x, y, w, h]");
  det.bbox = Box{as_number(bbox[0], bpath + "[0]"), as_number(bbox[1], bpath + "[1]"),
                 as_number(bbox[2], bpath + "[2]"), as_number(bbox[3], bpath + "[3]")};

  const json& cat = require(d, path, "category");
  if (!cat.is_string()) throw ParseError(path + ".category", "expected string");
  const auto category = parse_category(cat.get<std::string>());
  if (!category) {
    throw ParseError(path + ".category", "unknown category '" + cat.get<std::string>() + "'");
  }
  det.category = *category;

  det.score = as_number(require(d, path, "score"), path + ".score");
  if (det.score < 0.0 || det.score > 1.0) {
    throw ValidationError(path + ".score: score must be in [0, 1]");
  }

  det.mask = parse_mask(require(d, path, "mask"), path + ".mask", width, height);
  const auto bounds = rle_bounds(det.mask);
  if (!bounds) throw ValidationError(path + ".mask: mask is empty");
  if (!(*bounds == det.bbox)) {
    std::ostringstream os;
    os << path << ".bbox: [" << det.bbox.x << ", " << det.bbox.y << ", " << det.bbox.w << ", "
       << det.bbox.h << "] does not match mask bounds [" << bounds->x << ", " << bounds->y << ", "
       << bounds->w << ", " << bounds->h << "]";
    throw ValidationError(os.str());
  }
  return det;
}

json parse_text(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    // Byte offset to line:column for the message.
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ParseError("", "JSON syntax error at line " + std::to_string(line) + ", column " +
                             std::to_string(col) + ": " + e.what());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("", "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void finalize(Dataset& ds) {
  std::stable_sort(ds.frames.begin(), ds.frames.end(),
                   [](const Frame& a, const Frame& b) { return a.index < b.index; });
  for (std::size_t i = 1; i < ds.frames.size(); ++i) {
    if (ds.frames[i].index == ds.frames[i - 1].index) {
      throw ValidationError("duplicate frame index " + std::to_string(ds.frames[i].index));
    }
  }
  bool one_class = false, two_class = false;
  for (const Frame& f : ds.frames) {
    for (const Detection& d : f.detections) {
      (d.category == Category::Bubble ? one_class : two_class) = true;
    }
  }
  if (one_class && two_class) {
    throw ValidationError("dataset mixes 'bubble' with 'attached'/'detached' labels");
  }
  ds.scheme = one_class ? LabelScheme::OneClass : LabelScheme::TwoClass;
}

}  // namespace

Dataset parse_dataset(std::string_view json_text) {
  const json doc = parse_text(json_text);
  if (!doc.is_object()) throw ParseError("", "expected top-level object");

  Dataset ds;
  const json& info = require(doc, "", "info");
  const double fps = as_number(require(info, "info", "frame_rate_fps"), "info.frame_rate_fps");
  const double alpha = as_number(require(info, "info", "pixels_per_cm"), "info.pixels_per_cm");
  const std::int64_t width = as_integer(require(info, "info", "width"), "info.width");
  const std::int64_t height = as_integer(require(info, "info", "height"), "info.height");
  if (fps <= 0.0) throw ValidationError("info.frame_rate_fps: must be positive");
  if (alpha <= 0.0) throw ValidationError("info.pixels_per_cm: must be positive");
  if (width <= 0 || height <= 0 || width > 1 << 16 || height > 1 << 16) {
    throw ValidationError("info.width/height: must be positive (at most 65536)");
  }
  ds.calibration = Calibration{alpha, fps};
  ds.frame_width = static_cast<int>(width);
  ds.frame_height = static_cast<int>(height);

  const json& frames = as_array(require(doc, "", "frames"), "frames");
  if (frames.empty()) throw ValidationError("frames: dataset has no frames");
  ds.frames.reserve(frames.size());
  for (std::size_t fi = 0; fi < frames.size(); ++fi) {
    const std::string fpath = index_path("frames", fi);
    Frame frame;
    const std::int64_t index = as_integer(require(frames[fi], fpath, "index"), fpath + ".index");
    if (index < 0 || index > INT32_MAX) throw ValidationError(fpath + ".index: out of range");
    frame.index = static_cast<int>(index);
    const std::string dpath = fpath + ".detections";
    const json& dets = as_array(require(frames[fi], fpath, "detections"), dpath);
    frame.detections.reserve(dets.size());
    for (std::size_t di = 0; di < dets.size(); ++di) {
      frame.detections.push_back(
          parse_detection(dets[di], index_path(dpath, di), ds.frame_width, ds.frame_height));
    }
    ds.frames.push_back(std::move(frame));
  }
  finalize(ds);
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    return parse_dataset(text);
  } catch (const ParseError& e) {
    throw ParseError(e.path(), path.string() + ": " + e.detail());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  } catch (const DecodeError& e) {
    throw DecodeError(path.string() + ": " + e.what());
  }
}

std::string dataset_to_json(const Dataset& ds) {
  nlohmann::ordered_json doc;
  doc["info"] = {{"frame_rate_fps", ds.calibration.frame_rate},
                 {"pixels_per_cm", ds.calibration.pixels_per_cm},
                 {"width", ds.frame_width},
                 {"height", ds.frame_height}};
  auto frames = nlohmann::ordered_json::array();
  for (const Frame& f : ds.frames) {
    auto dets = nlohmann::ordered_json::array();
    for (const Detection& d : f.detections) {
      nlohmann::ordered_json jd;
      jd["bbox"] = {d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h};
      jd["category"] = std::string(to_string(d.category));
      jd["score"] = d.score;
      jd["mask"] = {{"format", "rle"}, {"counts", d.mask.counts}};
      dets.push_back(std::move(jd));
    }
    frames.push_back({{"index", f.index}, {"detections", std::move(dets)}});
  }
  doc["frames"] = std::move(frames);
  return doc.dump() + "\n";
}

Dataset load_coco(const std::filesystem::path& path, const Calibration& calibration) {
  const json doc = parse_text(read_file(path));
  if (!doc.is_object()) throw ParseError("", "expected top-level COCO object");

  std::map<std::int64_t, Category> categories;
  const json& cats = as_array(require(doc, "", "categories"), "categories");
  for (std::size_t i = 0; i < cats.size(); ++i) {
    const std::string cp = index_path("categories", i);
    const json& name = require(cats[i], cp, "name");
    if (!name.is_string()) throw ParseError(cp + ".name", "expected string");
    const auto c = parse_category(name.get<std::string>());
    if (!c) throw ParseError(cp + ".name", "unknown category '" + name.get<std::string>() + "'");
    categories[as_integer(require(cats[i], cp, "id"), cp + ".id")] = *c;
  }

  Dataset ds;
  ds.calibration = calibration;
  std::map<std::int64_t, std::size_t> frame_of_image;
  const json& images = as_array(require(doc, "", "images"), "images");
  std::vector<std::int64_t> ids;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const std::string ip = index_path("images", i);
    const std::int64_t w = as_integer(require(images[i], ip, "width"), ip + ".width");
    const std::int64_t h = as_integer(require(images[i], ip, "height"), ip + ".height");
    if (i == 0) {
      ds.frame_width = static_cast<int>(w);
      ds.frame_height = static_cast<int>(h);
    } else if (w != ds.frame_width || h != ds.frame_height) {
      throw ValidationError(ip + ": frame dimensions differ from the first image");
    }
    const std::int64_t id = as_integer(require(images[i], ip, "id"), ip + ".id");
    if (id < 0 || id > INT32_MAX) throw ValidationError(ip + ".id: out of range");
    ids.push_back(id);
  }
  if (ids.empty()) throw ValidationError("images: dataset has no frames");
  if (ds.frame_width <= 0 || ds.frame_height <= 0) throw ValidationError("images: bad dimensions");
  std::sort(ids.begin(), ids.end());
  for (const std::int64_t id : ids) {
    frame_of_image[id] = ds.frames.size();
    ds.frames.push_back(Frame{static_cast<int>(id), {}});
  }

  const json& anns = as_array(require(doc, "", "annotations"), "annotations");
  for (std::size_t i = 0; i < anns.size(); ++i) {
    const std::string ap = index_path("annotations", i);
    const std::int64_t image_id = as_integer(require(anns[i], ap, "image_id"), ap + ".image_id");
    const auto fit = frame_of_image.find(image_id);
    if (fit == frame_of_image.end()) throw ValidationError(ap + ".image_id: unknown image");
    const std::int64_t cat_id = as_integer(require(anns[i], ap, "category_id"), ap + ".category_id");
    const auto cit = categories.find(cat_id);
    if (cit == categories.end()) throw ValidationError(ap + ".category_id: unknown category");

    const std::string sp = ap + ".segmentation";
    const json& seg = require(anns[i], ap, "segmentation");
    BitMask mask(ds.frame_width, ds.frame_height);
    if (seg.is_array()) {
      for (std::size_t k = 0; k < seg.size(); ++k) {
        const json& poly = as_array(seg[k], index_path(sp, k));
        if (poly.size() % 2 != 0) throw ParseError(index_path(sp, k), "odd coordinate count");
        std::vector<Point> pts;
        for (std::size_t v = 0; v + 1 < poly.size(); v += 2) {
          pts.push_back({as_number(poly[v], index_path(sp, k)), as_number(poly[v + 1], index_path(sp, k))});
        }
        const BitMask part = decode_polygon(pts, ds.frame_width, ds.frame_height);
        for (int y = 0; y < mask.height(); ++y) {
          for (int x = 0; x < mask.width(); ++x) {
            if (part.at(x, y)) mask.set(x, y);
          }
        }
      }
    } else if (seg.is_object()) {
      const json& counts = require(seg, sp, "counts");
      std::vector<std::uint32_t> runs;
      if (counts.is_string()) {
        runs = decode_coco_rle_string(counts.get<std::string>());
      } else {
        for (std::size_t k = 0; k < as_array(counts, sp + ".counts").size(); ++k) {
          const std::int64_t c = as_integer(counts[k], index_path(sp + ".counts", k));
          if (c < 0) throw ParseError(index_path(sp + ".counts", k), "negative run");
          runs.push_back(static_cast<std::uint32_t>(c));
        }
      }
      mask = decode_rle(runs, ds.frame_width, ds.frame_height);
    } else {
      throw ParseError(sp, "expected polygon list or RLE object");
    }

    const auto bounds = mask.bounds();
    if (!bounds) throw ValidationError(sp + ": mask is empty");
    Detection det;
    det.bbox = *bounds;
    det.category = cit->second;
    det.score = anns[i].contains("score") ? as_number(anns[i]["score"], ap + ".score") : 1.0;
    if (det.score < 0.0 || det.score > 1.0) throw ValidationError(ap + ".score: must be in [0, 1]");
    det.mask = encode_mask(mask);
    ds.frames[fit->second].detections.push_back(std::move(det));
  }
  finalize(ds);
  return ds;
}

}  // namespace bubbletrack
