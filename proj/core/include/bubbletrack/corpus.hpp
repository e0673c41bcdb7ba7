#pragma once

// Dataset model shared by every stage: calibration, masks and their codecs,
// detections and frames.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bubbletrack {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

/// Axis-aligned box in pixels, top-left origin, y down.
struct Box {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double area() const { return w * h; }
  Point center() const { return {x + 0.5 * w, y + 0.5 * h}; }

  friend bool operator==(const Box&, const Box&) = default;
};

/// Intersection over union of two boxes. Throws DomainError when both are
/// empty.
double box_iou(const Box& a, const Box& b);

/// Physical scale of a recording.
struct Calibration {
  double pixels_per_cm = 1.0;  // alpha
  double frame_rate = 1.0;     // frames per second

  double cm_per_px() const { return 1.0 / pixels_per_cm; }
};

/// Scale from a reference object of known size, e.g. the heater width.
/// Throws DomainError unless every argument is positive and finite.
Calibration calibrate(double reference_px, double reference_cm, double frame_rate);

enum class Category { Attached, Detached, Bubble };

std::string_view to_string(Category c);
/// Exact, case-sensitive match against the fixed vocabulary.
std::optional<Category> parse_category(std::string_view name);

/// Row-major binary image covering the whole frame.
class BitMask {
public:
  BitMask() = default;
  BitMask(int width, int height);

  int width() const { return width_; }
  int height() const { return height_; }

  bool at(int x, int y) const { return bits_[index(x, y)] != 0; }
  void set(int x, int y, bool value = true) { bits_[index(x, y)] = value ? 1 : 0; }

  /// Value at (x, y), false outside the frame.
  bool test(int x, int y) const {
    return x >= 0 && y >= 0 && x < width_ && y < height_ && at(x, y);
  }

  /// Number of set pixels (N in the diameter formula).
  std::size_t area() const;

  /// Tight pixel bounds of the set pixels; nullopt for an empty mask.
  std::optional<Box> bounds() const;

  std::span<const std::uint8_t> bits() const { return bits_; }

  friend bool operator==(const BitMask&, const BitMask&) = default;

private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Uncompressed COCO-style run-length encoding: column-major, alternating
/// runs starting with zeros.
struct Rle {
  int width = 0;
  int height = 0;
  std::vector<std::uint32_t> counts;

  std::size_t area() const;

  friend bool operator==(const Rle&, const Rle&) = default;
};

Rle encode_mask(const BitMask& mask);

/// Throws DecodeError when the counts do not sum to width * height.
BitMask decode_rle(std::span<const std::uint32_t> counts, int width, int height);
inline BitMask decode_mask(const Rle& rle) {
  return decode_rle(rle.counts, rle.width, rle.height);
}

/// Even-odd fill sampled at pixel centers: pixel (col j, row i) is set iff
/// (j + 0.5, i + 0.5) lies inside the polygon. Throws DecodeError for fewer
/// than three vertices or zero enclosed area.
BitMask decode_polygon(std::span<const Point> points, int width, int height);

/// Decoder for the compressed COCO string form of `counts`.
std::vector<std::uint32_t> decode_coco_rle_string(std::string_view s);

struct Detection {
  Box bbox;
  Category category = Category::Bubble;
  double score = 1.0;
  Rle mask;

  BitMask decode() const { return decode_mask(mask); }
  std::size_t area() const { return mask.area(); }
};

struct Frame {
  int index = 0;
  std::vector<Detection> detections;
};

/// Attached/detached labels or the single "bubble" class. A dataset never
/// mixes the two.
enum class LabelScheme { TwoClass, OneClass };

struct Dataset {
  Calibration calibration;
  int frame_width = 0;
  int frame_height = 0;
  LabelScheme scheme = LabelScheme::TwoClass;
  std::vector<Frame> frames;  // strictly increasing index

  double timestamp_s(int frame_index) const {
    return frame_index / calibration.frame_rate;
  }
  /// Frame with the given index, or nullptr.
  const Frame* find_frame(int frame_index) const;
  /// Length of the clip covered by the frames, (last - first + 1) / fps.
  double duration_s() const;
  std::size_t detection_count() const;
};

/// Parses and validates an ingestion document. Throws ParseError for schema
/// violations and ValidationError / DecodeError for invariant violations.
Dataset parse_dataset(std::string_view json_text);
Dataset load_dataset(const std::filesystem::path& path);

/// Serializes in the ingestion schema with RLE masks.
std::string dataset_to_json(const Dataset& dataset);

/// Converts a COCO instance-segmentation file. Images become frames in
/// ascending image-id order; category names must be in the fixed vocabulary.
Dataset load_coco(const std::filesystem::path& path, const Calibration& calibration);

}  // namespace bubbletrack
