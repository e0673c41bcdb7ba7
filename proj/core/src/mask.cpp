#include <algorithm>
#include <cmath>
#include <numeric>

#include "bubbletrack/corpus.hpp"
#include "bubbletrack/error.hpp"

namespace bubbletrack {

BitMask::BitMask(int width, int height) : width_(width), height_(height) {
  if (width <= 0 || height <= 0) {
    throw DomainError("mask dimensions must be positive");
  }
  bits_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0);
}

std::size_t BitMask::area() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

std::optional<Box> BitMask::bounds() const {
  int x0 = width_, y0 = height_, x1 = -1, y1 = -1;
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      if (at(x, y)) {
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
      }
    }
  }
  if (x1 < 0) return std::nullopt;
  return Box{static_cast<double>(x0), static_cast<double>(y0),
             static_cast<double>(x1 - x0 + 1), static_cast<double>(y1 - y0 + 1)};
}

std::size_t Rle::area() const {
  std::size_t n = 0;
  for (std::size_t i = 1; i < counts.size(); i += 2) n += counts[i];
  return n;
}

Rle encode_mask(const BitMask& mask) {
  Rle rle{mask.width(), mask.height(), {}};
  std::uint8_t current = 0;
  std::uint32_t run = 0;
  for (int x = 0; x < mask.width(); ++x) {
    for (int y = 0; y < mask.height(); ++y) {
      const std::uint8_t v = mask.at(x, y) ? 1 : 0;
      if (v != current) {
        rle.counts.push_back(run);
        run = 0;
        current = v;
      }
      ++run;
    }
  }
  rle.counts.push_back(run);
  return rle;
}

BitMask decode_rle(std::span<const std::uint32_t> counts, int width, int height) {
  if (width <= 0 || height <= 0) throw DecodeError("RLE dimensions must be positive");
  const std::uint64_t total = static_cast<std::uint64_t>(width) * static_cast<std::uint64_t>(height);
  const std::uint64_t sum = std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
  if (sum != total) {
    throw DecodeError("RLE counts sum to " + std::to_string(sum) + ", expected " +
                      std::to_string(total));
  }
  BitMask mask(width, height);
  std::uint64_t pos = 0;
  bool value = false;
  for (const std::uint32_t run : counts) {
    if (value) {
      for (std::uint64_t k = pos; k < pos + run; ++k) {
        mask.set(static_cast<int>(k / height), static_cast<int>(k % height));
      }
    }
    pos += run;
    value = !value;
  }
  return mask;
}

BitMask decode_polygon(std::span<const Point> points, int width, int height) {
  if (points.size() < 3) throw DecodeError("polygon needs at least 3 vertices");
  double twice_area = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Point& a = points[i];
    const Point& b = points[(i + 1) % points.size()];
    twice_area += a.x * b.y - b.x * a.y;
  }
  if (twice_area == 0.0 || !std::isfinite(twice_area)) {
    throw DecodeError("degenerate polygon (zero area)");
  }

  BitMask mask(width, height);
  std::vector<double> crossings;
  for (int row = 0; row < height; ++row) {
    const double yc = row + 0.5;
    crossings.clear();
    for (std::size_t i = 0; i < points.size(); ++i) {
      const Point& a = points[i];
      const Point& b = points[(i + 1) % points.size()];
      if ((a.y > yc) != (b.y > yc)) {
        crossings.push_back(a.x + (yc - a.y) * (b.x - a.x) / (b.y - a.y));
      }
    }
    std::sort(crossings.begin(), crossings.end());
    // Center xc is inside iff an odd number of crossings lie strictly right
    // of it, i.e. xc in [c[2k], c[2k+1]).
    for (std::size_t k = 0; k + 1 < crossings.size(); k += 2) {
      const int first = std::max(0, static_cast<int>(std::ceil(crossings[k] - 0.5)));
      const int last = std::min(width, static_cast<int>(std::ceil(crossings[k + 1] - 0.5)));
      for (int col = first; col < last; ++col) mask.set(col, row);
    }
  }
  return mask;
}

std::vector<std::uint32_t> decode_coco_rle_string(std::string_view s) {
  std::vector<std::int64_t> counts;
  std::size_t p = 0;
  while (p < s.size()) {
    std::int64_t x = 0;
    int k = 0;
    bool more = true;
    while (more) {
      if (p >= s.size()) throw DecodeError("truncated compressed RLE string");
      const std::int64_t c = static_cast<std::int64_t>(s[p]) - 48;
      if (c < 0 || c > 63) throw DecodeError("invalid character in compressed RLE string");
      x |= (c & 0x1f) << (5 * k);
      more = (c & 0x20) != 0;
      ++p;
      ++k;
      if (!more && (c & 0x10) != 0) x |= -(std::int64_t{1} << (5 * k));
    }
    if (counts.size() > 2) x += counts[counts.size() - 2];
    counts.push_back(x);
  }
  std::vector<std::uint32_t> out;
  out.reserve(counts.size());
  for (const std::int64_t c : counts) {
    if (c < 0) throw DecodeError("negative run in compressed RLE string");
    out.push_back(static_cast<std::uint32_t>(c));
  }
  return out;
}

}  // namespace bubbletrack
