#pragma once

// Mask outlines, perimeter parameterization and size measures.
//
// Image coordinates are y-down. Orientation words ("counter-clockwise",
// "bottom", "right") refer to the displayed, physical y-up picture: a CCW
// contour runs bottom -> right -> top -> left.

#include <cstddef>
#include <vector>

#include "bubbletrack/corpus.hpp"

namespace bubbletrack {

/// Closed polygon; the closing edge back to points.front() is implicit.
struct Contour {
  std::vector<Point> points;

  double perimeter() const;
  /// Shoelace area with y flipped to point up; positive for CCW.
  double signed_area() const;
};

struct PerimeterSample {
  double position = 0.0;  // relative perimeter in [0, 1)
  Point point;
};

/// Contour vertices keyed by relative perimeter: 0 at the middle of the
/// bottom, increasing counter-clockwise.
struct ParamContour {
  std::vector<PerimeterSample> samples;  // starts at the origin, positions increasing
  std::size_t origin_index = 0;          // contour vertex at position 0
  std::vector<double> vertex_position;   // position of each contour vertex, by vertex index
  double perimeter = 0.0;
};

/// Outer boundary of the largest 8-connected component, traced along pixel
/// edges so the enclosed area equals the pixel count (holes are filled).
/// Vertices are the integer pixel corners visited, one per unit edge,
/// starting at the top-left corner of the component and running CCW (y-up).
/// Throws DomainError for an empty mask.
Contour extract_contour(const BitMask& mask);

/// Diameter in cm of the circle covering `n_pixels` pixels at the given scale.
double equivalent_diameter(std::size_t n_pixels, const Calibration& calibration);

/// Origin is the contour vertex nearest (by arc length) to the midpoint of
/// the bottommost run: the longest contiguous stretch of vertices within
/// 0.5 px of the maximal image y (ties: earliest arc-length start). A CW
/// contour is traversed in reverse.
ParamContour parameterize(const Contour& contour);

/// True iff the pixel containing `p` is set; false outside the frame.
bool contains(const BitMask& mask, Point p);

}  // namespace bubbletrack
