#include <algorithm>
#include <cmath>

#include "bubbletrack/error.hpp"
#include "bubbletrack/kinematics.hpp"
#include "bubbletrack/spatial.hpp"

namespace bubbletrack {

void KinematicsConfig::validate() const {
  if (delta_frames < 1) throw DomainError("delta_frames must be >= 1");
  if (bins < 8) throw DomainError("bins must be >= 8");
  if (stride < 1) throw DomainError("stride must be >= 1");
  if (!(sigma_position >= 0.0) || !(sigma_time >= 0.0)) throw DomainError("sigmas must be >= 0");
}

namespace {

enum class Side { Inside, Outside, Boundary };

// Side of a mask for a point; pixel corners look at the four pixels they
// touch, other points at the pixel containing them.
Side corner_side(const BitMask& mask, const Point& p) {
  if (p.x != std::floor(p.x) || p.y != std::floor(p.y)) return contains(mask, p) ? Side::Inside : Side::Outside;
  const int x = static_cast<int>(p.x), y = static_cast<int>(p.y);
  const int set = int(mask.test(x - 1, y - 1)) + int(mask.test(x, y - 1)) + int(mask.test(x - 1, y)) + int(mask.test(x, y));
  return set == 4 ? Side::Inside : set == 0 ? Side::Outside : Side::Boundary;
}

}  // namespace

std::vector<InterfaceMatch> match_interfaces(const Contour& from, const Contour& to) {
  std::vector<InterfaceMatch> out;
  if (from.points.empty() || to.points.empty()) return out;
  const KdTree tree(to.points);
  out.reserve(from.points.size());
  for (std::size_t i = 0; i < from.points.size(); ++i) {
    const std::size_t j = tree.nearest(from.points[i]);
    out.push_back({i, j, from.points[i], to.points[j]});
  }
  return out;
}

double signed_speed(const InterfaceMatch& match, const BitMask& mask_t, const Calibration& calibration,
                    int delta_frames, const BitMask* mask_later) {
  if (delta_frames < 1) throw DomainError("delta_frames must be >= 1");
  const double dx = match.target.x - match.source.x;
  const double dy = match.target.y - match.source.y;
  const double distance_px = std::hypot(dx, dy);
  if (distance_px == 0.0) return 0.0;
  const double speed = distance_px / calibration.pixels_per_cm / (delta_frames / calibration.frame_rate);
  const Side target = corner_side(mask_t, match.target);
  if (target == Side::Inside) return -speed;
  if (target == Side::Outside) return speed;
  if (mask_later != nullptr) {
    const Side source = corner_side(*mask_later, match.source);
    if (source == Side::Inside) return speed;
    if (source == Side::Outside) return -speed;
  }
  return contains(mask_t, match.target) ? -speed : speed;
}

std::vector<VelocitySample> velocity_profile(const BitMask& mask_t, const BitMask& mask_later,
                                             const Calibration& calibration, int delta_frames) {
  const Contour c0 = extract_contour(mask_t);
  const Contour c1 = extract_contour(mask_later);
  const ParamContour param = parameterize(c0);
  std::vector<VelocitySample> out;
  const auto matches = match_interfaces(c0, c1);
  out.reserve(matches.size());
  for (const InterfaceMatch& m : matches) {
    VelocitySample s;
    s.position = param.vertex_position[m.source_index];
    s.speed = signed_speed(m, mask_t, calibration, delta_frames, &mask_later);
    s.displacement = {m.target.x - m.source.x, m.target.y - m.source.y};
    s.source_point = m.source;
    s.target_point = m.target;
    out.push_back(s);
  }
  return out;
}

namespace {

BitMask observed_mask(const Dataset& dataset, const Observation& obs) {
  const Frame* frame = dataset.find_frame(obs.frame);
  if (frame == nullptr || obs.detection_index >= frame->detections.size()) {
    throw UsageError("track observation at frame " + std::to_string(obs.frame) +
                     " does not reference a detection of the dataset");
  }
  return frame->detections[obs.detection_index].decode();
}

}  // namespace

std::optional<std::vector<VelocitySample>> velocity_profile(const Dataset& dataset, const Track& track,
                                                            int frame, int delta_frames) {
  const Observation* a = track.at(frame);
  const Observation* b = track.at(frame + delta_frames);
  if (a == nullptr || b == nullptr) return std::nullopt;
  return velocity_profile(observed_mask(dataset, *a), observed_mask(dataset, *b), dataset.calibration,
                          delta_frames);
}

std::vector<int> evaluated_frames(const Track& track, int delta_frames, int stride) {
  std::vector<int> out;
  std::size_t k = 0;
  for (const auto& [frame, obs] : track.observations) {
    if (track.at(frame + delta_frames) == nullptr) continue;
    if (k++ % static_cast<std::size_t>(stride) == 0) out.push_back(frame);
  }
  return out;
}

VelocityMap make_velocity_map(std::size_t bins, std::vector<int> frames) {
  VelocityMap map;
  map.bin_centers.resize(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    map.bin_centers[k] = (static_cast<double>(k) + 0.5) / static_cast<double>(bins);
  }
  map.frames = std::move(frames);
  map.values.assign(bins * map.frames.size(), std::nullopt);
  return map;
}

VelocityMap bin_profiles(const std::vector<std::pair<int, std::vector<VelocitySample>>>& profiles,
                         std::size_t bins) {
  std::vector<int> frames;
  for (const auto& p : profiles) frames.push_back(p.first);
  VelocityMap map = make_velocity_map(bins, std::move(frames));
  const std::size_t nt = map.frames.size();
  std::vector<double> sum(bins * nt, 0.0);
  std::vector<std::size_t> count(bins * nt, 0);
  for (std::size_t t = 0; t < nt; ++t) {
    for (const VelocitySample& s : profiles[t].second) {
      auto bin = static_cast<std::size_t>(std::floor(s.position * static_cast<double>(bins)));
      bin = std::min(bin, bins - 1);
      sum[bin * nt + t] += s.speed;
      ++count[bin * nt + t];
    }
  }
  for (std::size_t i = 0; i < sum.size(); ++i) {
    if (count[i] > 0) map.values[i] = sum[i] / static_cast<double>(count[i]);
  }
  return map;
}

VelocityMap spectrogram(const Dataset& dataset, const Track& track, const KinematicsConfig& config) {
  config.validate();
  std::vector<std::pair<int, std::vector<VelocitySample>>> profiles;
  for (const int frame : evaluated_frames(track, config.delta_frames, config.stride)) {
    profiles.emplace_back(frame, *velocity_profile(dataset, track, frame, config.delta_frames));
  }
  return bin_profiles(profiles, static_cast<std::size_t>(config.bins));
}

namespace {

std::vector<double> gaussian_kernel(double sigma) {
  if (sigma <= 0.0) return {1.0};
  const int radius = static_cast<int>(std::ceil(4.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  for (int i = -radius; i <= radius; ++i) {
    k[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * (i * i) / (sigma * sigma));
  }
  return k;
}

std::size_t wrap_index(long i, long n) {
  const long m = i % n;
  return static_cast<std::size_t>(m < 0 ? m + n : m);
}

// Half-sample symmetric reflection: d c b a | a b c d | d c b a
std::size_t reflect_index(long i, long n) {
  const long period = 2 * n;
  long m = i % period;
  if (m < 0) m += period;
  return static_cast<std::size_t>(m < n ? m : period - 1 - m);
}

}  // namespace

VelocityMap smooth(const VelocityMap& map, double sigma_position, double sigma_time) {
  if (!(sigma_position >= 0.0) || !(sigma_time >= 0.0)) throw DomainError("sigmas must be >= 0");
  VelocityMap out = map;
  out.smoothed = true;
  const std::size_t nb = map.bins(), nt = map.frames.size();
  if (nb == 0 || nt == 0) return out;

  std::vector<double> num(nb * nt, 0.0), den(nb * nt, 0.0);
  for (std::size_t i = 0; i < map.values.size(); ++i) {
    if (map.values[i]) {
      num[i] = *map.values[i];
      den[i] = 1.0;
    }
  }

  const auto kp = gaussian_kernel(sigma_position);
  const auto kt = gaussian_kernel(sigma_time);
  const long rp = static_cast<long>(kp.size() / 2), rt = static_cast<long>(kt.size() / 2);

  std::vector<double> num1(nb * nt, 0.0), den1(nb * nt, 0.0);
  for (std::size_t b = 0; b < nb; ++b) {
    for (std::size_t t = 0; t < nt; ++t) {
      double n = 0.0, d = 0.0;
      for (long k = -rp; k <= rp; ++k) {
        const std::size_t src = wrap_index(static_cast<long>(b) + k, static_cast<long>(nb)) * nt + t;
        const double w = kp[static_cast<std::size_t>(k + rp)];
        n += w * num[src];
        d += w * den[src];
      }
      num1[b * nt + t] = n;
      den1[b * nt + t] = d;
    }
  }
  for (std::size_t b = 0; b < nb; ++b) {
    for (std::size_t t = 0; t < nt; ++t) {
      double n = 0.0, d = 0.0;
      for (long k = -rt; k <= rt; ++k) {
        const std::size_t src = b * nt + reflect_index(static_cast<long>(t) + k, static_cast<long>(nt));
        const double w = kt[static_cast<std::size_t>(k + rt)];
        n += w * num1[src];
        d += w * den1[src];
      }
      const std::size_t i = b * nt + t;
      out.values[i] = (map.values[i] && d > 0.0) ? std::optional<double>(n / d) : std::nullopt;
    }
  }
  return out;
}

std::vector<std::pair<int, double>> max_velocity_series(const Dataset& dataset, const Track& track,
                                                        const KinematicsConfig& config) {
  config.validate();
  std::vector<std::pair<int, double>> out;
  for (const int frame : evaluated_frames(track, config.delta_frames, config.stride)) {
    const auto profile = velocity_profile(dataset, track, frame, config.delta_frames);
    double peak = 0.0;
    for (const VelocitySample& s : *profile) peak = std::max(peak, std::abs(s.speed));
    out.emplace_back(frame, peak);
  }
  return out;
}

}  // namespace bubbletrack
