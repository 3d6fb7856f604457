#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

namespace agentsim {

struct Vec2 {
  double x{0.0};
  double y{0.0};

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double k) const { return {x * k, y * k}; }
  bool operator==(const Vec2& o) const = default;
};

inline double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
inline double cross(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }
inline double norm(const Vec2& a) { return std::hypot(a.x, a.y); }

/// Wraps an angle to (-pi, pi]; idempotent.
inline double normalize_angle(double a) {
  const double two_pi = 2.0 * M_PI;
  a = std::fmod(a, two_pi);
  if (a <= -M_PI) a += two_pi;
  if (a > M_PI) a -= two_pi;
  return a;
}

/// Signed discrete curvature of the circle through three points
/// (left turn positive). Returns 0 for collinear or degenerate triples.
inline double menger_curvature(const Vec2& a, const Vec2& b, const Vec2& c) {
  const Vec2 ab = b - a;
  const Vec2 bc = c - b;
  const Vec2 ac = c - a;
  const double denom = norm(ab) * norm(bc) * norm(ac);
  if (denom < 1e-12) return 0.0;
  return 2.0 * cross(ab, bc) / denom;
}

/// Result of projecting a point onto a polyline.
struct PolylineProjection {
  double s{0.0};          // arc length of the foot point
  double d{0.0};          // signed lateral offset, left of travel positive
  std::size_t segment{0}; // index of the segment containing the foot point
};

/// Piecewise-linear curve with cached cumulative arc lengths.
class Polyline {
 public:
  Polyline() = default;
  explicit Polyline(std::vector<Vec2> points) : pts_(std::move(points)) {
    cum_.resize(pts_.size(), 0.0);
    for (std::size_t i = 1; i < pts_.size(); ++i)
      cum_[i] = cum_[i - 1] + norm(pts_[i] - pts_[i - 1]);
  }

  const std::vector<Vec2>& points() const { return pts_; }
  const std::vector<double>& cumulative() const { return cum_; }
  double length() const { return cum_.empty() ? 0.0 : cum_.back(); }

  /// Point at arc length s (clamped to [0, length]).
  Vec2 point_at(double s) const {
    const std::size_t i = segment_of(s);
    const double t = segment_param(s, i);
    return pts_[i] + (pts_[i + 1] - pts_[i]) * t;
  }

  /// Tangent heading (radians) at arc length s.
  double heading_at(double s) const {
    const std::size_t i = segment_of(s);
    const Vec2 d = pts_[i + 1] - pts_[i];
    return std::atan2(d.y, d.x);
  }

  /// Nearest point on the polyline; d is left-positive.
  PolylineProjection project(const Vec2& p) const {
    PolylineProjection best;
    double best_dist2 = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < pts_.size(); ++i) {
      const Vec2 a = pts_[i];
      const Vec2 b = pts_[i + 1];
      const Vec2 ab = b - a;
      const double len2 = dot(ab, ab);
      double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
      t = std::clamp(t, 0.0, 1.0);
      const Vec2 foot = a + ab * t;
      const double dist2 = dot(p - foot, p - foot);
      if (dist2 < best_dist2 - 1e-12) {
        best_dist2 = dist2;
        best.s = cum_[i] + t * std::sqrt(len2);
        best.d = std::copysign(std::sqrt(dist2), cross(ab, p - foot));
        best.segment = i;
      }
    }
    return best;
  }

 private:
  std::size_t segment_of(double s) const {
    if (pts_.size() < 2) return 0;
    s = std::clamp(s, 0.0, length());
    auto it = std::upper_bound(cum_.begin(), cum_.end(), s);
    std::size_t i = it == cum_.begin() ? 0 : (it - cum_.begin()) - 1;
    return std::min(i, pts_.size() - 2);
  }
  double segment_param(double s, std::size_t i) const {
    const double seg_len = cum_[i + 1] - cum_[i];
    return seg_len > 0.0 ? std::clamp((s - cum_[i]) / seg_len, 0.0, 1.0) : 0.0;
  }

  std::vector<Vec2> pts_;
  std::vector<double> cum_;
};

}  // namespace agentsim
