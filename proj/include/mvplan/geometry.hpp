#pragma once

#include <array>
#include <span>
#include <vector>

namespace mvplan {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// Interpolated reference-path quantities at one arclength.
struct PathSample {
  double s = 0.0;
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
  double kappa = 0.0;
};

struct FrenetState {
  double s = 0.0;
  double s_dot = 0.0;
  double d = 0.0;
  double d_dot = 0.0;
};

struct CartesianState {
  double x = 0.0;
  double y = 0.0;
  double v = 0.0;
  double theta = 0.0;
};

/// Wraps an angle into (-pi, pi].
double normalize_angle(double a);

/// Road reference line resampled at a fixed arclength step.
///
/// Positions are taken from the input polyline at every `kResampleStep`
/// metres (plus the final waypoint). Headings are chords of the input
/// polyline between s - 2 m and s + 2 m, curvature the central difference of
/// those headings over the same stencil. Near the ends, where the stencil does not fit, the heading is
/// extrapolated with the nearest interior curvature.
class ReferencePath {
 public:
  static constexpr double kResampleStep = 0.5;
  static constexpr double kStencil = 2.0;  ///< half-width of the heading/curvature stencil (m)
  static constexpr double kDefaultMaxCurvature = 1.0;
  /// Arclength queries this far outside [0, length] are clamped, not rejected.
  static constexpr double kDomainSlack = 1e-3;

  /// Throws DegeneratePath on fewer than two distinct waypoints or a repeated
  /// consecutive waypoint.
  static ReferencePath build(std::span<const Point2> waypoints,
                             double max_curvature = kDefaultMaxCurvature);

  double length() const { return s_.back(); }
  const std::vector<Point2>& waypoints() const { return waypoints_; }
  std::size_t table_size() const { return s_.size(); }
  const std::vector<double>& arclengths() const { return s_; }

  /// Linear interpolation of the resampled table. Throws OutOfRange.
  PathSample sample_at(double s) const;

  /// Offsets every waypoint laterally by `d` (positive = +normal direction).
  ReferencePath offset(double d) const;

 private:
  std::vector<Point2> waypoints_;
  std::vector<double> s_;
  std::vector<double> x_;
  std::vector<double> y_;
  std::vector<double> theta_;
  std::vector<double> kappa_;
};

/// Frenet -> Cartesian transform:
///   x = x_r - d sin(theta_r), y = y_r + d cos(theta_r),
///   v = sqrt(((1 - kappa_r d) s_dot)^2 + d_dot^2),
///   theta = asin(d_dot / v) + theta_r   (theta_r when v == 0).
CartesianState frenet_to_cartesian(const ReferencePath& path, const FrenetState& f);

/// Inverse of frenet_to_cartesian. Nearest-segment search followed by a
/// bracketed Newton refinement of the orthogonality condition.
FrenetState cartesian_to_frenet(const ReferencePath& path, const CartesianState& c,
                                double corridor_half_width = 7.0);

/// Quintic p(t) = sum c_k t^k on [0, duration].
struct QuinticPolynomial {
  std::array<double, 6> c{};
  double duration = 0.0;
};

struct BoundaryState {
  double p = 0.0;
  double p_dot = 0.0;
  double p_ddot = 0.0;
};

struct QuinticEval {
  double p = 0.0;
  double p_dot = 0.0;
  double p_ddot = 0.0;
  double p_dddot = 0.0;
};

/// Minimum-jerk interpolant of six boundary conditions. Throws NonpositiveDuration.
QuinticPolynomial fit_quintic(const BoundaryState& start, const BoundaryState& end, double duration);

/// Throws OutOfRange outside [0, duration] (a 1e-9 s slack is tolerated).
QuinticEval eval_quintic(const QuinticPolynomial& poly, double t);

}  // namespace mvplan
