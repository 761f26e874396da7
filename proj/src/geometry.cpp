#include "mvplan/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>

#include "mvplan/errors.hpp"

namespace mvplan {

namespace {

constexpr double kPi = std::numbers::pi;

double lerp(double a, double b, double f) { return a + (b - a) * f; }

}  // namespace

double normalize_angle(double a) {
  a = std::fmod(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  if (a > kPi) a -= 2.0 * kPi;
  return a;
}

ReferencePath ReferencePath::build(std::span<const Point2> waypoints, double max_curvature) {
  if (waypoints.size() < 2) throw DegeneratePath("reference path needs at least 2 waypoints");
  std::vector<double> cum(waypoints.size(), 0.0);
  for (std::size_t i = 1; i < waypoints.size(); ++i) {
    const double seg = std::hypot(waypoints[i].x - waypoints[i - 1].x, waypoints[i].y - waypoints[i - 1].y);
    if (seg <= 1e-9) {
      throw DegeneratePath("duplicated consecutive waypoint at index " + std::to_string(i));
    }
    cum[i] = cum[i - 1] + seg;
  }

  ReferencePath path;
  path.waypoints_.assign(waypoints.begin(), waypoints.end());
  const double total = cum.back();

  // Positions on the polyline at a uniform arclength step, final point exact.
  const auto n_full = static_cast<std::size_t>(std::floor(total / kResampleStep + 1e-9));
  std::size_t seg = 0;
  auto push_point = [&](double s) {
    while (seg + 2 < cum.size() && cum[seg + 1] < s) ++seg;
    const double f = (s - cum[seg]) / (cum[seg + 1] - cum[seg]);
    path.s_.push_back(s);
    path.x_.push_back(lerp(waypoints[seg].x, waypoints[seg + 1].x, f));
    path.y_.push_back(lerp(waypoints[seg].y, waypoints[seg + 1].y, f));
  };
  for (std::size_t k = 0; k <= n_full; ++k) push_point(static_cast<double>(k) * kResampleStep);
  if (total - path.s_.back() > 1e-6) {
    path.s_.push_back(total);
    path.x_.push_back(waypoints.back().x);
    path.y_.push_back(waypoints.back().y);
  } else {
    path.s_.back() = total;
    path.x_.back() = waypoints.back().x;
    path.y_.back() = waypoints.back().y;
  }

  const std::size_t n = path.s_.size();
  path.theta_.assign(n, 0.0);
  path.kappa_.assign(n, 0.0);

  // Stencils are evaluated on the input polyline at exact arclengths, so the
  // uneven final grid step does not bias headings near the end.
  std::size_t hint = 0;
  auto point_at = [&](double s) {
    if (s < cum[hint]) hint = 0;
    while (hint + 2 < cum.size() && cum[hint + 1] < s) ++hint;
    const double f = (s - cum[hint]) / (cum[hint + 1] - cum[hint]);
    return Point2{lerp(waypoints[hint].x, waypoints[hint + 1].x, f), lerp(waypoints[hint].y, waypoints[hint + 1].y, f)};
  };
  const double h = std::min(kStencil, total / 4.0);
  auto chord_heading = [&](double s) {
    const Point2 lo = point_at(s - h), hi = point_at(s + h);
    return std::atan2(hi.y - lo.y, hi.x - lo.x);
  };

  if (total < 4.0 * kResampleStep) {
    // Too short for a stencil: single chord heading, zero curvature.
    const double th = std::atan2(waypoints.back().y - waypoints.front().y, waypoints.back().x - waypoints.front().x);
    path.theta_.assign(n, th);
  } else {
    const double lo_s = 2.0 * h, hi_s = total - 2.0 * h;
    std::optional<double> k_lo, k_hi;
    double th_ref = chord_heading(h);
    for (std::size_t k = 0; k < n; ++k) {
      const double s = path.s_[k];
      if (s + 1e-9 < h || s - 1e-9 > total - h) continue;
      const double sc = std::clamp(s, h, total - h);
      double th = chord_heading(sc);
      th = th_ref + normalize_angle(th - th_ref);
      th_ref = th;
      path.theta_[k] = th;
      if (sc + 1e-9 >= lo_s && sc - 1e-9 <= hi_s) {
        const double dth = normalize_angle(chord_heading(sc + h) - chord_heading(sc - h));
        path.kappa_[k] = dth / (2.0 * h);
        if (!k_lo) k_lo = path.kappa_[k];
        k_hi = path.kappa_[k];
      }
    }
    if (!k_lo) {
      const double kap = normalize_angle(chord_heading(total - h) - chord_heading(h)) / (total - 2.0 * h);
      k_lo = k_hi = kap;
    }
    // extrapolate curvature, and heading where the chord does not fit, toward both ends
    std::size_t first = n, last = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const double s = path.s_[k];
      if (s + 1e-9 < lo_s) path.kappa_[k] = *k_lo;
      if (s - 1e-9 > hi_s) path.kappa_[k] = *k_hi;
      if (s + 1e-9 >= h && s - 1e-9 <= total - h) {
        first = std::min(first, k);
        last = k;
      }
    }
    for (std::size_t k = 0; k < first; ++k) {
      path.theta_[k] = path.theta_[first] + *k_lo * (path.s_[k] - path.s_[first]);
    }
    for (std::size_t k = last + 1; k < n; ++k) {
      path.theta_[k] = path.theta_[last] + *k_hi * (path.s_[k] - path.s_[last]);
    }
  }

  for (double kap : path.kappa_) {
    if (std::abs(kap) > max_curvature) {
      throw DegeneratePath("reference path curvature " + std::to_string(kap) + " exceeds bound");
    }
  }
  return path;
}

PathSample ReferencePath::sample_at(double s) const {
  const double total = length();
  if (s < -kDomainSlack || s > total + kDomainSlack || std::isnan(s)) {
    throw OutOfRange("arclength " + std::to_string(s) + " outside [0, " + std::to_string(total) + "]");
  }
  s = std::clamp(s, 0.0, total);
  auto i = static_cast<std::size_t>(s / kResampleStep);
  if (i >= s_.size() - 1) i = s_.size() - 2;
  // The last interval may be shorter than the step.
  if (s < s_[i]) --i;
  const double f = (s - s_[i]) / (s_[i + 1] - s_[i]);
  PathSample out;
  out.s = s;
  out.x = lerp(x_[i], x_[i + 1], f);
  out.y = lerp(y_[i], y_[i + 1], f);
  out.theta = lerp(theta_[i], theta_[i + 1], f);
  out.kappa = lerp(kappa_[i], kappa_[i + 1], f);
  return out;
}

ReferencePath ReferencePath::offset(double d) const {
  std::vector<Point2> shifted;
  shifted.reserve(s_.size());
  for (std::size_t k = 0; k < s_.size(); ++k) {
    shifted.push_back({x_[k] - d * std::sin(theta_[k]), y_[k] + d * std::cos(theta_[k])});
  }
  return build(shifted);
}

CartesianState frenet_to_cartesian(const ReferencePath& path, const FrenetState& f) {
  const PathSample r = path.sample_at(f.s);
  const double scale = 1.0 - r.kappa * f.d;
  if (scale <= 0.0) {
    throw SingularOffset("lateral offset " + std::to_string(f.d) + " beyond curvature center");
  }
  CartesianState c;
  const double st = std::sin(r.theta);
  const double ct = std::cos(r.theta);
  c.x = r.x - f.d * st;
  c.y = r.y + f.d * ct;
  const double ls = scale * f.s_dot;
  c.v = std::sqrt(ls * ls + f.d_dot * f.d_dot);
  if (c.v > 0.0) {
    const double ratio = f.d_dot / c.v;
    if (std::abs(ratio) > 1.0 + 1e-12) throw InvalidLateralRate("|d_dot| exceeds speed");
    c.theta = normalize_angle(std::asin(std::clamp(ratio, -1.0, 1.0)) + r.theta);
  } else {
    c.theta = normalize_angle(r.theta);
  }
  return c;
}

FrenetState cartesian_to_frenet(const ReferencePath& path, const CartesianState& c,
                                double corridor_half_width) {
  const auto& s_tab = path.arclengths();
  const std::size_t n = s_tab.size();

  auto residual = [&](double s) {
    const PathSample r = path.sample_at(s);
    return (c.x - r.x) * std::cos(r.theta) + (c.y - r.y) * std::sin(r.theta);
  };
  auto distance_at = [&](double s) {
    const PathSample r = path.sample_at(s);
    return std::hypot(c.x - r.x, c.y - r.y);
  };

  // Sign changes of the orthogonality residual bracket every foot point.
  std::vector<double> res(n);
  for (std::size_t k = 0; k < n; ++k) res[k] = residual(s_tab[k]);

  struct Candidate {
    double s;
    double dist;
  };
  std::vector<Candidate> candidates;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    double a = s_tab[k];
    double b = s_tab[k + 1];
    double fa = res[k];
    double fb = res[k + 1];
    if (fa == 0.0) {
      candidates.push_back({a, distance_at(a)});
      continue;
    }
    // residual decreases through a foot point of a nearest projection
    if (!(fa > 0.0 && fb < 0.0) && !(k + 2 == n && fb == 0.0)) continue;
    if (fb == 0.0) {
      candidates.push_back({b, distance_at(b)});
      continue;
    }
    // Illinois-modified regula falsi on the bracket.
    double s = a;
    int side = 0;
    for (int it = 0; it < 200; ++it) {
      s = (a * fb - b * fa) / (fb - fa);
      const double fs = residual(s);
      if (std::abs(fs) < 1e-14 || (b - a) < 1e-14) break;
      if (fs * fb > 0.0) {
        b = s;
        fb = fs;
        if (side == -1) fa *= 0.5;
        side = -1;
      } else {
        a = s;
        fa = fs;
        if (side == 1) fb *= 0.5;
        side = 1;
      }
    }
    candidates.push_back({s, distance_at(s)});
  }
  if (candidates.empty()) {
    throw OutsideCorridor("point has no orthogonal projection onto the reference path");
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const Candidate& l, const Candidate& r) { return l.dist < r.dist; });
  const Candidate best = candidates.front();
  if (best.dist > corridor_half_width) {
    throw OutsideCorridor("lateral distance " + std::to_string(best.dist) + " exceeds corridor");
  }
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    if (candidates[i].dist - best.dist < 1e-9 &&
        std::abs(candidates[i].s - best.s) > 2.0 * ReferencePath::kResampleStep) {
      throw ProjectionAmbiguous("multiple nearest projections onto the reference path");
    }
  }

  const PathSample r = path.sample_at(best.s);
  FrenetState f;
  f.s = best.s;
  f.d = -(c.x - r.x) * std::sin(r.theta) + (c.y - r.y) * std::cos(r.theta);
  const double scale = 1.0 - r.kappa * f.d;
  if (scale <= 0.0) throw SingularOffset("point beyond curvature center");
  const double dtheta = normalize_angle(c.theta - r.theta);
  f.d_dot = c.v * std::sin(dtheta);
  f.s_dot = c.v * std::cos(dtheta) / scale;
  return f;
}

QuinticPolynomial fit_quintic(const BoundaryState& start, const BoundaryState& end, double duration) {
  if (!(duration > 0.0)) throw NonpositiveDuration("quintic duration must be positive");
  const double T = duration;
  const double T2 = T * T;
  const double T3 = T2 * T;
  const double T4 = T3 * T;
  const double T5 = T4 * T;
  QuinticPolynomial q;
  q.duration = T;
  q.c[0] = start.p;
  q.c[1] = start.p_dot;
  q.c[2] = 0.5 * start.p_ddot;
  // Remaining residuals after the start terms, solved in closed form.
  const double h0 = end.p - (q.c[0] + q.c[1] * T + q.c[2] * T2);
  const double h1 = end.p_dot - (q.c[1] + 2.0 * q.c[2] * T);
  const double h2 = end.p_ddot - 2.0 * q.c[2];
  q.c[3] = (20.0 * h0 - 8.0 * h1 * T + h2 * T2) / (2.0 * T3);
  q.c[4] = (-30.0 * h0 + 14.0 * h1 * T - 2.0 * h2 * T2) / (2.0 * T4);
  q.c[5] = (12.0 * h0 - 6.0 * h1 * T + h2 * T2) / (2.0 * T5);
  return q;
}

QuinticEval eval_quintic(const QuinticPolynomial& poly, double t) {
  if (t < -1e-9 || t > poly.duration + 1e-9 || std::isnan(t)) {
    throw OutOfRange("time " + std::to_string(t) + " outside quintic domain");
  }
  const auto& c = poly.c;
  QuinticEval e;
  e.p = c[0] + t * (c[1] + t * (c[2] + t * (c[3] + t * (c[4] + t * c[5]))));
  e.p_dot = c[1] + t * (2.0 * c[2] + t * (3.0 * c[3] + t * (4.0 * c[4] + t * 5.0 * c[5])));
  e.p_ddot = 2.0 * c[2] + t * (6.0 * c[3] + t * (12.0 * c[4] + t * 20.0 * c[5]));
  e.p_dddot = 6.0 * c[3] + t * (24.0 * c[4] + t * 60.0 * c[5]);
  return e;
}

}  // namespace mvplan
