#include "core/raycast.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "core/error.hpp"

namespace voxcond {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void validate_ray(const Ray& ray, double d_max) {
  for (int a = 0; a < 3; ++a) {
    require(std::isfinite(ray.origin[a]) && std::isfinite(ray.direction[a]),
            ErrorCode::InvalidArgument, "ray must be finite");
  }
  require(std::fabs(ray.direction.norm() - 1.0) <= 1e-6,
          ErrorCode::InvalidArgument, "ray direction must be unit length");
  require(std::isfinite(d_max) && d_max > 0, ErrorCode::InvalidArgument,
          "d_max must be positive");
}

/* Clip [0, inf) ray parameter range against the grid AABB. */
bool clip_to_aabb(const SemanticGrid& g, const Ray& ray, double& t0, double& t1) {
  t0 = 0.0;
  t1 = kInf;
  Vec3 lo = g.aabb_min(), hi = g.aabb_max();
  for (int a = 0; a < 3; ++a) {
    double o = ray.origin[a], d = ray.direction[a];
    if (d == 0.0) {
      if (o < lo[a] || o >= hi[a]) return false;
      continue;
    }
    double ta = (lo[a] - o) / d;
    double tb = (hi[a] - o) / d;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  return t0 <= t1;
}

/* Walk pierced cells in ray order; visit(cell, t_entry) returns false to
 * stop. Zero-length intersections (exact edge grazes) are stepped through in
 * x-y-z order but never visited. */
template <class Visitor>
void walk_cells(const SemanticGrid& g, const Ray& ray, double d_max,
                Visitor&& visit) {
  double t0, t1;
  if (!clip_to_aabb(g, ray, t0, t1)) return;
  if (t0 > d_max) return;

  const Vec3i dims = g.dims();
  const Vec3 origin = g.origin();
  const double vs = g.voxel_size();

  Vec3 p = ray.origin + t0 * ray.direction;
  Vec3i cell;
  int step[3];
  double tmax[3], tdelta[3];
  for (int a = 0; a < 3; ++a) {
    double f = std::floor((p[a] - origin[a]) / vs);
    cell[a] = int32_t(std::clamp(f, 0.0, double(dims[a] - 1)));
    double d = ray.direction[a];
    if (d > 0) {
      step[a] = 1;
      tmax[a] = (origin[a] + (cell[a] + 1) * vs - ray.origin[a]) / d;
      tdelta[a] = vs / d;
    } else if (d < 0) {
      step[a] = -1;
      tmax[a] = (origin[a] + cell[a] * vs - ray.origin[a]) / d;
      tdelta[a] = -vs / d;
    } else {
      step[a] = 0;
      tmax[a] = kInf;
      tdelta[a] = kInf;
    }
    /* Origins on a cell boundary can place the first crossing a hair
     * before t0; crossings never precede ray entry. */
    tmax[a] = std::max(tmax[a], t0);
  }

  double t_cur = t0;
  while (t_cur <= d_max) {
    double t_exit_cell = std::min({tmax[0], tmax[1], tmax[2]});
    double t_end = std::min(t_exit_cell, t1);
    if (t_end > t_cur) {
      if (!visit(cell, t_cur)) return;
    }
    if (t_exit_cell >= t1 || t_exit_cell > d_max) return;
    int axis = 0;
    if (tmax[1] < tmax[axis]) axis = 1;
    if (tmax[2] < tmax[axis]) axis = 2;
    cell[axis] += step[axis];
    if (cell[axis] < 0 || cell[axis] >= dims[axis]) return;
    t_cur = std::max(tmax[axis], t_cur);
    tmax[axis] += tdelta[axis];
  }
}

RayHit make_hit(const SemanticGrid& g, const Ray& ray, Vec3i cell, double t) {
  return RayHit{cell, g.at(cell), t, ray.origin + t * ray.direction};
}

}  // namespace

std::optional<RayHit> first_hit(const SemanticGrid& grid, const Ray& ray,
                                double d_max) {
  validate_ray(ray, d_max);
  std::optional<RayHit> hit;
  walk_cells(grid, ray, d_max, [&](Vec3i cell, double t) {
    if (grid.at(cell) == kEmptyLabel) return true;
    hit = make_hit(grid, ray, cell, t);
    return false;
  });
  return hit;
}

RayTrace full_trace(const SemanticGrid& grid, const Ray& ray, double d_max) {
  validate_ray(ray, d_max);
  RayTrace trace;
  walk_cells(grid, ray, d_max, [&](Vec3i cell, double t) {
    if (grid.at(cell) != kEmptyLabel) trace.push_back(make_hit(grid, ray, cell, t));
    return true;
  });
  return trace;
}

std::optional<RayHit> oracle_first_hit(const SemanticGrid& grid, const Ray& ray,
                                       double d_max, double step) {
  validate_ray(ray, d_max);
  require(std::isfinite(step) && step > 0, ErrorCode::InvalidArgument,
          "oracle step must be positive");

  auto occupied_at = [&](double t) -> std::optional<Vec3i> {
    auto v = grid.voxel_of(ray.origin + t * ray.direction);
    if (v && grid.at(*v) != kEmptyLabel) return v;
    return std::nullopt;
  };

  double t_in = -1.0;
  Vec3i vox;
  const auto n = uint64_t(std::floor(d_max / step));
  for (uint64_t k = 0; k <= n + 1; ++k) {
    double t = std::min(double(k) * step, d_max);
    if (auto v = occupied_at(t)) {
      t_in = t;
      vox = *v;
      break;
    }
    if (t >= d_max) break;
  }
  if (t_in < 0.0) return std::nullopt;
  if (t_in == 0.0) return make_hit(grid, ray, vox, 0.0);

  auto inside_vox = [&](double t) {
    auto v = grid.voxel_of(ray.origin + t * ray.direction);
    return v && *v == vox;
  };
  double lo = std::max(0.0, t_in - step), hi = t_in;
  while (hi - lo > 1e-6) {
    double mid = 0.5 * (lo + hi);
    (inside_vox(mid) ? hi : lo) = mid;
  }
  return make_hit(grid, ray, vox, hi);
}

}  // namespace voxcond
