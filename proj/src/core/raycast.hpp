#pragma once

#include <optional>
#include <vector>

#include "core/camera.hpp"
#include "core/grid.hpp"

namespace voxcond {

struct RayHit {
  Vec3i voxel;
  LabelId label = kEmptyLabel;
  double distance = 0.0;  // entry-face distance along the ray (0 if inside)
  Vec3 point;             // origin + distance * direction
};

/* Hits ordered by strictly increasing entry distance. */
using RayTrace = std::vector<RayHit>;

constexpr double kDefaultDMax = 51.2;

/* First non-empty voxel pierced by the ray within d_max. Traversal is the
 * Amanatides & Woo grid walk <https://www.cse.yorku.ca/~amana/research/grid.pdf>;
 * on an exact edge or corner pass cells are stepped x before y before z, and
 * cells the ray only touches in a single point (zero-length intersection)
 * are not reported. */
std::optional<RayHit> first_hit(const SemanticGrid& grid, const Ray& ray,
                                double d_max = kDefaultDMax);

/* Every non-empty voxel pierced by the ray with entry distance <= d_max. */
RayTrace full_trace(const SemanticGrid& grid, const Ray& ray,
                    double d_max = kDefaultDMax);

/* Sampling oracle for first_hit, kept free of any traversal logic: marches
 * the ray in fixed increments, then bisects the entry boundary of the first
 * occupied sample's voxel down to 1e-6 m. */
std::optional<RayHit> oracle_first_hit(const SemanticGrid& grid, const Ray& ray,
                                       double d_max, double step);

}  // namespace voxcond
