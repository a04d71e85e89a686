#pragma once

#include <string>
#include <vector>

#include "core/camera.hpp"
#include "core/grid.hpp"
#include "core/image.hpp"
#include "core/raycast.hpp"

namespace voxcond {

struct ConditionParams {
  double d_max = kDefaultDMax;
  int planes = 8;  // MPI depth slabs over [0, d_max]

  void validate() const;
};

/*
 * Per-view condition maps. Miss conventions: semantic (0,0,0), depth 1.0,
 * coordinate (0,0,0), all MPI planes empty, mask 0. Rays go through pixel
 * centers (x+0.5, y+0.5).
 */
struct ConditionStack {
  ImageRgb8 semantic;
  ImageF depth;                  // clamp(entry distance / d_max, 0, 1)
  ImageVec3f coordinate;         // hit point normalized to the grid AABB
  std::vector<ImageLabel> mpi;   // plane p: nearest hit with entry in slab p
  ImageLabel mask;               // 1 where the first hit label is foreground

  bool operator==(const ConditionStack& o) const;
};

ImageRgb8 render_semantic(const SemanticGrid& grid, const Intrinsics& intr,
                          const Extrinsics& extr, const ConditionParams& p);
ImageF render_depth(const SemanticGrid& grid, const Intrinsics& intr,
                    const Extrinsics& extr, const ConditionParams& p);
ImageVec3f render_coordinate(const SemanticGrid& grid, const Intrinsics& intr,
                             const Extrinsics& extr, const ConditionParams& p);
std::vector<ImageLabel> render_mpi(const SemanticGrid& grid, const Intrinsics& intr,
                                   const Extrinsics& extr, const ConditionParams& p);
ImageLabel render_mask(const SemanticGrid& grid, const Intrinsics& intr,
                       const Extrinsics& extr, const ConditionParams& p);

/* All five maps from a single grid traversal per pixel; equal to the
 * per-map renders by construction and by test. */
ConditionStack render_stack(const SemanticGrid& grid, const Intrinsics& intr,
                            const Extrinsics& extr, const ConditionParams& p);

/* MPI slab of an entry distance: floor(dist / d_max * planes), last slab
 * closed at d_max. */
int mpi_slab(double distance, const ConditionParams& p);

/* On-disk stack layout inside a frame directory:
 *   {view}_semantic.ppm      8-bit P6, palette colors
 *   {view}_depth.pgm         16-bit P5
 *   {view}_coordinate.ppm    16-bit P6
 *   {view}_mask.pgm          8-bit P5, 0 or 255
 *   {view}_mpi_{p}.ppm       8-bit P6 palette colors, p = 0..planes-1
 */
std::vector<std::string> stack_filenames(const std::string& view, int planes);
void write_stack(const std::string& frame_dir, const std::string& view,
                 const ConditionStack& stack, const LabelTaxonomy& tax);
ConditionStack read_stack(const std::string& frame_dir, const std::string& view,
                          int planes, const LabelTaxonomy& tax);

/* Zero when the miss conventions of all five maps agree pixel-wise. */
int group_consistency_violations(const ConditionStack& stack,
                                 const LabelTaxonomy& tax);

}  // namespace voxcond
