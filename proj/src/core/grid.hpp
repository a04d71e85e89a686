#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "core/taxonomy.hpp"
#include "core/vec.hpp"

namespace voxcond {

/*
 * Dense semantic voxel grid over ego space. Axes: x forward, y left, z up;
 * dims = (H, W, D) voxel counts along x, y, z. Cells are half-open boxes
 * [origin + idx*vs, origin + (idx+1)*vs); a boundary point belongs to the
 * cell with the larger index, and the global max face belongs to no cell.
 * Labels are immutable after construction.
 */
class SemanticGrid {
public:
  SemanticGrid(Vec3i dims, double voxel_size, Vec3 origin,
               std::vector<LabelId> labels, LabelTaxonomy taxonomy);

  Vec3i dims() const { return dims_; }
  double voxel_size() const { return voxel_size_; }
  Vec3 origin() const { return origin_; }
  const LabelTaxonomy& taxonomy() const { return taxonomy_; }
  const std::vector<LabelId>& labels() const { return labels_; }

  Vec3 aabb_min() const { return origin_; }
  Vec3 aabb_max() const {
    return {origin_.x + dims_.x * voxel_size_,
            origin_.y + dims_.y * voxel_size_,
            origin_.z + dims_.z * voxel_size_};
  }

  bool in_bounds(Vec3i idx) const {
    return idx.x >= 0 && idx.x < dims_.x && idx.y >= 0 && idx.y < dims_.y &&
           idx.z >= 0 && idx.z < dims_.z;
  }

  /* x-major linearization: x slowest, z fastest. */
  size_t linear(Vec3i idx) const {
    return (size_t(idx.x) * dims_.y + idx.y) * dims_.z + idx.z;
  }

  LabelId at(Vec3i idx) const;

  /* Cell containing a world point; empty for points outside the grid AABB. */
  std::optional<Vec3i> voxel_of(Vec3 p) const;

  /* World-space center of a cell. */
  Vec3 center_of(Vec3i idx) const;

  uint64_t content_hash() const;

  /* "VXSG" container: little-endian header (version, dims, voxel size,
   * origin, taxonomy) followed by the dense x-major label payload. */
  std::vector<uint8_t> to_bytes() const;
  static SemanticGrid from_bytes(const std::vector<uint8_t>& bytes);
  void save(const std::string& path) const;
  static SemanticGrid load(const std::string& path);

private:
  Vec3i dims_;
  double voxel_size_;
  Vec3 origin_;
  std::vector<LabelId> labels_;
  LabelTaxonomy taxonomy_;
};

/* Mutable staging buffer used by scene generation before freezing a grid. */
struct GridBuilder {
  Vec3i dims;
  double voxel_size;
  Vec3 origin;
  std::vector<LabelId> labels;

  GridBuilder(Vec3i d, double vs, Vec3 o)
      : dims(d), voxel_size(vs), origin(o),
        labels(size_t(d.x) * size_t(d.y) * size_t(d.z), kEmptyLabel) {}

  size_t linear(Vec3i idx) const {
    return (size_t(idx.x) * dims.y + idx.y) * dims.z + idx.z;
  }

  SemanticGrid freeze(const LabelTaxonomy& tax) const {
    return SemanticGrid(dims, voxel_size, origin, labels, tax);
  }
};

}  // namespace voxcond
