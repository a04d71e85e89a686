#include "core/grid.hpp"

#include <cmath>

#include "core/bytes.hpp"
#include "core/error.hpp"
#include "core/fnv.hpp"

namespace voxcond {

namespace {

constexpr char kMagic[4] = {'V', 'X', 'S', 'G'};
constexpr uint16_t kVersion = 1;

/* Dense u8 payloads above this are treated as corrupt headers rather than
 * honest grids (1 GiB of labels is far beyond desk scale). */
constexpr uint64_t kMaxVoxels = uint64_t(1) << 30;

}  // namespace

SemanticGrid::SemanticGrid(Vec3i dims, double voxel_size, Vec3 origin,
                           std::vector<LabelId> labels, LabelTaxonomy taxonomy)
    : dims_(dims), voxel_size_(voxel_size), origin_(origin),
      labels_(std::move(labels)), taxonomy_(std::move(taxonomy)) {
  require(dims_.x > 0 && dims_.y > 0 && dims_.z > 0, ErrorCode::InvalidArgument,
          "grid dims must be positive");
  require(voxel_size_ > 0.0 && std::isfinite(voxel_size_),
          ErrorCode::InvalidArgument, "voxel size must be positive");
  require(std::isfinite(origin_.x) && std::isfinite(origin_.y) &&
              std::isfinite(origin_.z),
          ErrorCode::InvalidArgument, "grid origin must be finite");
  uint64_t n = uint64_t(dims_.x) * uint64_t(dims_.y) * uint64_t(dims_.z);
  require(n <= kMaxVoxels, ErrorCode::DimensionOverflow, "grid too large");
  require(labels_.size() == n, ErrorCode::ShapeMismatch,
          "label payload size does not match dims");
  for (LabelId l : labels_)
    require(taxonomy_.contains(l), ErrorCode::LabelOutOfRange,
            "grid label " + std::to_string(int(l)) + " outside taxonomy");
}

LabelId SemanticGrid::at(Vec3i idx) const {
  require(in_bounds(idx), ErrorCode::InvalidArgument, "voxel index out of bounds");
  return labels_[linear(idx)];
}

std::optional<Vec3i> SemanticGrid::voxel_of(Vec3 p) const {
  double fx = std::floor((p.x - origin_.x) / voxel_size_);
  double fy = std::floor((p.y - origin_.y) / voxel_size_);
  double fz = std::floor((p.z - origin_.z) / voxel_size_);
  if (!(fx >= 0 && fx < dims_.x && fy >= 0 && fy < dims_.y && fz >= 0 &&
        fz < dims_.z))
    return std::nullopt;
  return Vec3i{int32_t(fx), int32_t(fy), int32_t(fz)};
}

Vec3 SemanticGrid::center_of(Vec3i idx) const {
  require(in_bounds(idx), ErrorCode::InvalidArgument, "voxel index out of bounds");
  return {origin_.x + (idx.x + 0.5) * voxel_size_,
          origin_.y + (idx.y + 0.5) * voxel_size_,
          origin_.z + (idx.z + 0.5) * voxel_size_};
}

uint64_t SemanticGrid::content_hash() const { return fnv1a64(to_bytes()); }

std::vector<uint8_t> SemanticGrid::to_bytes() const {
  ByteWriter w;
  w.raw(kMagic, 4);
  w.u16(kVersion);
  w.u32(uint32_t(dims_.x));
  w.u32(uint32_t(dims_.y));
  w.u32(uint32_t(dims_.z));
  w.f32(float(voxel_size_));
  w.f32(float(origin_.x));
  w.f32(float(origin_.y));
  w.f32(float(origin_.z));
  w.u16(uint16_t(taxonomy_.size()));
  for (const auto& e : taxonomy_.entries()) {
    w.str8(e.name);
    w.u8(e.color[0]);
    w.u8(e.color[1]);
    w.u8(e.color[2]);
    w.u8(e.is_foreground ? 1 : 0);
  }
  w.raw(labels_.data(), labels_.size());
  return w.bytes;
}

SemanticGrid SemanticGrid::from_bytes(const std::vector<uint8_t>& bytes) {
  ByteReader r(bytes);
  char magic[4];
  r.raw(magic, 4);
  require(std::memcmp(magic, kMagic, 4) == 0, ErrorCode::BadMagic,
          "not a VXSG file");
  uint16_t version = r.u16();
  require(version == kVersion, ErrorCode::UnsupportedVersion,
          "unsupported VXSG version " + std::to_string(version));
  uint32_t dx = r.u32(), dy = r.u32(), dz = r.u32();
  require(dx > 0 && dy > 0 && dz > 0, ErrorCode::InvalidArgument,
          "grid dims must be positive");
  uint64_t n = uint64_t(dx) * uint64_t(dy) * uint64_t(dz);
  require(dx <= kMaxVoxels && dy <= kMaxVoxels && dz <= kMaxVoxels &&
              n <= kMaxVoxels,
          ErrorCode::DimensionOverflow, "grid dims overflow");
  float vs = r.f32();
  Vec3 origin{r.f32(), r.f32(), r.f32()};
  uint16_t n_labels = r.u16();
  std::vector<TaxonomyEntry> entries;
  for (uint16_t i = 0; i < n_labels; ++i) {
    TaxonomyEntry e;
    e.name = r.str8();
    e.color = {r.u8(), r.u8(), r.u8()};
    e.is_foreground = r.u8() != 0;
    entries.push_back(std::move(e));
  }
  LabelTaxonomy tax(std::move(entries));
  std::vector<LabelId> labels(static_cast<size_t>(n));
  r.raw(labels.data(), labels.size());
  require(r.done(), ErrorCode::ParseError,
          "trailing bytes after VXSG payload");
  for (LabelId l : labels)
    require(tax.contains(l), ErrorCode::LabelOutOfRange,
            "payload label " + std::to_string(int(l)) + " outside taxonomy");
  return SemanticGrid({int32_t(dx), int32_t(dy), int32_t(dz)}, double(vs),
                      origin, std::move(labels), std::move(tax));
}

void SemanticGrid::save(const std::string& path) const {
  write_file_bytes(path, to_bytes());
}

SemanticGrid SemanticGrid::load(const std::string& path) {
  return from_bytes(read_file_bytes(path));
}

}  // namespace voxcond
