#include "core/conditions.hpp"

#include <algorithm>
#include <cmath>

#include "core/bytes.hpp"
#include "core/error.hpp"

namespace voxcond {

namespace {

Rgb8 palette_color(const LabelTaxonomy& tax, LabelId label) {
  const auto& c = tax.color(label);
  return {c[0], c[1], c[2]};
}

float clamp01(double v) { return float(std::clamp(v, 0.0, 1.0)); }

std::array<float, 3> normalized_point(const SemanticGrid& g, Vec3 p) {
  Vec3 lo = g.aabb_min(), hi = g.aabb_max();
  return {clamp01((p.x - lo.x) / (hi.x - lo.x)),
          clamp01((p.y - lo.y) / (hi.y - lo.y)),
          clamp01((p.z - lo.z) / (hi.z - lo.z))};
}

/* Shared pixel loop: fn(x, y, trace). */
template <class Fn>
void for_each_pixel_trace(const SemanticGrid& grid, const Intrinsics& intr,
                          const Extrinsics& extr, const ConditionParams& p,
                          Fn&& fn) {
  p.validate();
  intr.validate();
  extr.validate();
  for (int y = 0; y < intr.height; ++y)
    for (int x = 0; x < intr.width; ++x) {
      Ray ray = pixel_ray(intr, extr, x + 0.5, y + 0.5);
      fn(x, y, full_trace(grid, ray, p.d_max));
    }
}

void fill_from_trace(const SemanticGrid& grid, const ConditionParams& p,
                     const RayTrace& trace, int x, int y, ConditionStack& out) {
  if (!trace.empty()) {
    const RayHit& hit = trace.front();
    out.semantic.at(x, y) = palette_color(grid.taxonomy(), hit.label);
    out.depth.at(x, y) = clamp01(hit.distance / p.d_max);
    out.coordinate.at(x, y) = normalized_point(grid, hit.point);
    out.mask.at(x, y) = grid.taxonomy().is_foreground(hit.label) ? 1 : 0;
  }
  for (const RayHit& h : trace) {
    int slab = mpi_slab(h.distance, p);
    if (out.mpi[slab].at(x, y) == kEmptyLabel) out.mpi[slab].at(x, y) = h.label;
  }
}

ConditionStack empty_stack(const Intrinsics& intr, const ConditionParams& p) {
  ConditionStack s;
  s.semantic = ImageRgb8(intr.width, intr.height, {0, 0, 0});
  s.depth = ImageF(intr.width, intr.height, 1.0f);
  s.coordinate = ImageVec3f(intr.width, intr.height, {0, 0, 0});
  s.mpi.assign(size_t(p.planes), ImageLabel(intr.width, intr.height, kEmptyLabel));
  s.mask = ImageLabel(intr.width, intr.height, 0);
  return s;
}

}  // namespace

void ConditionParams::validate() const {
  require(std::isfinite(d_max) && d_max > 0, ErrorCode::InvalidArgument,
          "d_max must be positive");
  require(planes >= 1, ErrorCode::InvalidArgument, "planes must be >= 1");
}

bool ConditionStack::operator==(const ConditionStack& o) const {
  return semantic == o.semantic && depth == o.depth &&
         coordinate == o.coordinate && mpi == o.mpi && mask == o.mask;
}

int mpi_slab(double distance, const ConditionParams& p) {
  require(distance >= 0 && distance <= p.d_max, ErrorCode::InvalidArgument,
          "distance outside [0, d_max]");
  int slab = int(std::floor(distance / p.d_max * p.planes));
  return std::min(slab, p.planes - 1);
}

ImageRgb8 render_semantic(const SemanticGrid& grid, const Intrinsics& intr,
                          const Extrinsics& extr, const ConditionParams& p) {
  p.validate();
  intr.validate();
  extr.validate();
  ImageRgb8 img(intr.width, intr.height, {0, 0, 0});
  for (int y = 0; y < intr.height; ++y)
    for (int x = 0; x < intr.width; ++x) {
      Ray ray = pixel_ray(intr, extr, x + 0.5, y + 0.5);
      if (auto hit = first_hit(grid, ray, p.d_max))
        img.at(x, y) = palette_color(grid.taxonomy(), hit->label);
    }
  return img;
}

ImageF render_depth(const SemanticGrid& grid, const Intrinsics& intr,
                    const Extrinsics& extr, const ConditionParams& p) {
  p.validate();
  intr.validate();
  extr.validate();
  ImageF img(intr.width, intr.height, 1.0f);
  for (int y = 0; y < intr.height; ++y)
    for (int x = 0; x < intr.width; ++x) {
      Ray ray = pixel_ray(intr, extr, x + 0.5, y + 0.5);
      if (auto hit = first_hit(grid, ray, p.d_max))
        img.at(x, y) = clamp01(hit->distance / p.d_max);
    }
  return img;
}

ImageVec3f render_coordinate(const SemanticGrid& grid, const Intrinsics& intr,
                             const Extrinsics& extr, const ConditionParams& p) {
  p.validate();
  intr.validate();
  extr.validate();
  ImageVec3f img(intr.width, intr.height, {0, 0, 0});
  for (int y = 0; y < intr.height; ++y)
    for (int x = 0; x < intr.width; ++x) {
      Ray ray = pixel_ray(intr, extr, x + 0.5, y + 0.5);
      if (auto hit = first_hit(grid, ray, p.d_max))
        img.at(x, y) = normalized_point(grid, hit->point);
    }
  return img;
}

std::vector<ImageLabel> render_mpi(const SemanticGrid& grid, const Intrinsics& intr,
                                   const Extrinsics& extr, const ConditionParams& p) {
  p.validate();
  intr.validate();
  extr.validate();
  std::vector<ImageLabel> planes(size_t(p.planes),
                                 ImageLabel(intr.width, intr.height, kEmptyLabel));
  for_each_pixel_trace(grid, intr, extr, p, [&](int x, int y, const RayTrace& tr) {
    for (const RayHit& h : tr) {
      int slab = mpi_slab(h.distance, p);
      if (planes[slab].at(x, y) == kEmptyLabel) planes[slab].at(x, y) = h.label;
    }
  });
  return planes;
}

ImageLabel render_mask(const SemanticGrid& grid, const Intrinsics& intr,
                       const Extrinsics& extr, const ConditionParams& p) {
  p.validate();
  intr.validate();
  extr.validate();
  ImageLabel img(intr.width, intr.height, 0);
  for (int y = 0; y < intr.height; ++y)
    for (int x = 0; x < intr.width; ++x) {
      Ray ray = pixel_ray(intr, extr, x + 0.5, y + 0.5);
      if (auto hit = first_hit(grid, ray, p.d_max))
        img.at(x, y) = grid.taxonomy().is_foreground(hit->label) ? 1 : 0;
    }
  return img;
}

ConditionStack render_stack(const SemanticGrid& grid, const Intrinsics& intr,
                            const Extrinsics& extr, const ConditionParams& p) {
  ConditionStack s = empty_stack(intr, p);
  for_each_pixel_trace(grid, intr, extr, p, [&](int x, int y, const RayTrace& tr) {
    fill_from_trace(grid, p, tr, x, y, s);
  });
  return s;
}

std::vector<std::string> stack_filenames(const std::string& view, int planes) {
  std::vector<std::string> names{view + "_semantic.ppm", view + "_depth.pgm",
                                 view + "_coordinate.ppm", view + "_mask.pgm"};
  for (int i = 0; i < planes; ++i)
    names.push_back(view + "_mpi_" + std::to_string(i) + ".ppm");
  return names;
}

void write_stack(const std::string& frame_dir, const std::string& view,
                 const ConditionStack& stack, const LabelTaxonomy& tax) {
  write_ppm8(frame_dir + "/" + view + "_semantic.ppm", stack.semantic);
  write_pgm16(frame_dir + "/" + view + "_depth.pgm", stack.depth);
  write_ppm16(frame_dir + "/" + view + "_coordinate.ppm", stack.coordinate);
  ImageLabel mask255(stack.mask.width, stack.mask.height, 0);
  for (size_t i = 0; i < mask255.px.size(); ++i)
    mask255.px[i] = stack.mask.px[i] ? 255 : 0;
  write_pgm8(frame_dir + "/" + view + "_mask.pgm", mask255);
  for (size_t pl = 0; pl < stack.mpi.size(); ++pl) {
    ImageRgb8 img(stack.mpi[pl].width, stack.mpi[pl].height, {0, 0, 0});
    for (size_t i = 0; i < img.px.size(); ++i) {
      const auto& c = tax.color(stack.mpi[pl].px[i]);
      img.px[i] = {c[0], c[1], c[2]};
    }
    write_ppm8(frame_dir + "/" + view + "_mpi_" + std::to_string(pl) + ".ppm", img);
  }
}

ConditionStack read_stack(const std::string& frame_dir, const std::string& view,
                          int planes, const LabelTaxonomy& tax) {
  ConditionStack s;
  s.semantic = decode_ppm8(read_file_bytes(frame_dir + "/" + view + "_semantic.ppm"));
  s.depth = decode_pgm16(read_file_bytes(frame_dir + "/" + view + "_depth.pgm"));
  s.coordinate =
      decode_ppm16(read_file_bytes(frame_dir + "/" + view + "_coordinate.ppm"));
  ImageLabel mask255 =
      decode_pgm8(read_file_bytes(frame_dir + "/" + view + "_mask.pgm"));
  s.mask = ImageLabel(mask255.width, mask255.height, 0);
  for (size_t i = 0; i < mask255.px.size(); ++i)
    s.mask.px[i] = mask255.px[i] > 0 ? 1 : 0;
  for (int pl = 0; pl < planes; ++pl) {
    ImageRgb8 img = decode_ppm8(
        read_file_bytes(frame_dir + "/" + view + "_mpi_" + std::to_string(pl) + ".ppm"));
    ImageLabel lbl(img.width, img.height, kEmptyLabel);
    for (size_t i = 0; i < img.px.size(); ++i)
      lbl.px[i] = tax.label_of_color(img.px[i]);
    s.mpi.push_back(std::move(lbl));
  }
  return s;
}

int group_consistency_violations(const ConditionStack& stack,
                                 const LabelTaxonomy& tax) {
  int bad = 0;
  const size_t n = stack.semantic.px.size();
  for (size_t i = 0; i < n; ++i) {
    bool sem_hit = stack.semantic.px[i] != Rgb8{0, 0, 0};
    bool depth_hit = stack.depth.px[i] < 1.0f;
    bool mpi_hit = false;
    for (const auto& plane : stack.mpi) mpi_hit = mpi_hit || plane.px[i] != kEmptyLabel;
    bool coord_zero = stack.coordinate.px[i] == std::array<float, 3>{0, 0, 0};
    bool ok = sem_hit == depth_hit && sem_hit == mpi_hit;
    if (!sem_hit) ok = ok && coord_zero && stack.mask.px[i] == 0;
    if (stack.mask.px[i] == 1)
      ok = ok && sem_hit && tax.is_foreground(tax.label_of_color(stack.semantic.px[i]));
    bad += ok ? 0 : 1;
  }
  return bad;
}

}  // namespace voxcond
