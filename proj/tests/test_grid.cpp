#include "core/grid.hpp"

#include <cstring>

#include "core/bytes.hpp"
#include "core/fnv.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace voxcond;

namespace {

SemanticGrid small_grid() {
  GridBuilder b({3, 4, 5}, 0.5, {-1.0, -2.0, 0.0});
  b.labels[b.linear({0, 0, 0})] = 1;
  b.labels[b.linear({2, 3, 4})] = 3;
  b.labels[b.linear({1, 2, 3})] = 4;
  return b.freeze(default_taxonomy());
}

}  // namespace

TEST_CASE("linearization is x-major with z fastest") {
  SemanticGrid g = small_grid();
  CHECK(g.linear({0, 0, 0}) == 0);
  CHECK(g.linear({0, 0, 1}) == 1);
  CHECK(g.linear({0, 1, 0}) == 5);
  CHECK(g.linear({1, 0, 0}) == 20);
  CHECK(g.linear({2, 3, 4}) == size_t(2 * 4 * 5 + 3 * 5 + 4));
  CHECK(g.at({2, 3, 4}) == 3);
  CHECK(g.at({1, 2, 3}) == 4);
  CHECK(g.at({0, 0, 1}) == kEmptyLabel);
}

TEST_CASE("voxel_of implements half-open cells") {
  SemanticGrid g = small_grid();
  CHECK(g.voxel_of({-1.0, -2.0, 0.0}) == Vec3i{0, 0, 0});
  // boundary point belongs to the higher-index cell
  CHECK(g.voxel_of({-0.5, -2.0, 0.0}) == Vec3i{1, 0, 0});
  CHECK(g.voxel_of({-0.5 - 1e-12, -2.0, 0.0}) == Vec3i{0, 0, 0});
  // global max face is outside
  CHECK_FALSE(g.voxel_of({0.5, -2.0, 0.0}).has_value());
  CHECK_FALSE(g.voxel_of({-1.0, 0.0, 0.0}).has_value());
  CHECK_FALSE(g.voxel_of({-1.0, -2.0, 2.5}).has_value());
  CHECK_FALSE(g.voxel_of({-1.1, -2.0, 0.0}).has_value());
  CHECK(g.voxel_of({0.5 - 1e-9, 0.0 - 1e-9, 2.5 - 1e-9}) == Vec3i{2, 3, 4});
}

TEST_CASE("center_of round-trips through voxel_of") {
  SemanticGrid g = small_grid();
  for (int x = 0; x < 3; ++x)
    for (int y = 0; y < 4; ++y)
      for (int z = 0; z < 5; ++z) {
        Vec3i idx{x, y, z};
        CHECK(g.voxel_of(g.center_of(idx)) == idx);
      }
}

TEST_CASE("aabb matches dims and voxel size") {
  SemanticGrid g = small_grid();
  CHECK(g.aabb_min() == Vec3{-1.0, -2.0, 0.0});
  CHECK(g.aabb_max() == Vec3{0.5, 0.0, 2.5});
}

TEST_CASE("byte round-trip is exact") {
  SemanticGrid g = small_grid();
  auto bytes = g.to_bytes();
  SemanticGrid h = SemanticGrid::from_bytes(bytes);
  CHECK(h.dims() == g.dims());
  CHECK(h.voxel_size() == g.voxel_size());
  CHECK(h.origin() == g.origin());
  CHECK(h.labels() == g.labels());
  CHECK(h.taxonomy() == g.taxonomy());
  CHECK(h.to_bytes() == bytes);
  CHECK(h.content_hash() == g.content_hash());
}

TEST_CASE("content_hash hashes the serialized container") {
  SemanticGrid g = small_grid();
  auto bytes = g.to_bytes();
  CHECK(g.content_hash() == fnv1a64(bytes.data(), bytes.size()));

  GridBuilder b({3, 4, 5}, 0.5, {-1.0, -2.0, 0.0});
  b.labels[b.linear({0, 0, 0})] = 2;
  CHECK(b.freeze(default_taxonomy()).content_hash() != g.content_hash());
}

TEST_CASE("file round-trip is byte-exact") {
  std::string dir = scratch_dir("grid_io");
  SemanticGrid g = small_grid();
  g.save(dir + "/g.vxsg");
  CHECK(read_file_bytes(dir + "/g.vxsg") == g.to_bytes());
  SemanticGrid h = SemanticGrid::load(dir + "/g.vxsg");
  CHECK(h.to_bytes() == g.to_bytes());
}

TEST_CASE("container rejects malformed payloads") {
  auto bytes = small_grid().to_bytes();

  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_FAILS_WITH(BadMagic, SemanticGrid::from_bytes(bad_magic));

  auto bad_version = bytes;
  bad_version[4] = 0xEE;
  CHECK_FAILS_WITH(UnsupportedVersion, SemanticGrid::from_bytes(bad_version));

  auto truncated = bytes;
  truncated.resize(truncated.size() - 7);
  CHECK_FAILS_WITH(TruncatedPayload, SemanticGrid::from_bytes(truncated));

  auto trailing = bytes;
  trailing.push_back(0);
  CHECK_FAILS_WITH(ParseError, SemanticGrid::from_bytes(trailing));

  auto bad_label = bytes;
  bad_label.back() = 200;  // last voxel of the label payload
  CHECK_FAILS_WITH(LabelOutOfRange, SemanticGrid::from_bytes(bad_label));

  CHECK_FAILS_WITH(TruncatedPayload,
                   SemanticGrid::from_bytes(std::vector<uint8_t>{'V', 'X'}));
}

TEST_CASE("container rejects oversized dims before allocating") {
  auto bytes = small_grid().to_bytes();
  uint32_t huge = 0x20000000;
  std::memcpy(bytes.data() + 6, &huge, 4);   // dx
  std::memcpy(bytes.data() + 10, &huge, 4);  // dy
  CHECK_FAILS_WITH(DimensionOverflow, SemanticGrid::from_bytes(bytes));
}

TEST_CASE("grid construction validates inputs") {
  CHECK_FAILS_WITH(InvalidArgument,
                   SemanticGrid({0, 1, 1}, 0.5, {}, {}, default_taxonomy()));
  CHECK_FAILS_WITH(InvalidArgument,
                   SemanticGrid({1, 1, 1}, 0.0, {}, {0}, default_taxonomy()));
  CHECK_FAILS_WITH(ShapeMismatch,
                   SemanticGrid({1, 1, 1}, 0.5, {}, {0, 0}, default_taxonomy()));
  CHECK_FAILS_WITH(LabelOutOfRange,
                   SemanticGrid({1, 1, 1}, 0.5, {}, {99}, default_taxonomy()));
}

TEST_CASE("taxonomy json round-trip and color lookup") {
  const LabelTaxonomy& tax = default_taxonomy();
  LabelTaxonomy back = LabelTaxonomy::from_json(tax.to_json());
  CHECK(back == tax);

  CHECK(tax.label_of_color({0, 0, 0}) == kEmptyLabel);
  CHECK(tax.label_of_color({0, 0, 142}) == 3);
  CHECK(tax.is_foreground(3));
  CHECK(tax.is_foreground(4));
  CHECK_FALSE(tax.is_foreground(0));
  CHECK_FALSE(tax.is_foreground(1));
  CHECK_FAILS_WITH(LabelOutOfRange, tax.label_of_color({1, 2, 3}));
  CHECK_FAILS_WITH(LabelOutOfRange, tax.entry(200));
  CHECK_FAILS_WITH(ParseError, LabelTaxonomy::from_json("not json"));
}

TEST_CASE("taxonomy validates entries") {
  CHECK_FAILS_WITH(InvalidArgument, LabelTaxonomy({}));
  CHECK_FAILS_WITH(InvalidArgument,
                   LabelTaxonomy({{"road", {1, 2, 3}, false}}));
  CHECK_FAILS_WITH(InvalidArgument,
                   LabelTaxonomy({{"empty", {0, 0, 0}, false},
                                  {"a", {1, 2, 3}, false},
                                  {"a", {4, 5, 6}, false}}));
  CHECK_FAILS_WITH(InvalidArgument,
                   LabelTaxonomy({{"empty", {0, 0, 0}, false},
                                  {"a", {1, 2, 3}, false},
                                  {"b", {1, 2, 3}, false}}));
  CHECK_FAILS_WITH(InvalidArgument,
                   LabelTaxonomy({{"empty", {0, 0, 0}, false},
                                  {"a", {0, 0, 0}, false}}));
}
