#include "core/scenegen.hpp"

#include <set>

#include "doctest.h"
#include "test_util.hpp"

using namespace voxcond;

namespace {

SceneConfig busy_config() {
  SceneConfig cfg;
  cfg.seed = 5;
  cfg.frames = 6;
  cfg.dims = {40, 40, 12};
  cfg.n_vehicles = 4;
  cfg.n_pedestrians = 3;
  cfg.n_buildings = 3;
  cfg.n_vegetation = 2;
  return cfg;
}

}  // namespace

TEST_CASE("generation is deterministic in the seed") {
  TemporalScene a = generate_scene(busy_config());
  TemporalScene b = generate_scene(busy_config());
  REQUIRE(a.frames.size() == b.frames.size());
  for (size_t f = 0; f < a.frames.size(); ++f)
    CHECK(a.frames[f].content_hash() == b.frames[f].content_hash());

  SceneConfig other = busy_config();
  other.seed = 6;
  TemporalScene c = generate_scene(other);
  CHECK(c.frames[0].content_hash() != a.frames[0].content_hash());
}

TEST_CASE("scenes contain every requested object class") {
  TemporalScene scene = generate_scene(busy_config());
  CHECK(scene.tracks.size() == 7);
  for (const auto& g : scene.frames) {
    std::set<LabelId> present(g.labels().begin(), g.labels().end());
    CHECK(present.count(1));  // road
    CHECK(present.count(2));  // building
    CHECK(present.count(3));  // vehicle
    CHECK(present.count(4));  // pedestrian
    CHECK(present.count(5));  // vegetation
  }
}

TEST_CASE("the bottom layer is road under everything empty") {
  TemporalScene scene = generate_scene(busy_config());
  for (const auto& g : scene.frames)
    for (int x = 0; x < g.dims().x; ++x)
      for (int y = 0; y < g.dims().y; ++y)
        CHECK(g.at({x, y, 0}) != kEmptyLabel);
}

TEST_CASE("movers stay inside the grid for every frame") {
  SceneConfig cfg = busy_config();
  TemporalScene scene = generate_scene(cfg);
  const SemanticGrid& g = scene.frames[0];
  for (const auto& tr : scene.tracks)
    for (int f = 0; f < cfg.frames; ++f) {
      Vec3 c = tr.position_at(f * cfg.dt);
      for (int a = 0; a < 3; ++a) {
        double half = tr.size_voxels[a] * cfg.voxel_size * 0.5;
        CHECK(c[a] - half >= g.aabb_min()[a] - 1e-9);
        CHECK(c[a] + half <= g.aabb_max()[a] + 1e-9);
      }
    }
}

TEST_CASE("moving objects actually move") {
  TemporalScene scene = generate_scene(busy_config());
  bool any_moved = false;
  for (const auto& tr : scene.tracks) {
    CHECK(tr.velocity.norm() > 0);
    if ((tr.position_at(0.5) - tr.start).norm() > 1e-6) any_moved = true;
  }
  CHECK(any_moved);
  CHECK(scene.frames[0].content_hash() !=
        scene.frames[scene.frames.size() - 1].content_hash());
}

TEST_CASE("rasterize_track stamps centers inside the half-open box") {
  GridBuilder b({8, 8, 4}, 1.0, {0, 0, 0});
  ObjectTrack tr;
  tr.label = 3;
  tr.size_voxels = {2, 1, 1};
  tr.start = {3.0, 3.5, 0.5};
  tr.velocity = {1.0, 0, 0};
  rasterize_track(b, tr, 0.0);
  // box x in [2,4): centers 2.5 and 3.5
  CHECK(b.labels[b.linear({2, 3, 0})] == 3);
  CHECK(b.labels[b.linear({3, 3, 0})] == 3);
  CHECK(b.labels[b.linear({1, 3, 0})] == kEmptyLabel);
  CHECK(b.labels[b.linear({4, 3, 0})] == kEmptyLabel);

  GridBuilder b2({8, 8, 4}, 1.0, {0, 0, 0});
  rasterize_track(b2, tr, 1.0);  // shifted one cell along +x
  CHECK(b2.labels[b2.linear({3, 3, 0})] == 3);
  CHECK(b2.labels[b2.linear({4, 3, 0})] == 3);
  CHECK(b2.labels[b2.linear({2, 3, 0})] == kEmptyLabel);
}

TEST_CASE("vehicles keep their long axis along the motion axis") {
  TemporalScene scene = generate_scene(busy_config());
  for (const auto& tr : scene.tracks) {
    if (tr.label != 3) continue;
    REQUIRE((tr.velocity.x == 0.0) != (tr.velocity.y == 0.0));
    int axis = tr.velocity.x != 0.0 ? 0 : 1;
    CHECK(tr.size_voxels[axis] > tr.size_voxels[1 - axis]);
  }
}

TEST_CASE("infeasible configs fail with the dedicated code") {
  SceneConfig tiny = busy_config();
  tiny.dims = {4, 4, 2};  // grid too small for any building or vehicle
  CHECK_FAILS_WITH(InfeasibleConfig, generate_scene(tiny));

  SceneConfig flat = busy_config();
  flat.dims = {40, 40, 2};  // vehicles fit nothing above the road layer
  flat.n_buildings = 0;
  flat.n_vegetation = 0;
  flat.n_pedestrians = 0;
  CHECK_FAILS_WITH(InfeasibleConfig, generate_scene(flat));
}

TEST_CASE("config validation and json round-trip") {
  SceneConfig cfg = busy_config();
  SceneConfig back = SceneConfig::from_json(cfg.to_json());
  CHECK(back.seed == cfg.seed);
  CHECK(back.frames == cfg.frames);
  CHECK(back.dims == cfg.dims);
  CHECK(back.voxel_size == cfg.voxel_size);
  CHECK(back.n_vehicles == cfg.n_vehicles);
  CHECK(back.to_json() == cfg.to_json());

  CHECK_FAILS_WITH(ParseError, SceneConfig::from_json("not json"));
  CHECK_FAILS_WITH(ParseError, SceneConfig::from_json("{\"frames\": 1}"));
  CHECK_FAILS_WITH(InvalidArgument,
                   SceneConfig::from_json("{\"seed\": 1, \"frames\": 0}"));

  SceneConfig bad = cfg;
  bad.voxel_size = -1;
  CHECK_FAILS_WITH(InvalidArgument, bad.validate());
}

TEST_CASE("scene directory round-trip") {
  std::string dir = scratch_dir("scene_io");
  TemporalScene scene = generate_scene(busy_config());
  save_scene(scene, dir);
  TemporalScene back = load_scene(dir);
  CHECK(back.config.to_json() == scene.config.to_json());
  REQUIRE(back.frames.size() == scene.frames.size());
  for (size_t f = 0; f < scene.frames.size(); ++f)
    CHECK(back.frames[f].content_hash() == scene.frames[f].content_hash());
  REQUIRE(back.tracks.size() == scene.tracks.size());
  for (size_t i = 0; i < scene.tracks.size(); ++i) {
    CHECK(back.tracks[i].label == scene.tracks[i].label);
    CHECK(back.tracks[i].size_voxels == scene.tracks[i].size_voxels);
    CHECK(back.tracks[i].start == scene.tracks[i].start);
    CHECK(back.tracks[i].velocity == scene.tracks[i].velocity);
  }
  CHECK(frame_filename(7) == "frame_0007.vxsg");
}
