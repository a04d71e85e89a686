#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/grid.hpp"
#include "core/vec.hpp"

namespace voxcond {

/* Box object moving on a straight line; position is the box center in
 * meters, size is the box extent in voxels. */
struct ObjectTrack {
  LabelId label = kEmptyLabel;
  Vec3 size_voxels;
  Vec3 start;
  Vec3 velocity;  // m/s

  Vec3 position_at(double t) const { return start + velocity * t; }
};

struct SceneConfig {
  uint64_t seed = 0;
  int frames = 1;
  double dt = 1.0 / 12.0;
  Vec3i dims{64, 64, 16};
  double voxel_size = 0.5;
  int n_vehicles = 0;
  int n_pedestrians = 0;
  int n_buildings = 0;
  int n_vegetation = 0;

  void validate() const;
  std::string to_json() const;
  static SceneConfig from_json(const std::string& text);
};

struct TemporalScene {
  SceneConfig config;
  std::vector<SemanticGrid> frames;
  std::vector<ObjectTrack> tracks;  // foreground movers only
};

/* Stamp the track's label onto every voxel whose center lies inside the
 * object's half-open AABB at time t; later calls overwrite earlier ones. */
void rasterize_track(GridBuilder& builder, const ObjectTrack& track, double t);

/* Deterministic synthetic street scene: road plane at the bottom layer,
 * static building/vegetation boxes, moving vehicles and pedestrians whose
 * AABBs stay inside the grid for every frame. Overwrite precedence:
 * pedestrians > vehicles > buildings/vegetation > road > empty. */
TemporalScene generate_scene(const SceneConfig& config);

/* Scene directory: frame_0000.vxsg .., tracks.json, taxonomy.json. */
void save_scene(const TemporalScene& scene, const std::string& dir);
TemporalScene load_scene(const std::string& dir);
std::string frame_filename(int index);

}  // namespace voxcond
