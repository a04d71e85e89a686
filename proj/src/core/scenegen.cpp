#include "core/scenegen.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "core/bytes.hpp"
#include "core/error.hpp"
#include "core/rng.hpp"
#include "json.hpp"

namespace voxcond {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kPlaceAttempts = 64;

json vec3_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

Vec3 vec3_from(const json& j) {
  require(j.is_array() && j.size() == 3, ErrorCode::ParseError,
          "expected a 3-vector");
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

struct Box {
  LabelId label;
  Vec3 size_voxels;
  Vec3 center;
};

/* Half-open center-in-AABB rasterization shared by statics and tracks. */
void stamp_box(GridBuilder& b, LabelId label, Vec3 size_voxels, Vec3 center) {
  for (int a = 0; a < 3; ++a)
    require(size_voxels[a] > 0, ErrorCode::InvalidArgument,
            "object size must be positive");
  int lo[3], hi[3];
  for (int a = 0; a < 3; ++a) {
    double half = size_voxels[a] * b.voxel_size * 0.5;
    double rel_lo = (center[a] - half - b.origin[a]) / b.voxel_size - 0.5;
    double rel_hi = (center[a] + half - b.origin[a]) / b.voxel_size - 0.5;
    lo[a] = std::max(0, int(std::ceil(rel_lo)));
    hi[a] = std::min(b.dims[a] - 1, int(std::ceil(rel_hi)) - 1);
  }
  for (int x = lo[0]; x <= hi[0]; ++x)
    for (int y = lo[1]; y <= hi[1]; ++y)
      for (int z = lo[2]; z <= hi[2]; ++z)
        b.labels[b.linear({x, y, z})] = label;
}

LabelId label_id(const LabelTaxonomy& tax, const std::string& name) {
  for (size_t i = 0; i < tax.size(); ++i)
    if (tax.entry(LabelId(i)).name == name) return LabelId(i);
  fail(ErrorCode::InvalidArgument, "no taxonomy label named " + name);
}

/* Placement helper over one scene's fixed geometry. */
struct Placer {
  const SceneConfig& cfg;
  Vec3 origin;
  double horizon;
  double road_top;

  double extent(int axis) const { return cfg.dims[axis] * cfg.voxel_size; }
  double height_avail() const { return extent(2) - cfg.voxel_size; }

  /* Start interval on one axis keeping [start-half, start+half] plus the
   * linear displacement over [0, horizon] inside the grid. */
  bool start_range(double half, double v, int axis, double& lo, double& hi) const {
    double gmin = origin[axis];
    double gmax = origin[axis] + extent(axis);
    lo = gmin + half - std::min(0.0, v * horizon);
    hi = gmax - half - std::max(0.0, v * horizon);
    return lo <= hi;
  }

  bool fits_height(double h) const { return h <= height_avail(); }
};

}  // namespace

void SceneConfig::validate() const {
  require(frames >= 1, ErrorCode::InvalidArgument, "frames must be >= 1");
  require(std::isfinite(dt) && dt > 0, ErrorCode::InvalidArgument,
          "dt must be positive");
  require(dims.x > 0 && dims.y > 0 && dims.z > 0, ErrorCode::InvalidArgument,
          "dims must be positive");
  require(std::isfinite(voxel_size) && voxel_size > 0,
          ErrorCode::InvalidArgument, "voxel_size must be positive");
  require(n_vehicles >= 0 && n_pedestrians >= 0 && n_buildings >= 0 &&
              n_vegetation >= 0,
          ErrorCode::InvalidArgument, "object counts must be >= 0");
}

std::string SceneConfig::to_json() const {
  return json{{"seed", seed},
              {"frames", frames},
              {"dt", dt},
              {"dims", {dims.x, dims.y, dims.z}},
              {"voxel_size", voxel_size},
              {"n_vehicles", n_vehicles},
              {"n_pedestrians", n_pedestrians},
              {"n_buildings", n_buildings},
              {"n_vegetation", n_vegetation}}
      .dump(2);
}

SceneConfig SceneConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, std::string("config parse error: ") + e.what());
  }
  SceneConfig c;
  try {
    c.seed = j.at("seed").get<uint64_t>();
    c.frames = j.at("frames").get<int>();
    if (j.contains("dt")) c.dt = j.at("dt").get<double>();
    if (j.contains("dims")) {
      const auto& d = j.at("dims");
      require(d.size() == 3, ErrorCode::ParseError, "dims must have 3 entries");
      c.dims = {d.at(0).get<int32_t>(), d.at(1).get<int32_t>(),
                d.at(2).get<int32_t>()};
    }
    if (j.contains("voxel_size")) c.voxel_size = j.at("voxel_size").get<double>();
    c.n_vehicles = j.value("n_vehicles", 0);
    c.n_pedestrians = j.value("n_pedestrians", 0);
    c.n_buildings = j.value("n_buildings", 0);
    c.n_vegetation = j.value("n_vegetation", 0);
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, std::string("config parse error: ") + e.what());
  }
  c.validate();
  return c;
}

void rasterize_track(GridBuilder& builder, const ObjectTrack& track, double t) {
  stamp_box(builder, track.label, track.size_voxels, track.position_at(t));
}

TemporalScene generate_scene(const SceneConfig& config) {
  config.validate();
  const LabelTaxonomy& tax = default_taxonomy();
  const double vs = config.voxel_size;
  const Placer pl{config,
                  {-0.5 * config.dims.x * vs, -0.5 * config.dims.y * vs, 0.0},
                  (config.frames - 1) * config.dt,
                  vs};

  Rng rng(config.seed);
  Rng rng_static = rng.fork(1);
  Rng rng_movers = rng.fork(2);

  const LabelId building = label_id(tax, "building");
  const LabelId vegetation = label_id(tax, "vegetation");
  const LabelId vehicle = label_id(tax, "vehicle");
  const LabelId pedestrian = label_id(tax, "pedestrian");
  const LabelId road = label_id(tax, "road");

  /* Static boxes redraw their size every attempt so retries can adapt to
   * the grid; movers have physical sizes, so a grid they cannot fit is an
   * infeasible config rather than something to shrink around. */
  auto place_static = [&](LabelId label, double fp_lo, double fp_hi,
                          double h_lo, double h_hi) -> Box {
    for (int attempt = 0; attempt < kPlaceAttempts; ++attempt) {
      double fx_hi = std::min(fp_hi, pl.extent(0));
      double fy_hi = std::min(fp_hi, pl.extent(1));
      double hz_hi = std::min(h_hi, pl.height_avail());
      if (fx_hi < fp_lo || fy_hi < fp_lo || hz_hi < h_lo) break;
      Vec3 size_m{rng_static.uniform(fp_lo, fx_hi),
                  rng_static.uniform(fp_lo, fy_hi),
                  rng_static.uniform(h_lo, hz_hi)};
      Box box{label, size_m / vs, {}};
      bool ok = true;
      for (int a = 0; a < 2 && ok; ++a) {
        double lo, hi;
        ok = pl.start_range(size_m[a] * 0.5, 0.0, a, lo, hi);
        if (ok) box.center[a] = rng_static.uniform(lo, hi);
      }
      box.center.z = pl.road_top + size_m.z * 0.5;
      if (ok) return box;
    }
    fail(ErrorCode::InfeasibleConfig,
         "infeasible scene config: cannot place a " + tax.entry(label).name +
             " inside the grid");
  };

  auto place_mover = [&](LabelId label, Vec3 size_m, double speed_lo,
                         double speed_hi, bool axis_aligned) -> ObjectTrack {
    require(pl.fits_height(size_m.z), ErrorCode::InfeasibleConfig,
            "infeasible scene config: " + tax.entry(label).name +
                " taller than the grid");
    for (int attempt = 0; attempt < kPlaceAttempts; ++attempt) {
      ObjectTrack tr;
      tr.label = label;
      double speed = rng_movers.uniform(speed_lo, speed_hi);
      Vec3 sz = size_m;
      if (axis_aligned) {
        int axis = rng_movers.uniform_int(0, 1);
        double sign = rng_movers.uniform_int(0, 1) ? 1.0 : -1.0;
        tr.velocity = {0, 0, 0};
        tr.velocity[axis] = sign * speed;
        if (axis == 1) std::swap(sz.x, sz.y);  // length follows motion
      } else {
        double ang = rng_movers.uniform(0.0, 6.283185307179586);
        tr.velocity = {speed * std::cos(ang), speed * std::sin(ang), 0.0};
      }
      tr.size_voxels = sz / vs;
      bool ok = true;
      for (int a = 0; a < 2 && ok; ++a) {
        double lo, hi;
        ok = pl.start_range(sz[a] * 0.5, tr.velocity[a], a, lo, hi);
        if (ok) tr.start[a] = rng_movers.uniform(lo, hi);
      }
      tr.start.z = pl.road_top + sz.z * 0.5;
      if (ok) return tr;
    }
    fail(ErrorCode::InfeasibleConfig,
         "infeasible scene config: cannot place a moving " +
             tax.entry(label).name + " inside the grid");
  };

  std::vector<Box> statics;
  for (int i = 0; i < config.n_buildings; ++i)
    statics.push_back(place_static(building, 4.0, 10.0, 3.0, 9.0));
  for (int i = 0; i < config.n_vegetation; ++i)
    statics.push_back(place_static(vegetation, 1.0, 3.0, 1.0, 3.0));

  std::vector<ObjectTrack> tracks;
  for (int i = 0; i < config.n_vehicles; ++i)
    tracks.push_back(place_mover(
        vehicle, {rng_movers.uniform(3.4, 5.0), rng_movers.uniform(1.7, 2.1),
                  rng_movers.uniform(1.5, 1.9)}, 2.0, 8.0, true));
  for (int i = 0; i < config.n_pedestrians; ++i)
    tracks.push_back(place_mover(
        pedestrian, {0.6, 0.6, rng_movers.uniform(1.6, 1.9)}, 0.5, 1.5, false));

  TemporalScene scene;
  scene.config = config;
  scene.tracks = tracks;
  for (int f = 0; f < config.frames; ++f) {
    double t = f * config.dt;
    GridBuilder b(config.dims, vs, pl.origin);
    /* Overwrite precedence, lowest tier first. */
    for (int y = 0; y < b.dims.y; ++y)
      for (int x = 0; x < b.dims.x; ++x) b.labels[b.linear({x, y, 0})] = road;
    for (const Box& box : statics) stamp_box(b, box.label, box.size_voxels, box.center);
    for (const ObjectTrack& tr : tracks)
      if (tr.label == vehicle) rasterize_track(b, tr, t);
    for (const ObjectTrack& tr : tracks)
      if (tr.label == pedestrian) rasterize_track(b, tr, t);
    scene.frames.push_back(b.freeze(tax));
  }
  return scene;
}

std::string frame_filename(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%04d.vxsg", index);
  return buf;
}

void save_scene(const TemporalScene& scene, const std::string& dir) {
  fs::create_directories(dir);
  for (size_t f = 0; f < scene.frames.size(); ++f)
    scene.frames[f].save(dir + "/" + frame_filename(int(f)));
  const LabelTaxonomy& tax = scene.frames.empty()
                                 ? default_taxonomy()
                                 : scene.frames.front().taxonomy();
  write_file_text(dir + "/taxonomy.json", tax.to_json());
  json jtracks = json::array();
  for (const auto& tr : scene.tracks)
    jtracks.push_back({{"label", tax.entry(tr.label).name},
                       {"label_id", tr.label},
                       {"size_voxels", vec3_json(tr.size_voxels)},
                       {"start", vec3_json(tr.start)},
                       {"velocity", vec3_json(tr.velocity)}});
  json manifest{{"config", json::parse(scene.config.to_json())},
                {"tracks", jtracks}};
  write_file_text(dir + "/tracks.json", manifest.dump(2));
}

TemporalScene load_scene(const std::string& dir) {
  json manifest;
  try {
    manifest = json::parse(read_file_text(dir + "/tracks.json"));
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, std::string("tracks.json: ") + e.what());
  }
  TemporalScene scene;
  try {
    scene.config = SceneConfig::from_json(manifest.at("config").dump());
    for (const auto& jt : manifest.at("tracks")) {
      ObjectTrack tr;
      tr.label = LabelId(jt.at("label_id").get<int>());
      tr.size_voxels = vec3_from(jt.at("size_voxels"));
      tr.start = vec3_from(jt.at("start"));
      tr.velocity = vec3_from(jt.at("velocity"));
      scene.tracks.push_back(tr);
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, std::string("tracks.json: ") + e.what());
  }
  for (int f = 0; f < scene.config.frames; ++f)
    scene.frames.push_back(SemanticGrid::load(dir + "/" + frame_filename(f)));
  return scene;
}

}  // namespace voxcond
