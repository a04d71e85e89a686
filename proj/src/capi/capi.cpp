#include "voxcond.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "core/bytes.hpp"
#include "core/error.hpp"
#include "core/pipeline.hpp"
#include "core/version.hpp"

struct vxc_grid {
  voxcond::SemanticGrid impl;
};
struct vxc_rig {
  voxcond::CameraRig impl;
};
struct vxc_model {
  voxcond::ToyModel impl;
};

namespace {

thread_local std::string g_last_error;

template <class F>
vxc_status guard(F&& f) {
  try {
    f();
    return VXC_OK;
  } catch (const voxcond::Error& e) {
    g_last_error = e.what();
    return vxc_status(int(e.code()));
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return VXC_E_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return VXC_E_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return VXC_E_INTERNAL;
  }
}

void check(bool cond, const char* msg) {
  voxcond::require(cond, voxcond::ErrorCode::InvalidArgument, msg);
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  voxcond::require(out != nullptr, voxcond::ErrorCode::Internal,
                   "out of memory");
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

nlohmann::json parse_params(const char* params_json) {
  if (params_json == nullptr || params_json[0] == '\0')
    return nlohmann::json::object();
  try {
    nlohmann::json j = nlohmann::json::parse(params_json);
    voxcond::require(j.is_object(), voxcond::ErrorCode::ParseError,
                     "config parse error: params must be a JSON object");
    return j;
  } catch (const nlohmann::json::exception& e) {
    voxcond::fail(voxcond::ErrorCode::ParseError,
                  std::string("config parse error: ") + e.what());
  }
}

template <class T>
T field(const nlohmann::json& j, const char* key, T fallback) {
  try {
    return j.value(key, fallback);
  } catch (const nlohmann::json::exception& e) {
    voxcond::fail(voxcond::ErrorCode::ParseError,
                  std::string("config parse error: ") + e.what());
  }
}

}  // namespace

extern "C" {

const char* vxc_version(void) { return voxcond::kToolVersion; }

const char* vxc_status_name(vxc_status status) {
  switch (status) {
    case VXC_OK: return "ok";
    case VXC_E_INVALID_ARGUMENT: return "invalid_argument";
    case VXC_E_BAD_MAGIC: return "bad_magic";
    case VXC_E_UNSUPPORTED_VERSION: return "unsupported_version";
    case VXC_E_DIMENSION_OVERFLOW: return "dimension_overflow";
    case VXC_E_TRUNCATED_PAYLOAD: return "truncated_payload";
    case VXC_E_LABEL_OUT_OF_RANGE: return "label_out_of_range";
    case VXC_E_IO: return "io_error";
    case VXC_E_PARSE: return "parse_error";
    case VXC_E_INFEASIBLE_CONFIG: return "infeasible_config";
    case VXC_E_SHAPE_MISMATCH: return "shape_mismatch";
    case VXC_E_DIVERGED: return "diverged";
    case VXC_E_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* vxc_last_error(void) { return g_last_error.c_str(); }

void vxc_string_free(char* s) { std::free(s); }

vxc_status vxc_grid_load(const char* path, vxc_grid** out) {
  return guard([&] {
    check(path && out, "path and out must not be NULL");
    *out = new vxc_grid{voxcond::SemanticGrid::load(path)};
  });
}

vxc_status vxc_grid_save(const vxc_grid* grid, const char* path) {
  return guard([&] {
    check(grid && path, "grid and path must not be NULL");
    grid->impl.save(path);
  });
}

void vxc_grid_free(vxc_grid* grid) { delete grid; }

vxc_status vxc_grid_dims(const vxc_grid* grid, int32_t dims[3]) {
  return guard([&] {
    check(grid && dims, "grid and dims must not be NULL");
    voxcond::Vec3i d = grid->impl.dims();
    dims[0] = d.x;
    dims[1] = d.y;
    dims[2] = d.z;
  });
}

vxc_status vxc_grid_voxel_size(const vxc_grid* grid, double* out) {
  return guard([&] {
    check(grid && out, "grid and out must not be NULL");
    *out = grid->impl.voxel_size();
  });
}

vxc_status vxc_grid_origin(const vxc_grid* grid, double origin[3]) {
  return guard([&] {
    check(grid && origin, "grid and origin must not be NULL");
    voxcond::Vec3 o = grid->impl.origin();
    origin[0] = o.x;
    origin[1] = o.y;
    origin[2] = o.z;
  });
}

vxc_status vxc_grid_label_at(const vxc_grid* grid, int32_t x, int32_t y,
                             int32_t z, uint8_t* out) {
  return guard([&] {
    check(grid && out, "grid and out must not be NULL");
    *out = grid->impl.at({x, y, z});
  });
}

vxc_status vxc_grid_content_hash(const vxc_grid* grid, uint64_t* out) {
  return guard([&] {
    check(grid && out, "grid and out must not be NULL");
    *out = grid->impl.content_hash();
  });
}

vxc_status vxc_grid_first_hit(const vxc_grid* grid, const double origin[3],
                              const double direction[3], double d_max,
                              int32_t* hit, double* distance, uint8_t* label,
                              double point[3], int32_t voxel[3]) {
  return guard([&] {
    check(grid && origin && direction && hit,
          "grid, origin, direction, and hit must not be NULL");
    voxcond::Ray ray{{origin[0], origin[1], origin[2]},
                     {direction[0], direction[1], direction[2]}};
    auto h = voxcond::first_hit(grid->impl, ray, d_max);
    *hit = h.has_value() ? 1 : 0;
    if (!h) return;
    if (distance) *distance = h->distance;
    if (label) *label = h->label;
    if (point) {
      point[0] = h->point.x;
      point[1] = h->point.y;
      point[2] = h->point.z;
    }
    if (voxel) {
      voxel[0] = h->voxel.x;
      voxel[1] = h->voxel.y;
      voxel[2] = h->voxel.z;
    }
  });
}

vxc_status vxc_rig_default(int32_t width, int32_t height, vxc_rig** out) {
  return guard([&] {
    check(out != nullptr, "out must not be NULL");
    *out = new vxc_rig{voxcond::default_rig(width, height)};
  });
}

vxc_status vxc_rig_load(const char* path, vxc_rig** out) {
  return guard([&] {
    check(path && out, "path and out must not be NULL");
    *out = new vxc_rig{
        voxcond::CameraRig::from_json(voxcond::read_file_text(path))};
  });
}

vxc_status vxc_rig_save(const vxc_rig* rig, const char* path) {
  return guard([&] {
    check(rig && path, "rig and path must not be NULL");
    voxcond::write_file_text(path, rig->impl.to_json());
  });
}

void vxc_rig_free(vxc_rig* rig) { delete rig; }

vxc_status vxc_rig_view_count(const vxc_rig* rig, int32_t* out) {
  return guard([&] {
    check(rig && out, "rig and out must not be NULL");
    *out = int32_t(rig->impl.views.size());
  });
}

vxc_status vxc_rig_view_name(const vxc_rig* rig, int32_t index, char** out) {
  return guard([&] {
    check(rig && out, "rig and out must not be NULL");
    check(index >= 0 && index < int32_t(rig->impl.views.size()),
          "view index out of range");
    *out = dup_string(rig->impl.views[size_t(index)].name);
  });
}

vxc_status vxc_rig_content_hash(const vxc_rig* rig, uint64_t* out) {
  return guard([&] {
    check(rig && out, "rig and out must not be NULL");
    *out = rig->impl.content_hash();
  });
}

vxc_status vxc_model_load(const char* path, vxc_model** out) {
  return guard([&] {
    check(path && out, "path and out must not be NULL");
    *out = new vxc_model{voxcond::load_checkpoint(path)};
  });
}

void vxc_model_free(vxc_model* model) { delete model; }

vxc_status vxc_model_config(const vxc_model* model, char** json_out) {
  return guard([&] {
    check(model && json_out, "model and json_out must not be NULL");
    *json_out = dup_string(model->impl.config().to_json().dump());
  });
}

vxc_status vxc_model_param_count(const vxc_model* model, uint64_t* out) {
  return guard([&] {
    check(model && out, "model and out must not be NULL");
    uint64_t n = 0;
    for (const auto& name : model->impl.store().names)
      n += model->impl.store().p(name).numel();
    *out = n;
  });
}

vxc_status vxc_scene_generate(const char* config_json, const char* out_dir,
                              char** summary_json) {
  return guard([&] {
    check(config_json && out_dir, "config_json and out_dir must not be NULL");
    voxcond::SceneConfig cfg = voxcond::SceneConfig::from_json(config_json);
    voxcond::generate_scene_dir(cfg, out_dir);
    if (summary_json) {
      nlohmann::json summary = {{"frames", cfg.frames},
                                {"out", out_dir},
                                {"seed", cfg.seed}};
      *summary_json = dup_string(summary.dump());
    }
  });
}

vxc_status vxc_project(const char* scene_dir, const vxc_rig* rig,
                       const char* params_json, const char* out_dir,
                       char** summary_json) {
  return guard([&] {
    check(scene_dir && rig && out_dir,
          "scene_dir, rig, and out_dir must not be NULL");
    nlohmann::json j = parse_params(params_json);
    voxcond::ProjectParams p;
    p.d_max = field(j, "d_max", p.d_max);
    p.planes = field(j, "planes", p.planes);
    p.views = field(j, "views", p.views);
    p.jobs = field(j, "jobs", p.jobs);
    voxcond::ProjectResult r =
        voxcond::project_scene(scene_dir, rig->impl, p, out_dir);
    if (summary_json) {
      nlohmann::json rays = nlohmann::json::object();
      for (const auto& [view, rate] : r.rays_per_s) rays[view] = rate;
      nlohmann::json summary = {{"frames", r.frames},
                                {"rays_per_s", rays},
                                {"total_s", r.total_s},
                                {"views", r.views}};
      *summary_json = dup_string(summary.dump());
    }
  });
}

vxc_status vxc_train(const char* conditions_dir, const char* params_json,
                     const char* out_dir, char** summary_json) {
  return guard([&] {
    check(conditions_dir && out_dir,
          "conditions_dir and out_dir must not be NULL");
    nlohmann::json j = parse_params(params_json);
    voxcond::TrainRunParams p;
    if (j.contains("model"))
      p.model = voxcond::ToyConfig::from_json(j["model"]);
    p.train.steps = field(j, "steps", p.train.steps);
    p.train.lr = field(j, "lr", p.train.lr);
    p.train.gamma = field(j, "gamma", p.train.gamma);
    p.train.cond_dropout = field(j, "cond_dropout", p.train.cond_dropout);
    p.train.clean_max = field(j, "clean_max", p.train.clean_max);
    p.train.seed = field(j, "seed", p.train.seed);
    p.finetune_from = field(j, "finetune_from", p.finetune_from);
    voxcond::TrainStats stats = voxcond::train_to_dir(conditions_dir, out_dir, p);
    if (summary_json) {
      nlohmann::json summary = {{"final_loss", stats.final_loss},
                                {"initial_loss", stats.initial_loss},
                                {"steps", stats.steps}};
      *summary_json = dup_string(summary.dump());
    }
  });
}

vxc_status vxc_sample(const char* conditions_dir, const char* checkpoint_path,
                      const char* params_json, const char* out_dir,
                      char** summary_json) {
  return guard([&] {
    check(conditions_dir && checkpoint_path && out_dir,
          "conditions_dir, checkpoint_path, and out_dir must not be NULL");
    nlohmann::json j = parse_params(params_json);
    voxcond::SampleRunParams p;
    p.sample.steps = field(j, "steps", p.sample.steps);
    p.sample.guidance = field(j, "guidance", p.sample.guidance);
    p.sample.clean = field(j, "clean", p.sample.clean);
    p.sample.seed = field(j, "seed", p.sample.seed);
    p.clip = field(j, "clip", p.clip);
    voxcond::RegionMse r =
        voxcond::sample_to_dir(conditions_dir, checkpoint_path, out_dir, p);
    if (summary_json) {
      double se = r.fg * double(r.fg_count) + r.bg * double(r.bg_count);
      size_t n = r.fg_count + r.bg_count;
      nlohmann::json summary = {
          {"bg_mse", r.bg},
          {"fg_mse", r.fg},
          {"total_mse", n ? se / double(n) : 0.0}};
      *summary_json = dup_string(summary.dump());
    }
  });
}

vxc_status vxc_ablate(const char* train_dir, const char* holdout_dir,
                      const char* params_json, const char* out_dir,
                      char** summary_json) {
  return guard([&] {
    check(train_dir && holdout_dir && out_dir,
          "train_dir, holdout_dir, and out_dir must not be NULL");
    nlohmann::json j = parse_params(params_json);
    voxcond::AblateParams p;
    if (j.contains("model"))
      p.model = voxcond::ToyConfig::from_json(j["model"]);
    p.seeds = field(j, "seeds", p.seeds);
    p.seed0 = field(j, "seed0", p.seed0);
    p.base_steps = field(j, "base_steps", p.base_steps);
    p.finetune_steps = field(j, "finetune_steps", p.finetune_steps);
    p.sample_steps = field(j, "sample_steps", p.sample_steps);
    p.lr = field(j, "lr", p.lr);
    p.gamma_high = field(j, "gamma_high", p.gamma_high);
    p.guidance = field(j, "guidance", p.guidance);
    p.dropout = field(j, "dropout", p.dropout);
    p.clean = field(j, "clean", p.clean);
    nlohmann::json report =
        voxcond::ablate_run(train_dir, holdout_dir, out_dir, p);
    if (summary_json) *summary_json = dup_string(report.dump());
  });
}

}  // extern "C"
