#ifndef VOXCOND_H
#define VOXCOND_H

/*
 * C API for the voxcond shared library: semantic voxel grids, surround-rig
 * condition rendering, and the toy conditional denoiser pipeline.
 *
 * Conventions:
 *  - Every fallible call returns vxc_status; VXC_OK is 0.
 *  - On failure, vxc_last_error() returns a thread-local message that stays
 *    valid until the next failing call on the same thread.
 *  - Strings returned through char** are heap-allocated; release them with
 *    vxc_string_free. Handles are released with their matching *_free.
 *  - Pipeline entry points take parameters as JSON text and write artifact
 *    directories with a manifest.json; they return a JSON summary string.
 */

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum vxc_status {
  VXC_OK = 0,
  VXC_E_INVALID_ARGUMENT = 1,
  VXC_E_BAD_MAGIC = 2,
  VXC_E_UNSUPPORTED_VERSION = 3,
  VXC_E_DIMENSION_OVERFLOW = 4,
  VXC_E_TRUNCATED_PAYLOAD = 5,
  VXC_E_LABEL_OUT_OF_RANGE = 6,
  VXC_E_IO = 7,
  VXC_E_PARSE = 8,
  VXC_E_INFEASIBLE_CONFIG = 9,
  VXC_E_SHAPE_MISMATCH = 10,
  VXC_E_DIVERGED = 11,
  VXC_E_INTERNAL = 12
} vxc_status;

typedef struct vxc_grid vxc_grid;
typedef struct vxc_rig vxc_rig;
typedef struct vxc_model vxc_model;

const char* vxc_version(void);
const char* vxc_status_name(vxc_status status);
const char* vxc_last_error(void);
void vxc_string_free(char* s);

/* Semantic voxel grids (.vxsg files). */
vxc_status vxc_grid_load(const char* path, vxc_grid** out);
vxc_status vxc_grid_save(const vxc_grid* grid, const char* path);
void vxc_grid_free(vxc_grid* grid);
vxc_status vxc_grid_dims(const vxc_grid* grid, int32_t dims[3]);
vxc_status vxc_grid_voxel_size(const vxc_grid* grid, double* out);
vxc_status vxc_grid_origin(const vxc_grid* grid, double origin[3]);
vxc_status vxc_grid_label_at(const vxc_grid* grid, int32_t x, int32_t y,
                             int32_t z, uint8_t* out);
vxc_status vxc_grid_content_hash(const vxc_grid* grid, uint64_t* out);

/* First solid hit along a unit-direction ray; *hit is 0 on miss (the other
 * outputs are then left untouched). Any output pointer may be NULL. */
vxc_status vxc_grid_first_hit(const vxc_grid* grid, const double origin[3],
                              const double direction[3], double d_max,
                              int32_t* hit, double* distance, uint8_t* label,
                              double point[3], int32_t voxel[3]);

/* Camera rigs (JSON files). */
vxc_status vxc_rig_default(int32_t width, int32_t height, vxc_rig** out);
vxc_status vxc_rig_load(const char* path, vxc_rig** out);
vxc_status vxc_rig_save(const vxc_rig* rig, const char* path);
void vxc_rig_free(vxc_rig* rig);
vxc_status vxc_rig_view_count(const vxc_rig* rig, int32_t* out);
vxc_status vxc_rig_view_name(const vxc_rig* rig, int32_t index, char** out);
vxc_status vxc_rig_content_hash(const vxc_rig* rig, uint64_t* out);

/* Denoiser checkpoints (.tdck files). */
vxc_status vxc_model_load(const char* path, vxc_model** out);
void vxc_model_free(vxc_model* model);
vxc_status vxc_model_config(const vxc_model* model, char** json_out);
vxc_status vxc_model_param_count(const vxc_model* model, uint64_t* out);

/*
 * Pipeline commands. params_json may be NULL or "{}" for defaults.
 *
 * scene_generate: config_json is the scene config; writes .vxsg frames,
 *   tracks.json, taxonomy.json, manifest.json.
 * project: params {"d_max","planes","views","jobs"}; writes the per-frame
 *   condition-stack image tree.
 * train: params {"model":{...},"steps","lr","gamma","cond_dropout",
 *   "clean_max","seed","finetune_from"}; writes checkpoint.tdck and
 *   train_log.jsonl.
 * sample: params {"steps","guidance","clean","seed","clip"}; writes
 *   sample.json and per-frame previews.
 * ablate: params {"model":{...},"seeds","seed0","base_steps",
 *   "finetune_steps","sample_steps","lr","gamma_high","guidance","dropout",
 *   "clean"}; writes report.json / report.md; summary is the full report.
 */
vxc_status vxc_scene_generate(const char* config_json, const char* out_dir,
                              char** summary_json);
vxc_status vxc_project(const char* scene_dir, const vxc_rig* rig,
                       const char* params_json, const char* out_dir,
                       char** summary_json);
vxc_status vxc_train(const char* conditions_dir, const char* params_json,
                     const char* out_dir, char** summary_json);
vxc_status vxc_sample(const char* conditions_dir, const char* checkpoint_path,
                      const char* params_json, const char* out_dir,
                      char** summary_json);
vxc_status vxc_ablate(const char* train_dir, const char* holdout_dir,
                      const char* params_json, const char* out_dir,
                      char** summary_json);

#ifdef __cplusplus
}
#endif

#endif /* VOXCOND_H */
