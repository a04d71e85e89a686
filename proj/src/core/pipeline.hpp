#pragma once

#include <map>
#include <string>
#include <vector>

#include "core/camera.hpp"
#include "core/conditions.hpp"
#include "core/scenegen.hpp"
#include "core/toydiff.hpp"
#include "json.hpp"

namespace voxcond {

/*
 * Artifact-directory plumbing. Every command writes exactly one
 * manifest.json into its output directory: config and input hashes, seeds,
 * tool version, artifact file hashes, and wall times. Everything except the
 * "timings" object is deterministic for equal inputs and seeds.
 */
uint64_t file_hash(const std::string& path);
uint64_t json_hash(const nlohmann::json& j);
nlohmann::json load_manifest(const std::string& dir);
void write_manifest(const std::string& dir, nlohmann::json manifest);
bool manifests_equivalent(const nlohmann::json& a, const nlohmann::json& b);

/* Scene frames + tracks + taxonomy + manifest. */
void generate_scene_dir(const SceneConfig& config, const std::string& out_dir);

struct ProjectParams {
  double d_max = kDefaultDMax;
  int planes = 8;
  std::vector<std::string> views;  // empty = every rig view
  int jobs = 1;
};

struct ProjectResult {
  int frames = 0;
  std::vector<std::string> views;
  std::map<std::string, double> rays_per_s;
  double total_s = 0.0;
};

/* Condition-stack image tree: out/frame_NNNN/{view}_*.{ppm,pgm} plus a
 * sidecar.json per frame and taxonomy.json + rig.json + manifest.json at
 * the root. Output bytes are independent of the job count. */
ProjectResult project_scene(const std::string& scene_dir, const CameraRig& rig,
                            const ProjectParams& p, const std::string& out_dir);

/* Non-overlapping windows of cfg.frames scene frames, the first cfg.views
 * views in sorted order, box-downsampled 4x to the model's latent size. */
std::vector<ClipData> load_clips(const std::string& cond_dir,
                                 const ToyConfig& cfg);

enum class ConditionGroup { All, SemDep, MpiCoord, None };
ConditionGroup condition_group_from_name(const std::string& name);
const char* condition_group_name(ConditionGroup g);
/* Zero every condition map outside the kept group (z0 and fg untouched). */
ClipData keep_condition_group(const ClipData& clip, ConditionGroup g);

struct TrainRunParams {
  ToyConfig model;
  TrainParams train;
  std::string finetune_from;  // checkpoint path; adapter-only updates when set
};

TrainStats train_to_dir(const std::string& cond_dir, const std::string& out_dir,
                        const TrainRunParams& p);

struct SampleRunParams {
  SampleParams sample;
  int clip = 0;
};

RegionMse sample_to_dir(const std::string& cond_dir,
                        const std::string& checkpoint,
                        const std::string& out_dir, const SampleRunParams& p);

struct AblateParams {
  int seeds = 3;
  uint64_t seed0 = 100;
  int base_steps = 120;
  int finetune_steps = 60;
  int sample_steps = 8;
  double lr = 0.05;
  double gamma_high = 2.0;
  double guidance = 2.0;
  double dropout = 0.1;
  int clean = 1;
  ToyConfig model;
};

/* Grid of {gamma 0, gamma high} x {adapter off/on} x {semdep, mpicoor}
 * plus an unconditioned baseline, each over paired seeds. The adapter-on
 * cell fine-tunes the matching adapter-off base model with frozen
 * base/control weights. Emits report.json + report.md. */
nlohmann::json ablate_run(const std::string& train_dir,
                          const std::string& holdout_dir,
                          const std::string& out_dir, const AblateParams& p);

}  // namespace voxcond
