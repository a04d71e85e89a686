#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "voxcond.h"

namespace {

int log_threshold() {
  const char* env = std::getenv("VOXCOND_LOG");
  std::string s = env ? env : "warn";
  if (s == "off") return 0;
  if (s == "error") return 1;
  if (s == "warn") return 2;
  if (s == "info") return 3;
  if (s == "debug") return 4;
  return 2;
}

void log_info(const std::string& msg) {
  static int threshold = log_threshold();
  if (threshold >= 3) std::fprintf(stderr, "[info] %s\n", msg.c_str());
}

int fail_status(vxc_status s) {
  std::fprintf(stderr, "error: %s: %s\n", vxc_status_name(s), vxc_last_error());
  bool config_error = s == VXC_E_INVALID_ARGUMENT || s == VXC_E_PARSE ||
                      s == VXC_E_INFEASIBLE_CONFIG;
  return config_error ? 2 : 1;
}

struct OwnedString {
  char* s = nullptr;
  ~OwnedString() { vxc_string_free(s); }
};

struct RigHandle {
  vxc_rig* rig = nullptr;
  ~RigHandle() { vxc_rig_free(rig); }
};

bool read_text_file(const std::string& path, std::string& out) {
  std::ifstream f(path, std::ios::binary);
  if (!f.good()) return false;
  std::ostringstream ss;
  ss << f.rdbuf();
  out = ss.str();
  return f.good() || f.eof();
}

int run_scene_gen(const std::string& config_path, const std::string& out_dir) {
  std::string config;
  if (!read_text_file(config_path, config)) {
    std::fprintf(stderr, "error: cannot read config: %s\n", config_path.c_str());
    return 2;
  }
  log_info("generating scene into " + out_dir);
  OwnedString summary;
  vxc_status s = vxc_scene_generate(config.c_str(), out_dir.c_str(), &summary.s);
  if (s != VXC_OK) return fail_status(s);
  std::printf("%s\n", summary.s);
  return 0;
}

int run_project(const std::string& scene_dir, const std::string& rig_path,
                double d_max, int planes, const std::vector<std::string>& views,
                int jobs, const std::string& out_dir) {
  RigHandle rig;
  vxc_status s = rig_path.empty()
                     ? vxc_rig_default(160, 96, &rig.rig)
                     : vxc_rig_load(rig_path.c_str(), &rig.rig);
  if (s != VXC_OK) return fail_status(s);

  nlohmann::json params = {{"d_max", d_max}, {"jobs", jobs}, {"planes", planes}};
  if (!views.empty()) params["views"] = views;
  log_info("projecting " + scene_dir + " into " + out_dir);
  OwnedString summary;
  s = vxc_project(scene_dir.c_str(), rig.rig, params.dump().c_str(),
                  out_dir.c_str(), &summary.s);
  if (s != VXC_OK) return fail_status(s);

  nlohmann::json j = nlohmann::json::parse(summary.s);
  for (const auto& [view, rate] : j["rays_per_s"].items())
    std::printf("%s: %.0f rays/s\n", view.c_str(), rate.get<double>());
  return 0;
}

int run_train(const std::string& cond_dir, const std::string& out_dir,
              const std::string& model_path, const std::string& finetune_from,
              int steps, double lr, double gamma, double dropout, int clean_max,
              uint64_t seed) {
  nlohmann::json params = {{"clean_max", clean_max}, {"cond_dropout", dropout},
                           {"gamma", gamma},         {"lr", lr},
                           {"seed", seed},           {"steps", steps}};
  if (!model_path.empty()) {
    std::string text;
    if (!read_text_file(model_path, text)) {
      std::fprintf(stderr, "error: cannot read model config: %s\n",
                   model_path.c_str());
      return 2;
    }
    nlohmann::json model = nlohmann::json::parse(text, nullptr, false);
    if (model.is_discarded()) {
      std::fprintf(stderr, "error: config parse error: %s\n", model_path.c_str());
      return 2;
    }
    params["model"] = model;
  }
  if (!finetune_from.empty()) params["finetune_from"] = finetune_from;
  log_info("training into " + out_dir);
  OwnedString summary;
  vxc_status s = vxc_train(cond_dir.c_str(), params.dump().c_str(),
                           out_dir.c_str(), &summary.s);
  if (s != VXC_OK) return fail_status(s);
  std::printf("%s\n", summary.s);
  return 0;
}

int run_sample(const std::string& cond_dir, const std::string& checkpoint,
               const std::string& out_dir, int steps, double guidance,
               int clean, int clip, uint64_t seed) {
  nlohmann::json params = {{"clean", clean},       {"clip", clip},
                           {"guidance", guidance}, {"seed", seed},
                           {"steps", steps}};
  log_info("sampling into " + out_dir);
  OwnedString summary;
  vxc_status s = vxc_sample(cond_dir.c_str(), checkpoint.c_str(),
                            params.dump().c_str(), out_dir.c_str(), &summary.s);
  if (s != VXC_OK) return fail_status(s);
  std::printf("%s\n", summary.s);
  return 0;
}

int run_ablate(const std::string& cond_dir, const std::string& holdout_dir,
               const std::string& out_dir, const std::string& model_path,
               int seeds, uint64_t seed0, int base_steps, int finetune_steps,
               int sample_steps, double lr, double gamma_high, double guidance,
               double dropout, int clean) {
  nlohmann::json params = {
      {"base_steps", base_steps}, {"clean", clean},
      {"dropout", dropout},       {"finetune_steps", finetune_steps},
      {"gamma_high", gamma_high}, {"guidance", guidance},
      {"lr", lr},                 {"sample_steps", sample_steps},
      {"seed0", seed0},           {"seeds", seeds}};
  if (!model_path.empty()) {
    std::string text;
    if (!read_text_file(model_path, text)) {
      std::fprintf(stderr, "error: cannot read model config: %s\n",
                   model_path.c_str());
      return 2;
    }
    nlohmann::json model = nlohmann::json::parse(text, nullptr, false);
    if (model.is_discarded()) {
      std::fprintf(stderr, "error: config parse error: %s\n", model_path.c_str());
      return 2;
    }
    params["model"] = model;
  }
  log_info("running ablation grid into " + out_dir);
  OwnedString summary;
  vxc_status s = vxc_ablate(cond_dir.c_str(), holdout_dir.c_str(),
                            params.dump().c_str(), out_dir.c_str(), &summary.s);
  if (s != VXC_OK) return fail_status(s);
  nlohmann::json report = nlohmann::json::parse(summary.s);
  for (const auto& [name, dir] : report["directions"].items())
    std::printf("%s: %s\n", name.c_str(),
                dir["majority"].get<bool>() ? "yes" : "no");
  std::printf("report: %s/report.json\n", out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic voxel grids, surround-view condition rendering, and "
               "a toy conditional denoiser pipeline"};
  app.set_version_flag("--version", vxc_version());
  app.require_subcommand(1);
  int rc = 0;

  auto* scene = app.add_subcommand("scene", "Scene utilities");
  scene->require_subcommand(1);
  auto* gen = scene->add_subcommand("gen", "Generate a synthetic scene");
  std::string gen_config, gen_out;
  gen->add_option("--config", gen_config, "Scene config JSON file")->required();
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->callback([&] { rc = run_scene_gen(gen_config, gen_out); });

  auto* project = app.add_subcommand(
      "project", "Render condition-stack images for every frame and view");
  std::string prj_scene, prj_rig, prj_out;
  double prj_dmax = 51.2;
  int prj_planes = 8, prj_jobs = 1;
  std::vector<std::string> prj_views;
  project->add_option("--scene", prj_scene, "Scene directory")->required();
  project->add_option("--rig", prj_rig, "Camera rig JSON (default: built-in rig)");
  project->add_option("--dmax", prj_dmax, "Ray range in meters");
  project->add_option("--planes", prj_planes, "MPI plane count");
  project->add_option("--views", prj_views, "Comma-separated view names")
      ->delimiter(',');
  project->add_option("--jobs", prj_jobs, "Parallel render jobs");
  project->add_option("--out", prj_out, "Output directory")->required();
  project->callback([&] {
    rc = run_project(prj_scene, prj_rig, prj_dmax, prj_planes, prj_views,
                     prj_jobs, prj_out);
  });

  auto* train = app.add_subcommand("train", "Train the toy denoiser");
  std::string tr_cond, tr_out, tr_model, tr_finetune;
  int tr_steps = 500, tr_clean = 1;
  double tr_lr = 0.05, tr_gamma = 2.0, tr_dropout = 0.1;
  uint64_t tr_seed = 7;
  train->add_option("--conditions", tr_cond, "Projected conditions directory")
      ->required();
  train->add_option("--out", tr_out, "Output directory")->required();
  train->add_option("--model", tr_model, "Model config JSON file");
  train->add_option("--finetune-from", tr_finetune,
                    "Checkpoint to fine-tune (adapter weights only)");
  train->add_option("--steps", tr_steps, "Training steps");
  train->add_option("--lr", tr_lr, "Learning rate");
  train->add_option("--gamma", tr_gamma, "Foreground loss weight");
  train->add_option("--dropout", tr_dropout, "Condition dropout probability");
  train->add_option("--clean-max", tr_clean, "Max clean conditioning frames");
  train->add_option("--seed", tr_seed, "Training seed");
  train->callback([&] {
    rc = run_train(tr_cond, tr_out, tr_model, tr_finetune, tr_steps, tr_lr,
                   tr_gamma, tr_dropout, tr_clean, tr_seed);
  });

  auto* sample = app.add_subcommand("sample", "Sample clips from a checkpoint");
  std::string sm_cond, sm_ckpt, sm_out;
  int sm_steps = 8, sm_clean = 1, sm_clip = 0;
  double sm_guidance = 2.0;
  uint64_t sm_seed = 11;
  sample->add_option("--conditions", sm_cond, "Projected conditions directory")
      ->required();
  sample->add_option("--checkpoint", sm_ckpt, "Model checkpoint")->required();
  sample->add_option("--out", sm_out, "Output directory")->required();
  sample->add_option("--steps", sm_steps, "Sampling steps");
  sample->add_option("--guidance", sm_guidance, "Guidance scale");
  sample->add_option("--clean", sm_clean, "Clean conditioning frames");
  sample->add_option("--clip", sm_clip, "Clip index");
  sample->add_option("--seed", sm_seed, "Sampling seed");
  sample->callback([&] {
    rc = run_sample(sm_cond, sm_ckpt, sm_out, sm_steps, sm_guidance, sm_clean,
                    sm_clip, sm_seed);
  });

  auto* ablate = app.add_subcommand(
      "ablate", "Run the loss/adapter/condition-group ablation grid");
  std::string ab_cond, ab_hold, ab_out, ab_model;
  int ab_seeds = 3, ab_base = 120, ab_ft = 60, ab_sample = 8, ab_clean = 1;
  uint64_t ab_seed0 = 100;
  double ab_lr = 0.05, ab_gamma = 2.0, ab_guidance = 2.0, ab_dropout = 0.1;
  ablate->add_option("--conditions", ab_cond, "Training conditions directory")
      ->required();
  ablate->add_option("--holdout", ab_hold, "Held-out conditions directory")
      ->required();
  ablate->add_option("--out", ab_out, "Output directory")->required();
  ablate->add_option("--model", ab_model, "Model config JSON file");
  ablate->add_option("--seeds", ab_seeds, "Paired seed count");
  ablate->add_option("--seed0", ab_seed0, "First seed");
  ablate->add_option("--base-steps", ab_base, "Base training steps per cell");
  ablate->add_option("--finetune-steps", ab_ft, "Adapter fine-tune steps");
  ablate->add_option("--sample-steps", ab_sample, "Evaluation sampling steps");
  ablate->add_option("--lr", ab_lr, "Learning rate");
  ablate->add_option("--gamma-high", ab_gamma, "High mask-loss weight");
  ablate->add_option("--guidance", ab_guidance, "Evaluation guidance scale");
  ablate->add_option("--dropout", ab_dropout, "Condition dropout probability");
  ablate->add_option("--clean", ab_clean, "Clean conditioning frames");
  ablate->callback([&] {
    rc = run_ablate(ab_cond, ab_hold, ab_out, ab_model, ab_seeds, ab_seed0,
                    ab_base, ab_ft, ab_sample, ab_lr, ab_gamma, ab_guidance,
                    ab_dropout, ab_clean);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return 2;
  }
  return rc;
}
