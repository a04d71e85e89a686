#include "core/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <mutex>
#include <thread>

#include "core/bytes.hpp"
#include "core/fnv.hpp"
#include "core/version.hpp"

namespace fs = std::filesystem;

namespace voxcond {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

std::string frame_dirname(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%04d", index);
  return buf;
}

nlohmann::json strip_timings(nlohmann::json j) {
  j.erase("timings");
  return j;
}

}  // namespace

uint64_t file_hash(const std::string& path) {
  auto bytes = read_file_bytes(path);
  return fnv1a64(bytes.data(), bytes.size());
}

uint64_t json_hash(const nlohmann::json& j) {
  std::string s = j.dump();
  return fnv1a64(s.data(), s.size());
}

nlohmann::json load_manifest(const std::string& dir) {
  std::string text = read_file_text((fs::path(dir) / "manifest.json").string());
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError,
         std::string("manifest parse error: ") + e.what());
  }
}

void write_manifest(const std::string& dir, nlohmann::json manifest) {
  manifest["tool_version"] = kToolVersion;
  write_file_text((fs::path(dir) / "manifest.json").string(),
                  manifest.dump(2) + "\n");
}

bool manifests_equivalent(const nlohmann::json& a, const nlohmann::json& b) {
  return strip_timings(a) == strip_timings(b);
}

void generate_scene_dir(const SceneConfig& config, const std::string& out_dir) {
  auto t0 = std::chrono::steady_clock::now();
  TemporalScene scene = generate_scene(config);
  fs::create_directories(out_dir);
  save_scene(scene, out_dir);

  std::vector<std::string> files;
  for (int i = 0; i < config.frames; ++i) files.push_back(frame_filename(i));
  files.push_back("taxonomy.json");
  files.push_back("tracks.json");

  nlohmann::json artifacts = nlohmann::json::object();
  for (const auto& f : files)
    artifacts[f] = hash_hex(file_hash((fs::path(out_dir) / f).string()));

  nlohmann::json cfg = nlohmann::json::parse(config.to_json());
  nlohmann::json manifest = {
      {"command", "scene gen"},
      {"config", cfg},
      {"hashes", {{"scene_config", hash_hex(json_hash(cfg))}}},
      {"artifacts", artifacts},
      {"seeds", {{"scene", config.seed}}},
      {"timings", {{"total_s", seconds_since(t0)}}}};
  write_manifest(out_dir, manifest);
}

ProjectResult project_scene(const std::string& scene_dir, const CameraRig& rig,
                            const ProjectParams& p, const std::string& out_dir) {
  auto t0 = std::chrono::steady_clock::now();
  ConditionParams cp;
  cp.d_max = p.d_max;
  cp.planes = p.planes;
  cp.validate();
  require(p.jobs >= 1, ErrorCode::InvalidArgument, "jobs must be positive");

  TemporalScene scene = load_scene(scene_dir);
  nlohmann::json scene_manifest = load_manifest(scene_dir);
  for (int i = 0; i < int(scene.frames.size()); ++i) {
    std::string name = frame_filename(i);
    std::string stored = scene_manifest["artifacts"].value(name, std::string());
    require(stored == hash_hex(scene.frames[size_t(i)].content_hash()),
            ErrorCode::ParseError, "grid hash mismatch against manifest: " + name);
  }

  std::vector<std::string> views = p.views;
  if (views.empty())
    for (const auto& v : rig.views) views.push_back(v.name);
  std::sort(views.begin(), views.end());
  for (const auto& v : views) rig.view(v);
  require(!scene.frames.empty(), ErrorCode::InvalidArgument, "scene has no frames");

  const int frames = int(scene.frames.size());
  const Intrinsics& intr0 = rig.view(views[0]).intrinsics;

  fs::create_directories(out_dir);
  for (int i = 0; i < frames; ++i)
    fs::create_directories(fs::path(out_dir) / frame_dirname(i));

  struct Task {
    int frame;
    int view;
  };
  std::vector<Task> tasks;
  for (int f = 0; f < frames; ++f)
    for (int v = 0; v < int(views.size()); ++v) tasks.push_back({f, v});

  std::vector<double> task_seconds(tasks.size(), 0.0);
  std::atomic<size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::atomic<bool> stop{false};

  auto worker = [&]() {
    while (!stop.load()) {
      size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      try {
        const Task& t = tasks[i];
        const CameraView& cam = rig.view(views[size_t(t.view)]);
        auto s0 = std::chrono::steady_clock::now();
        ConditionStack stack = render_stack(scene.frames[size_t(t.frame)],
                                            cam.intrinsics, cam.extrinsics, cp);
        task_seconds[i] = seconds_since(s0);
        write_stack((fs::path(out_dir) / frame_dirname(t.frame)).string(),
                    cam.name, stack, scene.frames[size_t(t.frame)].taxonomy());
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        stop.store(true);
        return;
      }
    }
  };

  int jobs = std::min<int>(p.jobs, int(tasks.size()));
  std::vector<std::thread> pool;
  for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);

  std::string rig_hex = hash_hex(rig.content_hash());
  for (int f = 0; f < frames; ++f) {
    nlohmann::json sidecar = {
        {"d_max", cp.d_max},
        {"frame", f},
        {"grid_hash", hash_hex(scene.frames[size_t(f)].content_hash())},
        {"planes", cp.planes},
        {"rig_hash", rig_hex}};
    write_file_text(
        (fs::path(out_dir) / frame_dirname(f) / "sidecar.json").string(),
        sidecar.dump(2) + "\n");
  }
  write_file_text((fs::path(out_dir) / "taxonomy.json").string(),
                  scene.frames[0].taxonomy().to_json());
  write_file_text((fs::path(out_dir) / "rig.json").string(), rig.to_json());

  std::vector<std::string> rel_files = {"rig.json", "taxonomy.json"};
  for (int f = 0; f < frames; ++f) {
    std::string d = frame_dirname(f);
    rel_files.push_back(d + "/sidecar.json");
    for (const auto& v : views)
      for (const auto& name : stack_filenames(v, cp.planes))
        rel_files.push_back(d + "/" + name);
  }
  nlohmann::json artifacts = nlohmann::json::object();
  for (const auto& f : rel_files)
    artifacts[f] = hash_hex(file_hash((fs::path(out_dir) / f).string()));

  ProjectResult result;
  result.frames = frames;
  result.views = views;
  const double rays_per_task = double(intr0.width) * double(intr0.height);
  nlohmann::json throughput = nlohmann::json::object();
  for (int v = 0; v < int(views.size()); ++v) {
    double secs = 0;
    for (size_t i = 0; i < tasks.size(); ++i)
      if (tasks[i].view == v) secs += task_seconds[i];
    double rate = secs > 0 ? rays_per_task * frames / secs : 0.0;
    result.rays_per_s[views[size_t(v)]] = rate;
    throughput[views[size_t(v)]] = rate;
  }
  result.total_s = seconds_since(t0);

  nlohmann::json manifest = {
      {"command", "project"},
      {"config",
       {{"d_max", cp.d_max},
        {"frames", frames},
        {"height", intr0.height},
        {"planes", cp.planes},
        {"views", views},
        {"width", intr0.width}}},
      {"hashes",
       {{"rig", rig_hex},
        {"scene_config", scene_manifest["hashes"]["scene_config"]}}},
      {"artifacts", artifacts},
      {"seeds", nlohmann::json::object()},
      {"timings",
       {{"rays_per_s", throughput}, {"total_s", result.total_s}}}};
  write_manifest(out_dir, manifest);
  return result;
}

namespace {

/* 4x box downsample of one condition stack into flattened latent frame f.
 * Continuous maps average; the mask takes the block majority; MPI planes
 * take the center sample of each block. */
void fill_latent_frame(ClipData& clip, int f, const ConditionStack& s,
                       int lh, int lw, int planes) {
  constexpr int D = 4;
  for (int y = 0; y < lh; ++y)
    for (int x = 0; x < lw; ++x) {
      double r = 0, g = 0, b = 0, d = 0, c0 = 0, c1 = 0, c2 = 0, m = 0;
      for (int dy = 0; dy < D; ++dy)
        for (int dx = 0; dx < D; ++dx) {
          int px = x * D + dx, py = y * D + dy;
          const Rgb8& c = s.semantic.at(px, py);
          r += c[0] / 255.0;
          g += c[1] / 255.0;
          b += c[2] / 255.0;
          d += double(s.depth.at(px, py));
          const auto& cc = s.coordinate.at(px, py);
          c0 += double(cc[0]);
          c1 += double(cc[1]);
          c2 += double(cc[2]);
          m += s.mask.at(px, py) > 0 ? 1.0 : 0.0;
        }
      const double n = double(D) * double(D);
      r /= n; g /= n; b /= n; d /= n; c0 /= n; c1 /= n; c2 /= n;
      double mm = m / n > 0.5 ? 1.0 : 0.0;

      clip.semdep.at4(f, 0, y, x) = r;
      clip.semdep.at4(f, 1, y, x) = g;
      clip.semdep.at4(f, 2, y, x) = b;
      clip.semdep.at4(f, 3, y, x) = d;
      clip.coord.at4(f, 0, y, x) = c0;
      clip.coord.at4(f, 1, y, x) = c1;
      clip.coord.at4(f, 2, y, x) = c2;
      clip.fg.at4(f, 0, y, x) = mm;
      for (int p = 0; p < planes; ++p)
        clip.mpi.at4(f, p, y, x) =
            double(s.mpi[size_t(p)].at(x * D + D / 2, y * D + D / 2)) / 255.0;

      const double vals[kLatentChannels] = {r, g, b, d, c0, c1, c2, mm};
      for (int ch = 0; ch < kLatentChannels; ++ch)
        clip.z0.at4(f, ch, y, x) = 2.0 * vals[ch] - 1.0;
    }
}

}  // namespace

std::vector<ClipData> load_clips(const std::string& cond_dir,
                                 const ToyConfig& cfg) {
  cfg.validate();
  nlohmann::json manifest = load_manifest(cond_dir);
  nlohmann::json c;
  int frames = 0, width = 0, height = 0, planes = 0;
  std::vector<std::string> views;
  try {
    c = manifest.at("config");
    frames = c.at("frames").get<int>();
    width = c.at("width").get<int>();
    height = c.at("height").get<int>();
    planes = c.at("planes").get<int>();
    views = c.at("views").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError,
         std::string("manifest parse error: ") + e.what());
  }
  require(planes == cfg.planes, ErrorCode::InvalidArgument,
          "projected planes do not match the model config");
  require(width == 4 * cfg.latent_w && height == 4 * cfg.latent_h,
          ErrorCode::InvalidArgument,
          "projected image size does not match the model latent size");
  require(int(views.size()) >= cfg.views, ErrorCode::InvalidArgument,
          "not enough views in the projected tree");
  require(frames >= cfg.frames, ErrorCode::InvalidArgument,
          "not enough frames in the projected tree");
  views.resize(size_t(cfg.views));

  LabelTaxonomy tax = LabelTaxonomy::from_json(
      read_file_text((fs::path(cond_dir) / "taxonomy.json").string()));

  const int F = cfg.clip_frames();
  const int n_clips = frames / cfg.frames;
  std::vector<ClipData> clips;
  for (int ci = 0; ci < n_clips; ++ci) {
    ClipData clip;
    clip.z0 = Tensor({F, kLatentChannels, cfg.latent_h, cfg.latent_w});
    clip.semdep = Tensor({F, 4, cfg.latent_h, cfg.latent_w});
    clip.coord = Tensor({F, 3, cfg.latent_h, cfg.latent_w});
    clip.mpi = Tensor({F, cfg.planes, cfg.latent_h, cfg.latent_w});
    clip.fg = Tensor({F, 1, cfg.latent_h, cfg.latent_w});
    for (int ti = 0; ti < cfg.frames; ++ti) {
      std::string frame_dir =
          (fs::path(cond_dir) / frame_dirname(ci * cfg.frames + ti)).string();
      for (int vi = 0; vi < cfg.views; ++vi) {
        ConditionStack s =
            read_stack(frame_dir, views[size_t(vi)], cfg.planes, tax);
        require(s.semantic.width == width && s.semantic.height == height,
                ErrorCode::ShapeMismatch, "stack size mismatch");
        fill_latent_frame(clip, ti * cfg.views + vi, s, cfg.latent_h,
                          cfg.latent_w, cfg.planes);
      }
    }
    clips.push_back(std::move(clip));
  }
  return clips;
}

ConditionGroup condition_group_from_name(const std::string& name) {
  if (name == "all") return ConditionGroup::All;
  if (name == "semdep") return ConditionGroup::SemDep;
  if (name == "mpicoor") return ConditionGroup::MpiCoord;
  if (name == "none") return ConditionGroup::None;
  fail(ErrorCode::InvalidArgument, "unknown condition group: " + name);
}

const char* condition_group_name(ConditionGroup g) {
  switch (g) {
    case ConditionGroup::All: return "all";
    case ConditionGroup::SemDep: return "semdep";
    case ConditionGroup::MpiCoord: return "mpicoor";
    case ConditionGroup::None: return "none";
  }
  fail(ErrorCode::Internal, "bad condition group");
}

ClipData keep_condition_group(const ClipData& clip, ConditionGroup g) {
  ClipData out = clip;
  auto zero = [](Tensor& t) { std::fill(t.data.begin(), t.data.end(), 0.0); };
  if (g == ConditionGroup::MpiCoord || g == ConditionGroup::None)
    zero(out.semdep);
  if (g == ConditionGroup::SemDep || g == ConditionGroup::None) {
    zero(out.coord);
    zero(out.mpi);
  }
  return out;
}

TrainStats train_to_dir(const std::string& cond_dir, const std::string& out_dir,
                        const TrainRunParams& p) {
  auto t0 = std::chrono::steady_clock::now();
  fs::create_directories(out_dir);
  const bool finetune = !p.finetune_from.empty();

  ToyModel model = finetune ? load_checkpoint(p.finetune_from)
                            : ToyModel(p.model);
  std::vector<ClipData> clips = load_clips(cond_dir, model.config());

  TrainParams tp = p.train;
  tp.log_path = (fs::path(out_dir) / "train_log.jsonl").string();
  uint64_t frozen_before = 0;
  if (finetune) {
    model.set_adapter_enabled(true);
    tp.trainable = ToyModel::adapter_param;
    frozen_before = model.frozen_checksum();
  }
  TrainStats stats = train(model, clips, tp);
  if (finetune)
    require(model.frozen_checksum() == frozen_before, ErrorCode::Internal,
            "frozen weights changed during adapter fine-tune");
  save_checkpoint(model, (fs::path(out_dir) / "checkpoint.tdck").string());

  nlohmann::json model_cfg = model.config().to_json();
  nlohmann::json artifacts = nlohmann::json::object();
  for (const char* f : {"checkpoint.tdck", "train_log.jsonl"})
    artifacts[f] = hash_hex(file_hash((fs::path(out_dir) / f).string()));

  nlohmann::json hashes = {
      {"conditions_manifest",
       hash_hex(json_hash(strip_timings(load_manifest(cond_dir))))},
      {"model_config", hash_hex(json_hash(model_cfg))}};
  if (finetune) hashes["finetune_from"] = hash_hex(file_hash(p.finetune_from));

  nlohmann::json manifest = {
      {"command", "train"},
      {"config",
       {{"clean_max", tp.clean_max},
        {"cond_dropout", tp.cond_dropout},
        {"finetune", finetune},
        {"gamma", tp.gamma},
        {"lr", tp.lr},
        {"model", model_cfg},
        {"steps", tp.steps}}},
      {"hashes", hashes},
      {"artifacts", artifacts},
      {"seeds", {{"model", model.config().seed}, {"train", tp.seed}}},
      {"stats",
       {{"final_loss", stats.final_loss}, {"initial_loss", stats.initial_loss}}},
      {"timings", {{"total_s", seconds_since(t0)}}}};
  write_manifest(out_dir, manifest);
  return stats;
}

RegionMse sample_to_dir(const std::string& cond_dir,
                        const std::string& checkpoint,
                        const std::string& out_dir, const SampleRunParams& p) {
  auto t0 = std::chrono::steady_clock::now();
  fs::create_directories(out_dir);
  ToyModel model = load_checkpoint(checkpoint);
  std::vector<ClipData> clips = load_clips(cond_dir, model.config());
  require(p.clip >= 0 && p.clip < int(clips.size()), ErrorCode::InvalidArgument,
          "clip index out of range");
  const ClipData& clip = clips[size_t(p.clip)];

  Tensor z = sample(model, clip, p.sample);
  RegionMse r = mse_by_region(z, clip, p.sample.clean, model.config().views);

  nlohmann::json sample_json = {
      {"clip", p.clip}, {"data", z.data}, {"shape", z.shape}};
  write_file_text((fs::path(out_dir) / "sample.json").string(),
                  sample_json.dump() + "\n");

  std::vector<std::string> files = {"sample.json"};
  const int F = z.dim(0), h = z.dim(2), w = z.dim(3);
  for (int f = 0; f < F; ++f) {
    ImageRgb8 img(w, h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int ch = 0; ch < 3; ++ch) {
          double v = (z.at4(f, ch, y, x) + 1.0) / 2.0;
          v = std::min(1.0, std::max(0.0, v));
          img.at(x, y)[size_t(ch)] = uint8_t(std::lround(v * 255.0));
        }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "frame_%02d_rgb.ppm", f);
    write_ppm8((fs::path(out_dir) / buf).string(), img);
    files.push_back(buf);
  }

  nlohmann::json artifacts = nlohmann::json::object();
  for (const auto& f : files)
    artifacts[f] = hash_hex(file_hash((fs::path(out_dir) / f).string()));

  double total_se = r.fg * double(r.fg_count) + r.bg * double(r.bg_count);
  size_t total_n = r.fg_count + r.bg_count;
  nlohmann::json manifest = {
      {"command", "sample"},
      {"config",
       {{"clean", p.sample.clean},
        {"clip", p.clip},
        {"guidance", p.sample.guidance},
        {"steps", p.sample.steps}}},
      {"hashes",
       {{"checkpoint", hash_hex(file_hash(checkpoint))},
        {"conditions_manifest",
         hash_hex(json_hash(strip_timings(load_manifest(cond_dir))))},
        {"model_config", hash_hex(json_hash(model.config().to_json()))}}},
      {"artifacts", artifacts},
      {"seeds", {{"sample", p.sample.seed}}},
      {"stats",
       {{"bg_mse", r.bg},
        {"fg_mse", r.fg},
        {"total_mse", total_n ? total_se / double(total_n) : 0.0}}},
      {"timings", {{"total_s", seconds_since(t0)}}}};
  write_manifest(out_dir, manifest);
  return r;
}

namespace {

struct MseAgg {
  double fg_se = 0, bg_se = 0;
  size_t fg_n = 0, bg_n = 0;

  void add(const RegionMse& r) {
    fg_se += r.fg * double(r.fg_count);
    bg_se += r.bg * double(r.bg_count);
    fg_n += r.fg_count;
    bg_n += r.bg_count;
  }
  double fg() const { return fg_n ? fg_se / double(fg_n) : 0.0; }
  double bg() const { return bg_n ? bg_se / double(bg_n) : 0.0; }
  double total() const {
    size_t n = fg_n + bg_n;
    return n ? (fg_se + bg_se) / double(n) : 0.0;
  }
};

std::string gamma_tag(double gamma) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "g%g", gamma);
  return buf;
}

bool majority(const std::vector<bool>& v) {
  size_t yes = 0;
  for (bool b : v) yes += b ? 1 : 0;
  return 2 * yes > v.size();
}

}  // namespace

nlohmann::json ablate_run(const std::string& train_dir,
                          const std::string& holdout_dir,
                          const std::string& out_dir, const AblateParams& p) {
  auto t0 = std::chrono::steady_clock::now();
  require(p.seeds >= 1, ErrorCode::InvalidArgument, "need at least one seed");
  fs::create_directories(fs::path(out_dir) / "logs");

  ToyConfig probe = p.model;
  std::vector<ClipData> train_all = load_clips(train_dir, probe);
  std::vector<ClipData> hold_all = load_clips(holdout_dir, probe);

  auto restricted = [&](const std::vector<ClipData>& src, ConditionGroup g) {
    std::vector<ClipData> out;
    out.reserve(src.size());
    for (const auto& c : src) out.push_back(keep_condition_group(c, g));
    return out;
  };

  auto eval_model = [&](const ToyModel& m, const std::vector<ClipData>& hold,
                        uint64_t eval_seed) {
    MseAgg agg;
    for (size_t i = 0; i < hold.size(); ++i) {
      SampleParams sp;
      sp.steps = p.sample_steps;
      sp.guidance = p.guidance;
      sp.clean = p.clean;
      sp.seed = eval_seed + i;
      Tensor z = sample(m, hold[i], sp);
      agg.add(mse_by_region(z, hold[i], p.clean, m.config().views));
    }
    return agg;
  };

  const std::vector<double> gammas = {0.0, p.gamma_high};
  const std::vector<ConditionGroup> groups = {ConditionGroup::SemDep,
                                              ConditionGroup::MpiCoord};

  struct CellKey {
    double gamma;
    ConditionGroup group;
    bool adapter;
  };
  std::vector<CellKey> cell_keys;
  for (double g : gammas)
    for (ConditionGroup gr : groups)
      for (bool ad : {false, true}) cell_keys.push_back({g, gr, ad});

  auto cell_name = [&](const CellKey& k) {
    return gamma_tag(k.gamma) + "_" + condition_group_name(k.group) + "_" +
           (k.adapter ? "adapter" : "plain");
  };

  std::map<std::string, nlohmann::json> cell_seeds;
  std::vector<nlohmann::json> baseline_seeds;
  std::vector<std::string> log_files;

  for (int si = 0; si < p.seeds; ++si) {
    const uint64_t seed = p.seed0 + uint64_t(si);
    for (double gamma : gammas)
      for (ConditionGroup group : groups) {
        auto clips_t = restricted(train_all, group);
        auto clips_h = restricted(hold_all, group);

        ToyConfig mc = p.model;
        mc.seed = seed;
        mc.adapter = false;
        ToyModel base(mc);

        CellKey plain_key{gamma, group, false};
        std::string plain_log = "logs/" + cell_name(plain_key) + "_s" +
                                std::to_string(seed) + ".jsonl";
        TrainParams tp;
        tp.steps = p.base_steps;
        tp.lr = p.lr;
        tp.gamma = gamma;
        tp.cond_dropout = p.dropout;
        tp.clean_max = std::min(p.clean, p.model.frames - 1);
        tp.seed = seed + 1;
        tp.log_path = (fs::path(out_dir) / plain_log).string();
        TrainStats base_stats = train(base, clips_t, tp);
        log_files.push_back(plain_log);

        MseAgg plain = eval_model(base, clips_h, seed + 3);
        cell_seeds[cell_name(plain_key)].push_back(
            {{"base_final", base_stats.final_loss},
             {"base_initial", base_stats.initial_loss},
             {"bg_mse", plain.bg()},
             {"fg_mse", plain.fg()},
             {"seed", seed},
             {"total_mse", plain.total()}});

        CellKey adapter_key{gamma, group, true};
        std::string ft_log = "logs/" + cell_name(adapter_key) + "_s" +
                             std::to_string(seed) + ".jsonl";
        ToyModel tuned = base;
        tuned.set_adapter_enabled(true);
        TrainParams fp = tp;
        fp.steps = p.finetune_steps;
        fp.seed = seed + 2;
        fp.log_path = (fs::path(out_dir) / ft_log).string();
        fp.trainable = ToyModel::adapter_param;
        uint64_t frozen = tuned.frozen_checksum();
        TrainStats ft_stats = train(tuned, clips_t, fp);
        require(tuned.frozen_checksum() == frozen, ErrorCode::Internal,
                "frozen weights changed during adapter fine-tune");
        log_files.push_back(ft_log);

        MseAgg tuned_mse = eval_model(tuned, clips_h, seed + 3);
        cell_seeds[cell_name(adapter_key)].push_back(
            {{"base_final", base_stats.final_loss},
             {"base_initial", base_stats.initial_loss},
             {"bg_mse", tuned_mse.bg()},
             {"fg_mse", tuned_mse.fg()},
             {"finetune_final", ft_stats.final_loss},
             {"seed", seed},
             {"total_mse", tuned_mse.total()}});
      }

    auto clips_t0 = restricted(train_all, ConditionGroup::None);
    auto clips_h0 = restricted(hold_all, ConditionGroup::None);
    ToyConfig mc = p.model;
    mc.seed = seed;
    mc.adapter = false;
    ToyModel base(mc);
    std::string log = "logs/baseline_s" + std::to_string(seed) + ".jsonl";
    TrainParams tp;
    tp.steps = p.base_steps;
    tp.lr = p.lr;
    tp.gamma = 0.0;
    tp.cond_dropout = p.dropout;
    tp.clean_max = std::min(p.clean, p.model.frames - 1);
    tp.seed = seed + 1;
    tp.log_path = (fs::path(out_dir) / log).string();
    TrainStats stats = train(base, clips_t0, tp);
    log_files.push_back(log);
    MseAgg mse = eval_model(base, clips_h0, seed + 3);
    baseline_seeds.push_back({{"base_final", stats.final_loss},
                              {"base_initial", stats.initial_loss},
                              {"bg_mse", mse.bg()},
                              {"fg_mse", mse.fg()},
                              {"seed", seed},
                              {"total_mse", mse.total()}});
  }

  /* Direction probes, paired by seed across matched cells. */
  auto seed_mean = [&](int si, auto pick, const char* field) {
    double sum = 0;
    int n = 0;
    for (const CellKey& k : cell_keys) {
      if (!pick(k)) continue;
      sum += cell_seeds[cell_name(k)][size_t(si)][field].template get<double>();
      ++n;
    }
    return sum / double(n);
  };

  std::vector<bool> gamma_dir, adapter_dir, semdep_dir, mpicoor_dir;
  for (int si = 0; si < p.seeds; ++si) {
    double fg_high = seed_mean(si, [&](const CellKey& k) {
      return k.gamma == p.gamma_high;
    }, "fg_mse");
    double fg_zero = seed_mean(si, [&](const CellKey& k) {
      return k.gamma == 0.0;
    }, "fg_mse");
    gamma_dir.push_back(fg_high < fg_zero);

    double on = seed_mean(si, [](const CellKey& k) { return k.adapter; },
                          "total_mse");
    double off = seed_mean(si, [](const CellKey& k) { return !k.adapter; },
                           "total_mse");
    adapter_dir.push_back(on <= off);

    double bl = baseline_seeds[size_t(si)]["total_mse"].get<double>();
    double sd = seed_mean(si, [](const CellKey& k) {
      return k.group == ConditionGroup::SemDep;
    }, "total_mse");
    double mc = seed_mean(si, [](const CellKey& k) {
      return k.group == ConditionGroup::MpiCoord;
    }, "total_mse");
    semdep_dir.push_back(sd < bl);
    mpicoor_dir.push_back(mc < bl);
  }

  auto dir_json = [](const std::vector<bool>& v) {
    return nlohmann::json{{"majority", majority(v)}, {"per_seed", v}};
  };

  nlohmann::json cells = nlohmann::json::array();
  for (const CellKey& k : cell_keys)
    cells.push_back({{"adapter", k.adapter},
                     {"gamma", k.gamma},
                     {"group", condition_group_name(k.group)},
                     {"name", cell_name(k)},
                     {"seeds", cell_seeds[cell_name(k)]}});

  std::vector<uint64_t> seed_list;
  for (int si = 0; si < p.seeds; ++si) seed_list.push_back(p.seed0 + uint64_t(si));

  nlohmann::json report = {
      {"baseline", {{"name", "baseline"}, {"seeds", baseline_seeds}}},
      {"cells", cells},
      {"config",
       {{"base_steps", p.base_steps},
        {"clean", p.clean},
        {"dropout", p.dropout},
        {"finetune_steps", p.finetune_steps},
        {"gamma_high", p.gamma_high},
        {"guidance", p.guidance},
        {"lr", p.lr},
        {"model", p.model.to_json()},
        {"sample_steps", p.sample_steps},
        {"seed0", p.seed0},
        {"seeds", p.seeds}}},
      {"directions",
       {{"adapter_total_non_increasing", dir_json(adapter_dir)},
        {"gamma_fg_lower", dir_json(gamma_dir)},
        {"mpicoor_beats_baseline", dir_json(mpicoor_dir)},
        {"semdep_beats_baseline", dir_json(semdep_dir)}}},
      {"seeds", seed_list}};

  write_file_text((fs::path(out_dir) / "report.json").string(),
                  report.dump(2) + "\n");

  std::string md = "# Ablation report\n\n";
  md += "Paired runs over seeds {";
  for (size_t i = 0; i < seed_list.size(); ++i)
    md += (i ? ", " : "") + std::to_string(seed_list[i]);
  md += "}; held-out reconstruction MSE in latent space.\n\n";
  md += "| cell | gamma | group | adapter | seed | fg_mse | bg_mse | total_mse |\n";
  md += "|---|---|---|---|---|---|---|---|\n";
  auto md_row = [&](const nlohmann::json& cell) {
    for (const auto& s : cell["seeds"]) {
      char buf[256];
      std::snprintf(buf, sizeof(buf),
                    "| %s | %g | %s | %s | %llu | %.6f | %.6f | %.6f |\n",
                    cell["name"].get<std::string>().c_str(),
                    cell.value("gamma", 0.0),
                    cell.value("group", std::string("none")).c_str(),
                    cell.value("adapter", false) ? "on" : "off",
                    static_cast<unsigned long long>(s["seed"].get<uint64_t>()),
                    s["fg_mse"].get<double>(), s["bg_mse"].get<double>(),
                    s["total_mse"].get<double>());
      md += buf;
    }
  };
  for (const auto& cell : cells) md_row(cell);
  md_row(report["baseline"]);
  md += "\n## Directions (majority over seeds)\n\n";
  auto md_dir = [&](const char* label, const nlohmann::json& d) {
    md += std::string("- ") + label + ": " +
          (d["majority"].get<bool>() ? "yes" : "no") + " (per seed:";
    for (const auto& b : d["per_seed"]) md += b.get<bool>() ? " yes" : " no";
    md += ")\n";
  };
  md_dir("foreground error lower with the weighted mask loss",
         report["directions"]["gamma_fg_lower"]);
  md_dir("held-out error non-increasing with the adapter",
         report["directions"]["adapter_total_non_increasing"]);
  md_dir("semantic+depth conditioning beats the unconditioned baseline",
         report["directions"]["semdep_beats_baseline"]);
  md_dir("mpi+coordinate conditioning beats the unconditioned baseline",
         report["directions"]["mpicoor_beats_baseline"]);
  write_file_text((fs::path(out_dir) / "report.md").string(), md);

  std::vector<std::string> files = {"report.json", "report.md"};
  files.insert(files.end(), log_files.begin(), log_files.end());
  nlohmann::json artifacts = nlohmann::json::object();
  for (const auto& f : files)
    artifacts[f] = hash_hex(file_hash((fs::path(out_dir) / f).string()));

  nlohmann::json manifest = {
      {"command", "ablate"},
      {"config", report["config"]},
      {"hashes",
       {{"holdout_manifest",
         hash_hex(json_hash(strip_timings(load_manifest(holdout_dir))))},
        {"model_config", hash_hex(json_hash(p.model.to_json()))},
        {"train_manifest",
         hash_hex(json_hash(strip_timings(load_manifest(train_dir))))}}},
      {"artifacts", artifacts},
      {"seeds", {{"seed0", p.seed0}, {"seeds", p.seeds}}},
      {"timings", {{"total_s", seconds_since(t0)}}}};
  write_manifest(out_dir, manifest);
  return report;
}

}  // namespace voxcond
