// p23d: points-to-3D structural pipeline CLI.
//
// Subcommands compose the library operations end to end: surface sampling,
// depth-consistency visibility, voxelization, dataset construction, training
// of the occupancy autoencoder and the inpainting network, staged generation,
// prior repair, geometric evaluation, and the inpaint/refine schedule sweep.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "p23d/config.hpp"
#include "p23d/dataset.hpp"
#include "p23d/error.hpp"
#include "p23d/metrics.hpp"
#include "p23d/sampler.hpp"
#include "p23d/train.hpp"

namespace {

using namespace p23d;
using num::Tensor;

std::string fmt9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

LatentConfig latent_config(const Config& cfg) {
  LatentConfig lc;
  lc.n = cfg.n;
  lc.r = cfg.r;
  lc.c_s = cfg.c_s;
  lc.c_m = cfg.c_m;
  lc.vae_hidden = cfg.vae_hidden;
  lc.width = cfg.width;
  lc.blocks = cfg.blocks;
  lc.time_embed = cfg.time_embed;
  lc.cond_dim = cfg.cond_dim;
  lc.validate();
  return lc;
}

std::vector<Camera> ring(const Config& cfg, int n_views) {
  ViewRingConfig rc;
  rc.n_views = n_views;
  rc.pitch_deg = cfg.ring_pitch;
  rc.radius = cfg.ring_radius;
  rc.width = rc.height = cfg.image_size;
  return make_view_ring(rc);
}

TriangleMesh load_mesh_any(const std::string& path) {
  const auto geo = load_geometry(path);
  if (!geo.mesh) throw DataError("input has no triangles: " + path);
  return *geo.mesh;
}

PointCloud load_points_any(const std::string& path, const Config& cfg,
                           Rng& rng) {
  const auto geo = load_geometry(path);
  if (geo.cloud) return *geo.cloud;
  return sample_surface(*geo.mesh, cfg.surface_samples, rng);
}

void check_model_pair(const VaeParams& vae, const InpaintNet& net,
                      const std::string& vae_path,
                      const std::string& net_path) {
  if (checkpoint_config_hash(vae_path) != checkpoint_config_hash(net_path)) {
    throw DataError("checkpoint config hashes differ: " + vae_path + " vs " +
                    net_path);
  }
  if (vae.config.r != net.config.r || vae.config.c_s != net.config.c_s) {
    throw DataError("autoencoder and inpainting checkpoints are incompatible");
  }
}

struct PriorLatent {
  Tensor q_vis;  // {c_s, r, r, r}
  Tensor m_s;    // {1, r, r, r}
  OccupancyGrid grid;
};

PriorLatent encode_prior(const std::string& path, const VaeParams& vae) {
  PriorLatent out;
  out.grid = load_voxg(path);
  if (out.grid.n() != vae.config.n) {
    throw DataError("prior resolution " + std::to_string(out.grid.n()) +
                    " does not match the model's n=" +
                    std::to_string(vae.config.n));
  }
  num::NoGradGuard ng;
  out.q_vis = encode_ss(out.grid, vae);
  out.m_s = mask_to_tensor(downsample_mask(out.grid, vae.config.r));
  return out;
}

std::vector<double> parse_cond(const std::string& text, int cond_dim) {
  std::vector<double> cond(size_t(cond_dim), 0.0);
  if (text.empty()) return cond;
  std::istringstream is(text);
  std::string tok;
  size_t i = 0;
  while (std::getline(is, tok, ',')) {
    if (i >= cond.size()) throw UsageError("--cond has too many entries");
    try {
      cond[i++] = std::stod(tok);
    } catch (...) {
      throw UsageError("--cond: bad number '" + tok + "'");
    }
  }
  return cond;
}

// ---------------------------------------------------------------------------

int cmd_sample_surface(const Config& cfg, const std::string& in,
                       const std::string& out, bool normalize) {
  auto mesh = load_mesh_any(in);
  if (normalize) normalize_unit_cube(mesh);
  Rng rng(cfg.seed);
  const auto cloud = sample_surface(mesh, cfg.surface_samples, rng);
  write_ply(cloud, out);
  std::cout << "wrote " << cloud.size() << " points to " << out << "\n";
  return 0;
}

int cmd_visibility(const Config& cfg, const std::string& in, int view,
                   const std::string& out_visible,
                   const std::string& out_depth, bool normalize) {
  auto mesh = load_mesh_any(in);
  if (normalize) normalize_unit_cube(mesh);
  const auto cams = ring(cfg, cfg.ring_views);
  if (view < 0 || view >= int(cams.size())) {
    throw UsageError("--view must be in [0, " +
                     std::to_string(cams.size() - 1) + "]");
  }
  Rng rng(cfg.seed);
  const auto cloud = sample_surface(mesh, cfg.surface_samples, rng);
  const auto depth = render_depth_mesh(mesh, cams[size_t(view)]);
  const double tau = compute_tau(depth, cfg.tau_fraction);
  const auto mask = observation_mask(cloud, cams[size_t(view)], depth, tau);
  const auto visible = extract_visible(cloud, mask);
  if (visible.empty_warning) {
    std::cerr << "warning: no visible points in view " << view << "\n";
  }
  if (!out_depth.empty()) write_pfm(depth, out_depth);
  write_ply(visible.cloud, out_visible);
  std::cout << "view " << view << ": tau=" << fmt9(tau) << ", visible "
            << visible.cloud.size() << "/" << cloud.size() << " -> "
            << out_visible << "\n";
  return 0;
}

int cmd_voxelize(const Config& cfg, const std::string& in,
                 const std::string& out, bool normalize) {
  Rng rng(cfg.seed);
  auto cloud = load_points_any(in, cfg, rng);
  if (normalize) normalize_unit_cube(cloud);
  const auto res = voxelize(cloud, cfg.n);
  if (res.clamped_points > 0) {
    std::cerr << "warning: clamped " << res.clamped_points
              << " out-of-range points into the cube\n";
  }
  save_voxg(res.grid, out);
  std::cout << "wrote " << res.grid.count() << " occupied voxels (n=" << cfg.n
            << ") to " << out << "\n";
  return 0;
}

int cmd_export_ply(const std::string& in, const std::string& out) {
  const auto grid = load_voxg(in);
  write_ply(voxel_centers(grid), out);
  std::cout << "wrote " << grid.count() << " voxel centers to " << out << "\n";
  return 0;
}

std::vector<SyntheticShape> corpus(const Config& cfg, int shapes,
                                   const std::string& family) {
  Rng rng = Rng::derive(cfg.seed, 1);
  return gen_synthetic_shapes(shapes, shape_family_from_name(family),
                              cfg.cond_dim, rng);
}

int cmd_train_vae(const Config& cfg, int shapes, const std::string& family,
                  const std::string& out) {
  const auto lc = latent_config(cfg);
  const auto assets = corpus(cfg, shapes, family);
  std::vector<OccupancyGrid> grids;
  grids.reserve(assets.size());
  for (size_t i = 0; i < assets.size(); ++i) {
    Rng srng = Rng::derive(cfg.seed, 1000 + i);
    grids.push_back(
        voxelize(sample_surface(assets[i].mesh, cfg.surface_samples, srng),
                 cfg.n)
            .grid);
  }
  Rng init = Rng::derive(cfg.seed, 2);
  auto vae = VaeParams::init(lc, init);
  VaeTrainConfig tc;
  tc.lr = cfg.vae_lr;
  tc.batch = cfg.vae_batch;
  tc.iterations = cfg.vae_iterations;
  tc.target_iou = cfg.vae_target_iou;
  tc.beta = cfg.beta;
  tc.variational = cfg.variational != 0;
  Rng trng = Rng::derive(cfg.seed, 3);
  const auto res = train_vae(vae, grids, tc, trng,
                             [](const std::string& s) { std::cout << s << "\n"; });
  save_vae(vae, out, cfg.model_hash());
  std::cout << "train-vae: iou=" << fmt9(res.train_iou) << " after "
            << res.iterations_run << " iterations -> " << out << "\n";
  return 0;
}

int cmd_make_dataset(const Config& cfg, int shapes, const std::string& family,
                     const std::string& vae_path, const std::string& out_dir) {
  const auto vae = load_vae(vae_path);
  if (checkpoint_config_hash(vae_path) != cfg.model_hash()) {
    throw DataError("autoencoder checkpoint was trained under a different "
                    "config (hash mismatch)");
  }
  const auto assets = corpus(cfg, shapes, family);
  const auto cams = ring(cfg, cfg.train_views);
  std::vector<TrainingPair> pairs;
  int skipped = 0;
  for (size_t i = 0; i < assets.size(); ++i) {
    Rng prng = Rng::derive(cfg.seed, 10000 + i);
    auto res = build_pairs(assets[i].mesh, vae, cams, cfg.surface_samples,
                           cfg.tau_fraction, assets[i].cond, assets[i].id,
                           prng);
    skipped += res.skipped_views;
    for (auto& p : res.pairs) pairs.push_back(std::move(p));
  }
  if (skipped > 0) {
    std::cerr << "warning: skipped " << skipped << " empty views\n";
  }
  const auto manifest = save_pair_set(pairs, out_dir, cfg.model_hash());
  std::cout << "wrote " << pairs.size() << " pairs, manifest " << manifest
            << "\n";
  return 0;
}

int cmd_train_inpaint(const Config& cfg, const std::string& manifest,
                      const std::string& out) {
  const auto lc = latent_config(cfg);
  const auto pairs = load_pair_set(manifest, cfg.model_hash());
  Rng init = Rng::derive(cfg.seed, 4);
  auto net = InpaintNet::init(lc, init);
  InpaintTrainConfig tc;
  tc.lr = cfg.lr;
  tc.batch = cfg.batch;
  tc.iterations = cfg.iterations;
  tc.mask_dropout = cfg.mask_dropout;
  Rng trng = Rng::derive(cfg.seed, 5);
  train_inpaint(net, pairs, tc, trng,
                [](const std::string& s) { std::cout << s << "\n"; });
  save_inpaint(net, out, cfg.model_hash());
  std::cout << "train-inpaint: " << tc.iterations << " iterations on "
            << pairs.size() << " pairs -> " << out << "\n";
  return 0;
}

int cmd_generate(const Config& cfg, const std::string& net_path,
                 const std::string& vae_path, const std::string& prior_path,
                 const std::string& cond_text, const std::string& out,
                 bool repair) {
  const auto vae = load_vae(vae_path);
  const auto net = load_inpaint(net_path);
  check_model_pair(vae, net, vae_path, net_path);
  auto prior = encode_prior(prior_path, vae);
  const auto cond = parse_cond(cond_text, net.config.cond_dim);
  Schedule sched{cfg.steps, cfg.inpaint_steps};
  sched.validate();
  Rng rng = Rng::derive(cfg.seed, 0);
  if (repair) {
    prior.q_vis = repair_noisy_prior(net, prior.q_vis, cfg.repair_k,
                                     cfg.repair_strength, cond, rng);
  }
  StagedSampleOptions opts;
  opts.reanchor = cfg.reanchor != 0;
  const auto grid = generate_grid(net, vae, prior.q_vis, prior.m_s, cond,
                                  sched, cfg.decode_threshold, rng, opts);
  save_voxg(grid, out);
  std::cout << "generated " << grid.count() << " occupied voxels (t="
            << cfg.steps << ", s=" << cfg.inpaint_steps << ") -> " << out
            << "\n";
  return 0;
}

int cmd_repair_prior(const Config& cfg, const std::string& net_path,
                     const std::string& vae_path,
                     const std::string& prior_path, const std::string& cond_text,
                     const std::string& out) {
  const auto vae = load_vae(vae_path);
  const auto net = load_inpaint(net_path);
  check_model_pair(vae, net, vae_path, net_path);
  const auto prior = encode_prior(prior_path, vae);
  const auto cond = parse_cond(cond_text, net.config.cond_dim);
  Rng rng = Rng::derive(cfg.seed, 0);
  const auto repaired = repair_noisy_prior(net, prior.q_vis, cfg.repair_k,
                                           cfg.repair_strength, cond, rng);
  const auto grid = decode_ss(repaired, vae, cfg.decode_threshold);
  save_voxg(grid, out);
  std::cout << "repaired prior (k=" << cfg.repair_k << ", strength="
            << fmt9(cfg.repair_strength) << ") -> " << out << "\n";
  return 0;
}

int cmd_eval(const Config& cfg, const std::string& gen_path,
             const std::string& gt_path, const std::string& prior_path,
             const std::string& out, const std::string& format,
             const std::string& id) {
  const auto gen = load_voxg(gen_path);
  const auto gt = load_voxg(gt_path);
  const auto prior = load_voxg(prior_path);
  auto rec = visible_region_eval(gen, gt, prior, cfg.r, cfg.fscore_threshold);
  rec.id = id;
  rec.seed = cfg.seed;
  ReportFormat fmt;
  if (format == "csv") fmt = ReportFormat::kCsv;
  else if (format == "jsonl") fmt = ReportFormat::kJsonl;
  else throw UsageError("--format must be csv or jsonl");
  emit_report({rec}, out, fmt);
  std::cout << "cd=" << fmt9(rec.cd) << " f=" << fmt9(rec.f)
            << " visible_f=" << fmt9(rec.visible_f) << " -> " << out << "\n";
  return 0;
}

std::vector<std::pair<int, int>> parse_splits(const std::string& text) {
  std::vector<std::pair<int, int>> out;
  std::istringstream is(text);
  std::string tok;
  while (std::getline(is, tok, ',')) {
    const auto colon = tok.find(':');
    if (colon == std::string::npos) {
      throw UsageError("--splits entries must look like inpaint:refine");
    }
    try {
      out.emplace_back(std::stoi(tok.substr(0, colon)),
                       std::stoi(tok.substr(colon + 1)));
    } catch (...) {
      throw UsageError("--splits: bad entry '" + tok + "'");
    }
  }
  if (out.empty()) throw UsageError("--splits is empty");
  return out;
}

int cmd_sweep_schedule(const Config& cfg, const std::string& net_path,
                       const std::string& vae_path,
                       const std::string& prior_path,
                       const std::string& gt_path,
                       const std::string& cond_text,
                       const std::string& splits_text,
                       const std::string& out) {
  const auto vae = load_vae(vae_path);
  const auto net = load_inpaint(net_path);
  check_model_pair(vae, net, vae_path, net_path);
  const auto prior = encode_prior(prior_path, vae);
  const auto gt = load_voxg(gt_path);
  const auto cond = parse_cond(cond_text, net.config.cond_dim);
  const auto splits = parse_splits(splits_text);

  std::ofstream os(out);
  if (!os) throw DataError("cannot open for writing: " + out);
  os << "inpaint,refine,cd,f\n";
  for (size_t i = 0; i < splits.size(); ++i) {
    const auto [s, refine] = splits[i];
    Schedule sched{s + refine, s};
    sched.validate();
    Rng rng = Rng::derive(cfg.seed, i);
    const auto grid = generate_grid(net, vae, prior.q_vis, prior.m_s, cond,
                                    sched, cfg.decode_threshold, rng);
    const auto gen_pts = voxel_centers(grid);
    const auto gt_pts = voxel_centers(gt);
    const double cd = chamfer(gen_pts, gt_pts);
    const auto fs = fscore(gen_pts, gt_pts, cfg.fscore_threshold);
    os << s << "," << refine << "," << fmt9(cd) << "," << fmt9(fs.f) << "\n";
    std::cout << "split " << s << ":" << refine << " cd=" << fmt9(cd)
              << " f=" << fmt9(fs.f) << "\n";
  }
  if (!os) throw DataError("write failed: " + out);
  std::cout << "sweep written to " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"points-to-3D structural pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> set_entries;
  app.add_option("--config", config_path,
                 "key=value config file (env: P23D_CONFIG)")
      ->envname("P23D_CONFIG");
  app.add_option("--set", set_entries,
                 "override a config entry, e.g. --set steps=10 (repeatable)");
  std::string threads_text;
  app.add_option("--threads", threads_text, "worker thread cap (default 1)");

  // dedicated flags collected as config overrides, applied after --config
  std::vector<std::pair<std::string, std::string>> overrides;
  auto cfg_opt = [&](CLI::App* sub, const std::string& flag,
                     const std::string& key, const std::string& help) {
    sub->add_option_function<std::string>(
        flag,
        [&overrides, key](const std::string& v) {
          overrides.emplace_back(key, v);
        },
        help);
  };
  auto add_seed = [&](CLI::App* sub) {
    cfg_opt(sub, "--seed", "seed", "run seed (default 0)");
  };

  std::string in_path, out_path;
  bool normalize = false;

  auto* sample = app.add_subcommand(
      "sample-surface", "area-weighted surface sampling of a mesh");
  sample->add_option("input", in_path, "mesh (obj/ply)")->required();
  sample->add_option("output", out_path, "output point cloud (.ply)")
      ->required();
  sample->add_flag("--normalize", normalize,
                   "normalize to the unit cube first");
  cfg_opt(sample, "--samples", "surface_samples", "sample count (default 50000)");
  add_seed(sample);

  int view = 0;
  std::string out_depth;
  auto* vis = app.add_subcommand(
      "visibility", "extract the depth-consistent visible point cloud");
  vis->add_option("input", in_path, "mesh (obj/ply)")->required();
  vis->add_option("output", out_path, "visible points (.ply)")->required();
  vis->add_option("--view", view, "view index on the camera ring");
  vis->add_option("--out-depth", out_depth, "also write the depth map (.pfm)");
  vis->add_flag("--normalize", normalize, "normalize to the unit cube first");
  cfg_opt(vis, "--tau-fraction", "tau_fraction",
          "tolerance as a fraction of the depth range (default 0.05)");
  cfg_opt(vis, "--ring-views", "ring_views", "cameras on the ring (default 8)");
  cfg_opt(vis, "--image-size", "image_size", "depth map resolution (default 64)");
  cfg_opt(vis, "--samples", "surface_samples", "sample count (default 50000)");
  add_seed(vis);

  auto* vox = app.add_subcommand("voxelize",
                                 "occupancy grid from points or a mesh");
  vox->add_option("input", in_path, "points or mesh (ply/xyz/obj)")->required();
  vox->add_option("output", out_path, "occupancy grid (.voxg)")->required();
  vox->add_flag("--normalize", normalize, "normalize to the unit cube first");
  cfg_opt(vox, "--n", "n", "grid resolution (default 16)");
  cfg_opt(vox, "--samples", "surface_samples",
          "samples drawn when the input is a mesh");
  add_seed(vox);

  auto* exp = app.add_subcommand("export-ply",
                                 "voxel centers of a grid as a point cloud");
  exp->add_option("input", in_path, "occupancy grid (.voxg)")->required();
  exp->add_option("output", out_path, "point cloud (.ply)")->required();

  int shapes = 200;
  std::string family = "mixed";
  auto* tv = app.add_subcommand("train-vae",
                                "train the occupancy autoencoder");
  tv->add_option("--shapes", shapes, "synthetic corpus size")
      ->default_val(200);
  tv->add_option("--family", family,
                 "boxes|spheres|unions|l-shapes|mixed")
      ->default_val("mixed");
  tv->add_option("--out", out_path, "checkpoint path")->required();
  add_seed(tv);

  std::string vae_path;
  auto* md = app.add_subcommand("make-dataset",
                                "build training pairs from synthetic shapes");
  md->add_option("--shapes", shapes, "synthetic corpus size")->default_val(200);
  md->add_option("--family", family, "boxes|spheres|unions|l-shapes|mixed")
      ->default_val("mixed");
  md->add_option("--vae", vae_path, "autoencoder checkpoint")->required();
  md->add_option("--out", out_path, "output directory")->required();
  cfg_opt(md, "--views", "train_views", "cameras per asset (default 24)");
  cfg_opt(md, "--n", "n", "grid resolution");
  cfg_opt(md, "--r", "r", "latent resolution");
  cfg_opt(md, "--tau-fraction", "tau_fraction", "visibility tolerance fraction");
  add_seed(md);

  std::string manifest_path;
  auto* ti = app.add_subcommand("train-inpaint",
                                "train the inpainting network");
  ti->add_option("--data", manifest_path, "dataset manifest")->required();
  ti->add_option("--out", out_path, "checkpoint path")->required();
  cfg_opt(ti, "--iterations", "iterations", "training steps (default 5000)");
  cfg_opt(ti, "--batch", "batch", "batch size (default 16)");
  add_seed(ti);

  std::string net_path, prior_path, cond_text;
  bool repair = false;
  auto* gen = app.add_subcommand("generate",
                                 "staged generation from a visible prior");
  gen->add_option("--checkpoint", net_path, "inpainting checkpoint")
      ->required();
  gen->add_option("--vae", vae_path, "autoencoder checkpoint")->required();
  gen->add_option("--prior", prior_path, "visible prior grid (.voxg)")
      ->required();
  gen->add_option("--out", out_path, "generated grid (.voxg)")->required();
  gen->add_option("--cond", cond_text, "condition vector, comma separated");
  gen->add_flag("--repair", repair, "repair the prior latent first");
  cfg_opt(gen, "--steps", "steps", "total sampling steps t (default 50)");
  cfg_opt(gen, "--inpaint-steps", "inpaint_steps",
          "stage-1 steps s (default 25)");
  cfg_opt(gen, "--reanchor", "reanchor",
          "re-blend the prior after stage 1 (0/1)");
  cfg_opt(gen, "--decode-threshold", "decode_threshold",
          "occupancy binarization threshold (default 0.5)");
  add_seed(gen);

  auto* rp = app.add_subcommand("repair-prior",
                                "diffuse-then-denoise repair of a noisy prior");
  rp->add_option("--checkpoint", net_path, "inpainting checkpoint")->required();
  rp->add_option("--vae", vae_path, "autoencoder checkpoint")->required();
  rp->add_option("--prior", prior_path, "noisy prior grid (.voxg)")->required();
  rp->add_option("--out", out_path, "repaired grid (.voxg)")->required();
  rp->add_option("--cond", cond_text, "condition vector, comma separated");
  cfg_opt(rp, "--repair-k", "repair_k", "denoising steps (default 5)");
  cfg_opt(rp, "--repair-strength", "repair_strength",
          "diffusion strength in (0, 1] (default 0.3)");
  add_seed(rp);

  std::string gt_path, format = "csv", record_id = "pair";
  auto* ev = app.add_subcommand("eval",
                                "geometric evaluation of a generated grid");
  ev->add_option("--gen", in_path, "generated grid (.voxg)")->required();
  ev->add_option("--gt", gt_path, "ground-truth grid (.voxg)")->required();
  ev->add_option("--prior", prior_path, "visible prior grid (.voxg)")
      ->required();
  ev->add_option("--out", out_path, "report path")->required();
  ev->add_option("--format", format, "csv|jsonl")->default_val("csv");
  ev->add_option("--id", record_id, "record id in the report")
      ->default_val("pair");
  cfg_opt(ev, "--fscore-threshold", "fscore_threshold",
          "F-score distance threshold (default 0.05)");
  cfg_opt(ev, "--r", "r", "latent resolution for the visible mask");
  add_seed(ev);

  std::string splits = "50:0,40:10,30:20,25:25,20:30,10:40";
  auto* sw = app.add_subcommand(
      "sweep-schedule", "CD/F-score across inpaint:refine step splits");
  sw->add_option("--checkpoint", net_path, "inpainting checkpoint")->required();
  sw->add_option("--vae", vae_path, "autoencoder checkpoint")->required();
  sw->add_option("--prior", prior_path, "visible prior grid (.voxg)")
      ->required();
  sw->add_option("--gt", gt_path, "ground-truth grid (.voxg)")->required();
  sw->add_option("--out", out_path, "CSV output path")->required();
  sw->add_option("--cond", cond_text, "condition vector, comma separated");
  sw->add_option("--splits", splits, "comma-separated inpaint:refine pairs")
      ->default_val(splits);
  cfg_opt(sw, "--fscore-threshold", "fscore_threshold",
          "F-score distance threshold");
  add_seed(sw);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return UsageError::kExitCode;
  }

  try {
    Config cfg;
    if (!config_path.empty()) cfg = load_config(config_path, cfg);
    if (!threads_text.empty()) apply_key_value(cfg, "threads", threads_text);
    for (const auto& entry : set_entries) {
      const auto eq = entry.find('=');
      if (eq == std::string::npos) {
        throw UsageError("--set expects key=value, got '" + entry + "'");
      }
      apply_key_value(cfg, entry.substr(0, eq), entry.substr(eq + 1));
    }
    for (const auto& [key, value] : overrides) apply_key_value(cfg, key, value);
    cfg.validate();
    std::cout << "# resolved config\n" << cfg.to_string();

    if (app.got_subcommand(sample))
      return cmd_sample_surface(cfg, in_path, out_path, normalize);
    if (app.got_subcommand(vis))
      return cmd_visibility(cfg, in_path, view, out_path, out_depth, normalize);
    if (app.got_subcommand(vox))
      return cmd_voxelize(cfg, in_path, out_path, normalize);
    if (app.got_subcommand(exp)) return cmd_export_ply(in_path, out_path);
    if (app.got_subcommand(tv))
      return cmd_train_vae(cfg, shapes, family, out_path);
    if (app.got_subcommand(md))
      return cmd_make_dataset(cfg, shapes, family, vae_path, out_path);
    if (app.got_subcommand(ti))
      return cmd_train_inpaint(cfg, manifest_path, out_path);
    if (app.got_subcommand(gen))
      return cmd_generate(cfg, net_path, vae_path, prior_path, cond_text,
                          out_path, repair);
    if (app.got_subcommand(rp))
      return cmd_repair_prior(cfg, net_path, vae_path, prior_path, cond_text,
                              out_path);
    if (app.got_subcommand(ev))
      return cmd_eval(cfg, in_path, gt_path, prior_path, out_path, format,
                      record_id);
    if (app.got_subcommand(sw))
      return cmd_sweep_schedule(cfg, net_path, vae_path, prior_path, gt_path,
                                cond_text, splits, out_path);
    throw UsageError("no subcommand");
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return UsageError::kExitCode;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return DataError::kExitCode;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return NumericError::kExitCode;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return DataError::kExitCode;
  }
}
