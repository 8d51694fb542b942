#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "avec/checkpoint.hpp"
#include "avec/config.hpp"
#include "avec/dataset.hpp"
#include "avec/eval.hpp"
#include "avec/losses.hpp"
#include "avec/random.hpp"
#include "avec/reference.hpp"
#include "avec/trainer.hpp"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;

json spec_to_json(const avec::AugmentationSpec& s) {
  json j;
  j["modality"] = avec::modality_name(s.modality);
  j["rows"] = s.rows;
  j["cols"] = s.cols;
  j["crop"] = {{"x", s.crop.x}, {"y", s.crop.y}, {"w", s.crop.w}, {"h", s.crop.h}};
  j["jitter"] = {{"applied", s.jitter_applied},
                 {"factors", s.jitter_factors},
                 {"order", s.jitter_order}};
  j["blur"] = {{"applied", s.blur_applied}, {"sigma", s.blur_sigma}};
  j["hflip"] = s.hflip;
  if (s.modality == avec::Modality::visual) {
    j["grayscale"] = s.grayscale;
  } else {
    j["time_shift"] = {{"applied", s.time_shift_applied}, {"amount", s.time_shift}};
    j["specaug"] = {{"applied", s.specaug_applied},
                    {"time_mask", {s.time_mask_begin, s.time_mask_end}},
                    {"freq_mask", {s.freq_mask_begin, s.freq_mask_end}}};
  }
  return j;
}

json retrieval_to_json(const avec::RetrievalReport& r) {
  return json{{"direction", r.direction},
              {"r1", r.r1},
              {"r5", r.r5},
              {"r10", r.r10},
              {"gallery_size", r.gallery_size}};
}

avec::SyntheticPairConfig dataset_config(const avec::TrainConfig& cfg,
                                         std::uint64_t seed,
                                         std::size_t samples_per_class) {
  avec::SyntheticPairConfig ds;
  ds.classes = cfg.dataset_classes;
  ds.samples_per_class = samples_per_class;
  ds.noise_std = cfg.dataset_noise_std;
  ds.seed = seed;
  ds.audio_time = cfg.model.audio_time;
  ds.audio_freq = cfg.model.audio_freq;
  ds.image_size = cfg.model.image_size;
  return ds;
}

// Round-robin class pick so a truncated gallery stays class-balanced.
avec::PairedDataset eval_subset(const avec::PairedDataset& full, std::size_t classes,
                                std::size_t per_class, std::size_t want) {
  avec::PairedDataset out;
  out.audio_templates = full.audio_templates;
  out.visual_templates = full.visual_templates;
  for (std::size_t s = 0; s < per_class && out.items.size() < want; ++s) {
    for (std::size_t k = 0; k < classes && out.items.size() < want; ++k) {
      out.items.push_back(full.items[k * per_class + s]);
    }
  }
  return out;
}

int run_train(const std::string& config_path, const std::string& out_dir,
              const std::string& resume_path) {
  avec::TrainConfig cfg;
  avec::Checkpoint ckpt;
  const bool resuming = !resume_path.empty();
  if (resuming) {
    ckpt = avec::load_checkpoint(resume_path);
    cfg = ckpt.config;
  } else {
    cfg = avec::load_train_config(config_path);
  }

  avec::PairedDataset data = avec::generate_synthetic_pairs(
      dataset_config(cfg, cfg.seed, cfg.dataset_samples_per_class));
  avec::ModelSet models(cfg.model, cfg.seed);
  avec::Trainer trainer(cfg, &models, &data);
  if (resuming) trainer.restore(ckpt);

  std::ofstream metrics;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    metrics.open(out_dir + "/metrics.jsonl", resuming ? std::ios::app : std::ios::trunc);
    if (!metrics) throw std::runtime_error("cannot open metrics log in " + out_dir);
  }
  avec::StepMetrics last;
  trainer.run(
      [&](const avec::StepMetrics& m) {
        last = m;
        json line{{"step", m.step},
                  {"epoch", m.epoch},
                  {"lr", m.lr},
                  {"loss_total", m.loss_total},
                  {"loss_inter", m.loss_inter},
                  {"loss_intra_a", m.loss_intra_audio},
                  {"loss_intra_v", m.loss_intra_visual}};
        if (metrics.is_open()) {
          metrics << line.dump() << "\n";
        } else {
          std::cout << line.dump() << "\n";
        }
      },
      out_dir);
  json summary{{"steps", trainer.global_step()},
               {"epochs", trainer.epoch()},
               {"final_loss_total", last.loss_total},
               {"final_loss_inter", last.loss_inter}};
  if (!out_dir.empty()) summary["checkpoint"] = out_dir + "/checkpoint_final.avec";
  std::cout << summary.dump(2) << "\n";
  return kExitOk;
}

int run_eval(const std::string& checkpoint_path, bool retrieval, bool probe,
             const std::string& source_name, std::size_t gallery,
             std::size_t probe_per_class, std::uint64_t eval_seed,
             const std::string& out_path) {
  const avec::Checkpoint ckpt = avec::load_checkpoint(checkpoint_path);
  const avec::TrainConfig& cfg = ckpt.config;
  avec::ModelSet models(cfg.model, cfg.seed);
  avec::restore_parameters(models, ckpt);

  json out;
  if (retrieval) {
    const std::size_t per_class = (gallery + cfg.dataset_classes - 1) / cfg.dataset_classes;
    avec::PairedDataset full = avec::generate_synthetic_pairs(
        dataset_config(cfg, avec::derive_seed(cfg.seed, "eval.dataset") + eval_seed,
                       per_class));
    avec::PairedDataset subset = eval_subset(full, cfg.dataset_classes, per_class, gallery);
    auto [v2a, a2v] = avec::retrieval_eval(models, cfg, subset, eval_seed);
    out["retrieval"] = json::array({retrieval_to_json(v2a), retrieval_to_json(a2v)});
  }
  if (probe) {
    avec::PairedDataset labeled = avec::generate_synthetic_pairs(dataset_config(
        cfg, avec::derive_seed(cfg.seed, "eval.probe.dataset") + eval_seed,
        probe_per_class));
    const avec::ProbeReport report =
        avec::linear_probe(models, labeled, avec::feature_source_from_name(source_name));
    out["probe"] = json{{"accuracy", report.accuracy}, {"source", report.source}};
  }
  const std::string text = out.dump(2);
  std::cout << text << "\n";
  if (!out_path.empty()) {
    std::ofstream f(out_path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + out_path);
    f << text << "\n";
  }
  return kExitOk;
}

// Reduced model so central differences over every parameter finish quickly;
// every operation and parameter kind of the full model is still exercised.
avec::TrainConfig gradcheck_config(std::uint64_t seed) {
  avec::TrainConfig cfg;
  cfg.seed = seed;
  cfg.epochs = 2;
  cfg.warmup_epochs = 1;
  cfg.batch_size = 2;
  cfg.centroid_samples = 2;
  cfg.model.embed_dim = 8;
  cfg.model.depth = 2;
  cfg.model.heads = 2;
  cfg.model.projection_dim = 4;
  cfg.dataset_classes = 2;
  cfg.dataset_samples_per_class = 1;
  return cfg;
}

int run_gradcheck(std::uint64_t seed, double tolerance) {
  const avec::TrainConfig cfg = gradcheck_config(seed);
  avec::PairedDataset data = avec::generate_synthetic_pairs(
      dataset_config(cfg, cfg.seed, cfg.dataset_samples_per_class));
  avec::ModelSet models(cfg.model, cfg.seed);
  avec::Trainer trainer(cfg, &models, &data);
  const std::vector<std::size_t> idx{0, 1};
  const avec::Batch batch = trainer.assemble_batch(idx);

  for (avec::Parameter* p : models.parameters()) p->tensor.zero_grad();
  avec::Tape tape;
  avec::LossOutput loss = trainer.forward_loss(tape, batch);
  tape.backward(loss.total);

  const auto params = models.parameters();
  const auto report = avec::reference::compare_gradients(
      [&] {
        avec::Tape fwd(false);
        return trainer.forward_loss(fwd, batch).total.item();
      },
      params);
  std::cout << "checked " << report.checked << " parameter entries across "
            << params.size() << " tensors\n";
  std::cout << "max relative error " << report.max_rel_error << " at "
            << report.worst_parameter << "[" << report.worst_index << "]\n";
  const bool ok = report.max_rel_error < tolerance;
  std::cout << (ok ? "PASS" : "FAIL") << " (tolerance " << tolerance << ")\n";
  return ok ? kExitOk : kExitValidation;
}

int run_losscheck() {
  avec::Rng rng(20240601);
  bool ok = true;

  // Closed-form relation between the two denominator variants, plus the
  // same derivatives recovered by differentiating the recorded losses.
  double worst_closed = 0.0, worst_auto = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const double s_pos = std::exp(rng.uniform(-3.0, 3.0));
    std::vector<double> negs(1 + rng.uniform_index(6));
    for (double& s : negs) s = std::exp(rng.uniform(-3.0, 3.0));
    const auto gf = avec::gradient_factor_check(s_pos, negs);
    ok = ok && gf.factor > 0.0 && gf.factor < 1.0;
    worst_closed = std::max(worst_closed,
                            avec::reference::relative_error(
                                gf.d_inclusive, gf.d_exclusive * gf.factor, 1e-300));

    avec::Tape tape;
    avec::Tensor sp = avec::Tensor::scalar(s_pos);
    sp.set_requires_grad(true);
    avec::Tensor sn = avec::Tensor::row(negs);
    avec::Tensor keep = avec::anchor_loss_inclusive(tape, sp, sn);
    tape.backward(keep);
    worst_auto = std::max(worst_auto, std::fabs(sp.grad()[0] - gf.d_inclusive));
    sp.zero_grad();
    avec::Tape tape2;
    avec::Tensor drop = avec::anchor_loss_exclusive(tape2, sp, sn);
    tape2.backward(drop);
    worst_auto = std::max(worst_auto, std::fabs(sp.grad()[0] - gf.d_exclusive));
  }
  ok = ok && worst_closed < 1e-12 && worst_auto < 1e-8;
  std::cout << "gradient factor: closed-form residual " << worst_closed
            << ", autodiff residual " << worst_auto << "\n";

  // Tape losses against the enumeration oracles.
  long double worst_loss = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(4);
    const std::size_t p = 8;
    avec::reference::Rows a(n, std::vector<double>(p)), b = a;
    avec::Tensor ta({n, p}), tb({n, p});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < p; ++j) {
        a[i][j] = rng.normal();
        b[i][j] = rng.normal();
        ta.mut(i * p + j) = a[i][j];
        tb.mut(i * p + j) = b[i][j];
      }
    avec::Tape tape(false);
    worst_loss = std::max<long double>(
        worst_loss, std::fabs(avec::intra_loss(tape, ta, tb, 0.07).item() -
                               avec::reference::intra_loss_oracle(a, b, 0.07)));
    worst_loss = std::max<long double>(
        worst_loss, std::fabs(avec::inter_loss(tape, ta, tb, 0.07).item() -
                               avec::reference::inter_loss_oracle(a, b, 0.07)));
    if (n >= 2) {
      const double impl = avec::equimod_loss(tape, ta, tb, 0.07).item();
      worst_loss = std::max<long double>(
          worst_loss, std::fabs(impl - avec::reference::equimod_loss_oracle(a, b, 0.07)));
      ok = ok && impl < avec::intra_loss(tape, ta, tb, 0.07).item();
    }
  }
  ok = ok && worst_loss < 1e-12;
  std::cout << "loss oracles: worst absolute deviation "
            << static_cast<double>(worst_loss) << "\n";
  std::cout << (ok ? "PASS" : "FAIL") << "\n";
  return ok ? kExitOk : kExitValidation;
}

int run_augdump(const std::string& modality_name, std::uint64_t seed, std::size_t count) {
  const avec::Modality m = avec::modality_from_name(modality_name);
  const avec::ModelConfig dims;  // desk-default input extents
  avec::AugmentationSampler sampler(
      m, m == avec::Modality::audio ? dims.audio_time : dims.image_size,
      m == avec::Modality::audio ? dims.audio_freq : dims.image_size,
      avec::SamplerConfig{}, seed);
  for (std::size_t i = 0; i < count; ++i) {
    const avec::AugmentationSpec spec = sampler.sample_spec();
    json record;
    record["index"] = i;
    record["spec"] = spec_to_json(spec);
    record["vector"] = avec::parameterize(spec).values;
    std::cout << record.dump() << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Equivariant audio-visual contrastive learning workbench"};
  app.require_subcommand(1);

  std::string config_path, out_dir, resume_path;
  CLI::App* train = app.add_subcommand("train", "Run a training experiment");
  train->add_option("--config", config_path, "Experiment config (flat JSON)");
  train->add_option("--out", out_dir, "Directory for metrics and checkpoints");
  train->add_option("--resume", resume_path, "Continue from a checkpoint");

  std::string ckpt_path, eval_out, probe_source = "concatenated";
  bool do_retrieval = false, do_probe = false;
  std::size_t gallery = 16, probe_per_class = 16;
  std::uint64_t eval_seed = 0;
  CLI::App* eval = app.add_subcommand("eval", "Evaluate a saved checkpoint");
  eval->add_option("--checkpoint", ckpt_path, "Checkpoint path")->required();
  eval->add_flag("--retrieval", do_retrieval, "Zero-shot cross-modal retrieval");
  eval->add_flag("--probe", do_probe, "Linear probe on frozen features");
  eval->add_option("--source", probe_source, "Probe features: audio|visual|concatenated");
  eval->add_option("--gallery", gallery, "Retrieval gallery size");
  eval->add_option("--probe-items", probe_per_class, "Probe items per class");
  eval->add_option("--seed", eval_seed, "Evaluation seed");
  eval->add_option("--out", eval_out, "Also write the JSON report here");

  std::uint64_t gc_seed = 7;
  double gc_tol = 1e-4;
  CLI::App* gradcheck = app.add_subcommand(
      "gradcheck", "Finite-difference check of every parameter gradient");
  gradcheck->add_option("--seed", gc_seed, "Model/batch seed");
  gradcheck->add_option("--tolerance", gc_tol, "Max allowed relative error");

  std::string dump_modality;
  std::uint64_t dump_seed = 0;
  std::size_t dump_count = 8;
  CLI::App* augdump = app.add_subcommand(
      "augdump", "Print sampled augmentation specs and vectors as JSON lines");
  augdump->add_option("--modality", dump_modality, "audio or visual")->required();
  augdump->add_option("--seed", dump_seed, "Sampler seed")->required();
  augdump->add_option("--count", dump_count, "Number of draws");

  CLI::App* losscheck = app.add_subcommand(
      "losscheck", "Run the loss-oracle and gradient-factor verification suites");

  try {
    app.parse(argc, argv);
    if (train->parsed()) {
      if (config_path.empty() && resume_path.empty()) {
        std::cerr << "train: --config (or --resume) is required\n";
        return kExitValidation;
      }
      return run_train(config_path, out_dir, resume_path);
    }
    if (eval->parsed()) {
      if (!do_retrieval && !do_probe) do_retrieval = true;
      return run_eval(ckpt_path, do_retrieval, do_probe, probe_source, gallery,
                      probe_per_class, eval_seed, eval_out);
    }
    if (gradcheck->parsed()) return run_gradcheck(gc_seed, gc_tol);
    if (losscheck->parsed()) return run_losscheck();
    if (augdump->parsed()) return run_augdump(dump_modality, dump_seed, dump_count);
    return kExitValidation;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  } catch (const avec::CheckpointError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
}
