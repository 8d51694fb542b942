#include <benchmark/benchmark.h>

#include "avec/trainer.hpp"

using namespace avec;

namespace {

struct StepFixture {
  TrainConfig cfg;
  PairedDataset data;
  ModelSet models;
  Trainer trainer;
  std::vector<std::size_t> idx;

  explicit StepFixture(std::size_t centroid_samples)
      : cfg(make_config(centroid_samples)),
        data(generate_synthetic_pairs({cfg.dataset_classes, cfg.dataset_samples_per_class,
                                       cfg.dataset_noise_std, cfg.seed, 0,
                                       cfg.model.audio_time, cfg.model.audio_freq,
                                       cfg.model.image_size})),
        models(cfg.model, cfg.seed),
        trainer(cfg, &models, &data) {
    idx.resize(cfg.batch_size);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  }

  static TrainConfig make_config(std::size_t centroid_samples) {
    TrainConfig cfg;
    cfg.centroid_samples = centroid_samples;
    cfg.dataset_samples_per_class = 8;
    return cfg;
  }
};

void BM_TrainStep(benchmark::State& state) {
  StepFixture fx(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    Batch batch = fx.trainer.assemble_batch(fx.idx);
    benchmark::DoNotOptimize(fx.trainer.train_step(batch));
  }
}
BENCHMARK(BM_TrainStep)->Arg(1)->Arg(4)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_PredictorQueries(benchmark::State& state) {
  const ModelConfig cfg;
  ModelSet models(cfg, 1);
  Rng rng(2);
  Tensor h({models.audio_encoder.token_count(), cfg.embed_dim});
  for (double& v : h.values_mut()) v = rng.normal();
  AugmentationSampler sampler(Modality::audio, cfg.audio_time, cfg.audio_freq,
                              SamplerConfig{}, 3);
  std::vector<AugmentationVector> ts;
  for (std::int64_t i = 0; i < state.range(0); ++i) ts.push_back(sampler.sample_vector());
  for (auto _ : state) {
    Tape tape(false);
    benchmark::DoNotOptimize(models.audio_predictor.compute_centroid(tape, h, ts));
  }
}
BENCHMARK(BM_PredictorQueries)->Arg(1)->Arg(16)->Unit(benchmark::kMicrosecond);

void BM_Encode(benchmark::State& state) {
  const ModelConfig cfg;
  ModelSet models(cfg, 4);
  Rng rng(5);
  Tensor audio({cfg.audio_time, cfg.audio_freq});
  for (double& v : audio.values_mut()) v = rng.normal();
  for (auto _ : state) {
    Tape tape(false);
    benchmark::DoNotOptimize(
        models.audio_encoder.encode(tape, {Modality::audio, audio}));
  }
}
BENCHMARK(BM_Encode)->Unit(benchmark::kMicrosecond);

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(6);
  Tensor a({n, n}), b({n, n});
  for (double& v : a.values_mut()) v = rng.normal();
  for (double& v : b.values_mut()) v = rng.normal();
  for (auto _ : state) {
    Tape tape(false);
    benchmark::DoNotOptimize(tape.matmul(a, b));
  }
}
BENCHMARK(BM_Matmul)->Arg(16)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
