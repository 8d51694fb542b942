#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include <doctest.h>

#include "avec/checkpoint.hpp"
#include "avec/trainer.hpp"

using namespace avec;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const std::vector<unsigned char>& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size()));
}

// A trainer with a little optimizer state to make round trips meaningful.
struct Harness {
  TrainConfig cfg;
  PairedDataset data;
  ModelSet models;
  Trainer trainer;

  explicit Harness(std::uint64_t seed)
      : cfg(make_config(seed)),
        data(generate_synthetic_pairs({cfg.dataset_classes, cfg.dataset_samples_per_class,
                                       cfg.dataset_noise_std, cfg.seed, 0,
                                       cfg.model.audio_time, cfg.model.audio_freq,
                                       cfg.model.image_size})),
        models(cfg.model, cfg.seed),
        trainer(cfg, &models, &data) {}

  static TrainConfig make_config(std::uint64_t seed) {
    TrainConfig cfg;
    cfg.seed = seed;
    cfg.epochs = 4;
    cfg.warmup_epochs = 1;
    cfg.batch_size = 4;
    cfg.centroid_samples = 2;
    cfg.model.embed_dim = 8;
    cfg.model.depth = 1;
    cfg.model.heads = 2;
    cfg.model.projection_dim = 4;
    cfg.dataset_classes = 2;
    cfg.dataset_samples_per_class = 4;
    return cfg;
  }

  void step_once() {
    const Batch b = trainer.assemble_batch(std::vector<std::size_t>{0, 1, 2, 3});
    trainer.train_step(b);
  }
};

}  // namespace

TEST_CASE("checkpoints round-trip every tensor bitwise") {
  Harness h(61);
  h.step_once();
  h.step_once();
  const std::string path = temp_path("avec_ckpt_roundtrip.avec");
  const Checkpoint saved = h.trainer.make_checkpoint();
  save_checkpoint(saved, path);
  const Checkpoint loaded = load_checkpoint(path);

  CHECK(loaded.epoch == saved.epoch);
  CHECK(loaded.step == saved.step);
  CHECK(loaded.rng_states == saved.rng_states);
  REQUIRE(loaded.params.size() == saved.params.size());
  for (std::size_t i = 0; i < saved.params.size(); ++i) {
    CHECK(loaded.params[i].name == saved.params[i].name);
    CHECK(loaded.params[i].shape == saved.params[i].shape);
    CHECK(loaded.params[i].step == saved.params[i].step);
    CHECK(loaded.params[i].values == saved.params[i].values);
    CHECK(loaded.params[i].m == saved.params[i].m);
    CHECK(loaded.params[i].v == saved.params[i].v);
  }
  std::filesystem::remove(path);
}

TEST_CASE("save, load, save is byte-identical") {
  Harness h(62);
  h.step_once();
  const std::string p1 = temp_path("avec_ckpt_bytes1.avec");
  const std::string p2 = temp_path("avec_ckpt_bytes2.avec");
  save_checkpoint(h.trainer.make_checkpoint(), p1);
  save_checkpoint(load_checkpoint(p1), p2);
  CHECK(read_file(p1) == read_file(p2));
  std::filesystem::remove(p1);
  std::filesystem::remove(p2);
}

TEST_CASE("truncated files fail the checksum with no partial state") {
  Harness h(63);
  h.step_once();
  const std::string path = temp_path("avec_ckpt_trunc.avec");
  save_checkpoint(h.trainer.make_checkpoint(), path);
  auto bytes = read_file(path);
  bytes.resize(bytes.size() - 257);
  write_file(path, bytes);
  try {
    (void)load_checkpoint(path);
    FAIL("expected a checkpoint error");
  } catch (const CheckpointError& e) {
    CHECK(e.code() == CheckpointError::Code::checksum_mismatch);
  }
  std::filesystem::remove(path);
}

TEST_CASE("a flipped payload byte is caught by the checksum") {
  Harness h(64);
  const std::string path = temp_path("avec_ckpt_corrupt.avec");
  save_checkpoint(h.trainer.make_checkpoint(), path);
  auto bytes = read_file(path);
  bytes[bytes.size() / 2] ^= 0x40;
  write_file(path, bytes);
  CHECK_THROWS_AS((void)load_checkpoint(path), CheckpointError);
  std::filesystem::remove(path);
}

TEST_CASE("version and magic mismatches are distinct errors") {
  Harness h(65);
  const std::string path = temp_path("avec_ckpt_version.avec");
  save_checkpoint(h.trainer.make_checkpoint(), path);
  auto bytes = read_file(path);

  auto rewrite_crc = [](std::vector<unsigned char>& b) {
    const std::uint32_t crc = crc32(b.data(), b.size() - 4);
    std::memcpy(b.data() + b.size() - 4, &crc, 4);
  };

  auto versioned = bytes;
  versioned[8] = 0x7F;  // low byte of the version field
  rewrite_crc(versioned);
  write_file(path, versioned);
  try {
    (void)load_checkpoint(path);
    FAIL("expected a version error");
  } catch (const CheckpointError& e) {
    CHECK(e.code() == CheckpointError::Code::version_mismatch);
  }

  auto magicked = bytes;
  magicked[0] = 'X';
  rewrite_crc(magicked);
  write_file(path, magicked);
  try {
    (void)load_checkpoint(path);
    FAIL("expected a magic error");
  } catch (const CheckpointError& e) {
    CHECK(e.code() == CheckpointError::Code::bad_magic);
  }
  std::filesystem::remove(path);
}

TEST_CASE("missing files raise an I/O error") {
  try {
    (void)load_checkpoint(temp_path("avec_ckpt_missing.avec"));
    FAIL("expected an I/O error");
  } catch (const CheckpointError& e) {
    CHECK(e.code() == CheckpointError::Code::io);
  }
}

TEST_CASE("a restored trainer steps identically to the uninterrupted one") {
  Harness a(66);
  a.step_once();
  const Checkpoint snap = a.trainer.make_checkpoint();
  a.step_once();
  const Checkpoint reference = a.trainer.make_checkpoint();

  Harness b(66);
  b.trainer.restore(snap);
  b.step_once();
  const Checkpoint resumed = b.trainer.make_checkpoint();

  REQUIRE(resumed.params.size() == reference.params.size());
  for (std::size_t i = 0; i < reference.params.size(); ++i) {
    CHECK(resumed.params[i].values == reference.params[i].values);
    CHECK(resumed.params[i].m == reference.params[i].m);
    CHECK(resumed.params[i].v == reference.params[i].v);
  }
  CHECK(resumed.rng_states == reference.rng_states);
}

TEST_CASE("restore rejects mismatched models") {
  Harness h(67);
  Checkpoint snap = h.trainer.make_checkpoint();
  snap.params[3].name = "not.a.real.parameter";
  CHECK_THROWS_AS(h.trainer.restore(snap), std::invalid_argument);
}
