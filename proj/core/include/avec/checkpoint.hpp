#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "avec/config.hpp"
#include "avec/tensor.hpp"

namespace avec {

class CheckpointError : public std::runtime_error {
 public:
  enum class Code { io, bad_magic, version_mismatch, truncated, checksum_mismatch, header_invalid };

  CheckpointError(Code code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

/// Complete training state: every named parameter with its optimizer moments
/// and step counter, the RNG stream states, and an echo of the config.
/// A save -> load -> save round trip is byte-identical.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  TrainConfig config;
  std::uint64_t epoch = 0;
  std::uint64_t step = 0;

  struct Entry {
    std::string name;
    Shape shape;
    std::uint64_t step = 0;
    std::vector<double> values, m, v;
  };
  std::vector<Entry> params;
  std::map<std::string, std::string> rng_states;
};

/// Little-endian container: 8-byte magic, u32 version, u64 header length,
/// JSON header (names, shapes, offsets, RNG states, config echo), raw 64-bit
/// values, trailing CRC32 over everything before it.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

/// Copies parameter values, moments and step counters into a model whose
/// parameter list matches the checkpoint entries by name and shape.
void restore_parameters(ModelSet& models, const Checkpoint& ckpt);

std::uint32_t crc32(const unsigned char* data, std::size_t len);

}  // namespace avec
