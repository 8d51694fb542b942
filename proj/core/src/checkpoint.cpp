#include "avec/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

namespace avec {

static_assert(std::endian::native == std::endian::little,
              "checkpoint container assumes a little-endian host");

namespace {

constexpr std::array<unsigned char, 8> kMagic = {'A', 'V', 'E', 'C', 'C', 'K', 'P', '1'};

void append_u32(std::vector<unsigned char>& buf, std::uint32_t v) {
  const auto* p = reinterpret_cast<const unsigned char*>(&v);
  buf.insert(buf.end(), p, p + 4);
}

void append_u64(std::vector<unsigned char>& buf, std::uint64_t v) {
  const auto* p = reinterpret_cast<const unsigned char*>(&v);
  buf.insert(buf.end(), p, p + 8);
}

void append_doubles(std::vector<unsigned char>& buf, const std::vector<double>& v) {
  const auto* p = reinterpret_cast<const unsigned char*>(v.data());
  buf.insert(buf.end(), p, p + v.size() * sizeof(double));
}

}  // namespace

std::uint32_t crc32(const unsigned char* data, std::size_t len) {
  static const auto table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  std::uint32_t c = 0xFFFFFFFFu;
  for (std::size_t i = 0; i < len; ++i) c = table[(c ^ data[i]) & 0xFFu] ^ (c >> 8);
  return c ^ 0xFFFFFFFFu;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  using nlohmann::json;
  json header;
  header["config"] = json::parse(train_config_to_json(ckpt.config));
  header["epoch"] = ckpt.epoch;
  header["step"] = ckpt.step;
  header["rng"] = ckpt.rng_states;
  json params = json::array();
  std::uint64_t offset = 0;  // in doubles, into the data section
  for (const Checkpoint::Entry& e : ckpt.params) {
    json p;
    p["name"] = e.name;
    p["shape"] = e.shape;
    p["step"] = e.step;
    p["offset"] = offset;
    params.push_back(std::move(p));
    offset += 3 * e.values.size();  // values, then m, then v
  }
  header["params"] = std::move(params);
  header["data_len"] = offset;
  const std::string header_text = header.dump();

  std::vector<unsigned char> buf;
  buf.insert(buf.end(), kMagic.begin(), kMagic.end());
  append_u32(buf, Checkpoint::kVersion);
  append_u64(buf, header_text.size());
  buf.insert(buf.end(), header_text.begin(), header_text.end());
  for (const Checkpoint::Entry& e : ckpt.params) {
    append_doubles(buf, e.values);
    append_doubles(buf, e.m);
    append_doubles(buf, e.v);
  }
  append_u32(buf, crc32(buf.data(), buf.size()));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(CheckpointError::Code::io, "cannot open " + path);
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
  if (!out) throw CheckpointError(CheckpointError::Code::io, "write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  using nlohmann::json;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointError::Code::io, "cannot open " + path);
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());

  constexpr std::size_t kMinSize = 8 + 4 + 8 + 4;
  if (buf.size() < kMinSize) {
    throw CheckpointError(CheckpointError::Code::truncated,
                          path + ": file shorter than the fixed container framing");
  }
  // Integrity first: a file cut anywhere fails here before any state is built.
  std::uint32_t stored_crc;
  std::memcpy(&stored_crc, buf.data() + buf.size() - 4, 4);
  if (crc32(buf.data(), buf.size() - 4) != stored_crc) {
    throw CheckpointError(CheckpointError::Code::checksum_mismatch,
                          path + ": checksum mismatch (corrupt or truncated file)");
  }
  if (!std::equal(kMagic.begin(), kMagic.end(), buf.begin())) {
    throw CheckpointError(CheckpointError::Code::bad_magic, path + ": bad magic bytes");
  }
  std::uint32_t version;
  std::memcpy(&version, buf.data() + 8, 4);
  if (version != Checkpoint::kVersion) {
    throw CheckpointError(CheckpointError::Code::version_mismatch,
                          path + ": format version " + std::to_string(version) +
                              ", expected " + std::to_string(Checkpoint::kVersion));
  }
  std::uint64_t header_len;
  std::memcpy(&header_len, buf.data() + 12, 8);
  const std::size_t header_begin = 20;
  if (header_begin + header_len + 4 > buf.size()) {
    throw CheckpointError(CheckpointError::Code::truncated,
                          path + ": declared header exceeds file size");
  }
  json header;
  try {
    header = json::parse(buf.begin() + static_cast<std::ptrdiff_t>(header_begin),
                         buf.begin() + static_cast<std::ptrdiff_t>(header_begin + header_len));
  } catch (const json::exception& e) {
    throw CheckpointError(CheckpointError::Code::header_invalid,
                          path + ": malformed header: " + e.what());
  }

  Checkpoint ckpt;
  try {
    ckpt.config = train_config_from_json(header.at("config").dump());
    ckpt.epoch = header.at("epoch").get<std::uint64_t>();
    ckpt.step = header.at("step").get<std::uint64_t>();
    ckpt.rng_states =
        header.at("rng").get<std::map<std::string, std::string>>();
    const std::uint64_t data_len = header.at("data_len").get<std::uint64_t>();
    const std::size_t data_begin = header_begin + header_len;
    if (data_begin + data_len * sizeof(double) + 4 != buf.size()) {
      throw CheckpointError(CheckpointError::Code::truncated,
                            path + ": data section size disagrees with header");
    }
    const auto* data = reinterpret_cast<const double*>(buf.data() + data_begin);
    for (const json& p : header.at("params")) {
      Checkpoint::Entry e;
      e.name = p.at("name").get<std::string>();
      e.shape = p.at("shape").get<Shape>();
      e.step = p.at("step").get<std::uint64_t>();
      std::size_t count = 1;
      for (std::size_t d : e.shape) count *= d;
      const auto offset = p.at("offset").get<std::uint64_t>();
      if (offset + 3 * count > data_len) {
        throw CheckpointError(CheckpointError::Code::truncated,
                              path + ": parameter '" + e.name + "' exceeds data section");
      }
      e.values.assign(data + offset, data + offset + count);
      e.m.assign(data + offset + count, data + offset + 2 * count);
      e.v.assign(data + offset + 2 * count, data + offset + 3 * count);
      ckpt.params.push_back(std::move(e));
    }
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError(CheckpointError::Code::header_invalid,
                          path + ": invalid header contents: " + e.what());
  }
  return ckpt;
}

void restore_parameters(ModelSet& models, const Checkpoint& ckpt) {
  const std::vector<Parameter*> params = models.parameters();
  if (ckpt.params.size() != params.size()) {
    throw std::invalid_argument("restore: checkpoint has " +
                                std::to_string(ckpt.params.size()) +
                                " parameters, model has " +
                                std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter* p = params[i];
    const Checkpoint::Entry& e = ckpt.params[i];
    if (e.name != p->name || e.shape != p->tensor.shape()) {
      throw std::invalid_argument("restore: mismatch at parameter '" + p->name + "'");
    }
    std::copy(e.values.begin(), e.values.end(), p->tensor.values_mut().begin());
    p->m = e.m;
    p->v = e.v;
    p->step = e.step;
    p->tensor.zero_grad();
  }
}

}  // namespace avec
