#include "gaitlab/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>

#include "gaitlab/hash.hpp"
#include "gaitlab/io.hpp"

namespace gaitlab {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'G', 'A', 'I', 'T', 'C', 'K', 'P', 'T'};

template <class T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <class T>
T get(const std::string& in, size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw ParseError("", "checkpoint is truncated");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

ActorCritic<float> Checkpoint::policy() const {
  ActorCritic<float> net(shape());
  if (params.size() != net.num_params()) throw ParseError("", "checkpoint parameter count does not match its network");
  net.params() = params;
  return net;
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointSchemaVersion);
  const std::string meta = ckpt.meta.dump();
  put<std::uint64_t>(out, meta.size());
  out += meta;
  put<std::uint64_t>(out, static_cast<std::uint64_t>(ckpt.params.size()));
  out.append(reinterpret_cast<const char*>(ckpt.params.data()), sizeof(float) * ckpt.params.size());
  put<std::uint64_t>(out, fnv1a64(out));
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw ParseError("", "not a checkpoint file");
  size_t pos = sizeof(kMagic);
  const auto schema = get<std::uint32_t>(bytes, pos);
  if (schema != kCheckpointSchemaVersion) throw ParseError("", "unsupported checkpoint schema");
  const auto meta_len = get<std::uint64_t>(bytes, pos);
  if (pos + meta_len > bytes.size()) throw ParseError("", "checkpoint is truncated");
  Checkpoint ckpt;
  try {
    ckpt.meta = nlohmann::json::parse(bytes.substr(pos, meta_len));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("", std::string("checkpoint metadata is corrupt: ") + e.what());
  }
  pos += meta_len;
  const auto count = get<std::uint64_t>(bytes, pos);
  if (pos + count * sizeof(float) + sizeof(std::uint64_t) != bytes.size())
    throw ParseError("", "checkpoint is truncated");
  ckpt.params.resize(static_cast<Eigen::Index>(count));
  std::memcpy(ckpt.params.data(), bytes.data() + pos, count * sizeof(float));
  pos += count * sizeof(float);
  const std::uint64_t stored = get<std::uint64_t>(bytes, pos);
  if (stored != fnv1a64(std::string_view(bytes.data(), bytes.size() - sizeof(std::uint64_t))))
    throw ParseError("", "checkpoint checksum mismatch");
  ckpt.hash = content_hash(bytes);
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file_atomic(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

}  // namespace gaitlab
