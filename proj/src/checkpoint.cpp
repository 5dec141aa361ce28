#include "mgm/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "mgm/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are written by memcpy and assume a little-endian host");

namespace mgm {

namespace {

constexpr char kMagic[4] = {'M', 'G', 'D', 'C'};
constexpr std::uint8_t kDtypeF32 = 0;

std::array<std::uint32_t, 256> make_crc_table() {
  std::array<std::uint32_t, 256> table{};
  for (std::uint32_t i = 0; i < 256; ++i) {
    std::uint32_t c = i;
    for (int b = 0; b < 8; ++b) {
      c = (c & 1u) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
    }
    table[i] = c;
  }
  return table;
}

template <typename T>
void put(std::string& out, const T& value) {
  const char* p = reinterpret_cast<const char*>(&value);
  out.append(p, sizeof(T));
}

void put_str(std::string& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.append(s);
}

// Sequential reader tracking the byte offset so every truncation error can
// say where the file ended relative to what was expected.
struct Cursor {
  const std::string& buf;
  std::size_t pos = 0;

  void need(std::size_t n, const char* what) const {
    if (pos + n > buf.size()) {
      throw FormatError("truncated checkpoint: " + std::string(what) + " needs " +
                        std::to_string(n) + " bytes at offset " + std::to_string(pos) +
                        ", file has " + std::to_string(buf.size()));
    }
  }
  template <typename T>
  T take(const char* what) {
    need(sizeof(T), what);
    T value;
    std::memcpy(&value, buf.data() + pos, sizeof(T));
    pos += sizeof(T);
    return value;
  }
  std::string take_str(const char* what) {
    const auto len = take<std::uint32_t>(what);
    need(len, what);
    std::string s = buf.substr(pos, len);
    pos += len;
    return s;
  }
};

}  // namespace

std::uint32_t crc32_ieee(const unsigned char* data, std::size_t len) {
  static const std::array<std::uint32_t, 256> table = make_crc_table();
  std::uint32_t c = 0xFFFFFFFFu;
  for (std::size_t i = 0; i < len; ++i) {
    c = table[(c ^ data[i]) & 0xFFu] ^ (c >> 8);
  }
  return c ^ 0xFFFFFFFFu;
}

const nn::Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) {
      return &t;
    }
  }
  return nullptr;
}

std::int64_t Checkpoint::meta_int(const std::string& key, std::int64_t fallback) const {
  const auto it = metadata.find(key);
  return it == metadata.end() ? fallback : std::stoll(it->second);
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::string out;
  out.append(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, ck.version);
  put_str(out, ck.config_text);

  put<std::uint32_t>(out, static_cast<std::uint32_t>(ck.metadata.size()));
  for (const auto& [key, value] : ck.metadata) {
    put_str(out, key);
    put_str(out, value);
  }

  put<std::uint32_t>(out, static_cast<std::uint32_t>(ck.tensors.size()));
  for (const auto& [name, t] : ck.tensors) {
    put_str(out, name);
    put<std::uint8_t>(out, kDtypeF32);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (int d : t.shape()) {
      put<std::int32_t>(out, d);
    }
    const std::size_t bytes = t.numel() * sizeof(float);
    out.append(reinterpret_cast<const char*>(t.data().data()), bytes);
  }

  put<std::uint32_t>(out,
                     crc32_ieee(reinterpret_cast<const unsigned char*>(out.data()), out.size()));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) {
    throw IoError("cannot write checkpoint: " + path);
  }
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  f.flush();
  if (!f) {
    throw IoError("short write while saving checkpoint: " + path);
  }
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    throw IoError("cannot open checkpoint: " + path);
  }
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  Cursor cur{buf};
  cur.need(sizeof(kMagic), "magic");
  if (std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0) {
    throw FormatError("not a checkpoint file (bad magic): " + path);
  }
  cur.pos += sizeof(kMagic);

  Checkpoint ck;
  ck.version = cur.take<std::uint32_t>("version");
  if (ck.version > kCheckpointVersion) {
    throw FormatError("checkpoint version " + std::to_string(ck.version) +
                      " is newer than supported version " + std::to_string(kCheckpointVersion) +
                      ": " + path);
  }
  ck.config_text = cur.take_str("config block");

  const auto meta_count = cur.take<std::uint32_t>("metadata count");
  for (std::uint32_t i = 0; i < meta_count; ++i) {
    std::string key = cur.take_str("metadata key");
    ck.metadata[key] = cur.take_str("metadata value");
  }

  const auto tensor_count = cur.take<std::uint32_t>("tensor count");
  for (std::uint32_t i = 0; i < tensor_count; ++i) {
    std::string name = cur.take_str("tensor name");
    const auto dtype = cur.take<std::uint8_t>("tensor dtype");
    if (dtype != kDtypeF32) {
      throw FormatError("unknown dtype code " + std::to_string(dtype) + " for tensor '" + name +
                        "'");
    }
    const auto rank = cur.take<std::uint32_t>("tensor rank");
    std::vector<int> shape;
    std::size_t numel = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      const auto d = cur.take<std::int32_t>("tensor dim");
      if (d < 0) {
        throw FormatError("negative dimension in tensor '" + name + "'");
      }
      shape.push_back(d);
      numel *= static_cast<std::size_t>(d);
    }
    const std::size_t bytes = numel * sizeof(float);
    cur.need(bytes, "tensor payload");
    std::vector<float> data(numel);
    std::memcpy(data.data(), buf.data() + cur.pos, bytes);
    cur.pos += bytes;
    ck.tensors.emplace_back(std::move(name),
                            nn::Tensor::from_data(std::move(shape), std::move(data)));
  }

  const std::uint32_t stored = cur.take<std::uint32_t>("checksum");
  const std::uint32_t computed = crc32_ieee(
      reinterpret_cast<const unsigned char*>(buf.data()), cur.pos - sizeof(std::uint32_t));
  if (stored != computed) {
    throw FormatError("checkpoint checksum mismatch (stored " + std::to_string(stored) +
                      ", computed " + std::to_string(computed) + "): " + path);
  }
  if (cur.pos != buf.size()) {
    throw FormatError("trailing garbage after checksum at offset " + std::to_string(cur.pos) +
                      ": " + path);
  }
  return ck;
}

void restore_tensors(const Checkpoint& ck,
                     const std::vector<std::pair<std::string, nn::Tensor>>& named) {
  for (const auto& [name, target] : named) {
    const nn::Tensor* src = ck.find(name);
    if (src == nullptr) {
      throw FormatError("checkpoint is missing tensor '" + name + "'");
    }
    if (src->shape() != target.shape()) {
      throw DimensionError("checkpoint tensor '" + name + "' has shape " +
                           nn::shape_str(src->shape()) + ", model wants " +
                           nn::shape_str(target.shape()));
    }
    nn::Tensor handle = target;  // shared storage; writes land in the model
    handle.data() = src->data();
  }
}

}  // namespace mgm
