#include "greyreid/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <iterator>

#include <zlib.h>

#include "greyreid/errors.hpp"

namespace greyreid {

namespace {

constexpr char kMagic[4] = {'G', 'R', 'C', 'K'};

template <typename T>
void put(std::string& buf, T v) {
  buf.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_tensor(std::string& buf, std::uint8_t kind, const std::string& name, const Tensor& t) {
  put<std::uint8_t>(buf, kind);
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(name.size()));
  buf += name;
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(t.ndim()));
  for (int d : t.shape()) put<std::uint32_t>(buf, static_cast<std::uint32_t>(d));
  buf.append(reinterpret_cast<const char*>(t.data()), t.size() * sizeof(float));
}

class Reader {
 public:
  Reader(const std::string& buf, std::size_t end, const std::filesystem::path& path)
      : buf_(buf), end_(end), path_(path) {}

  template <typename T>
  T get() {
    T v{};
    read(&v, sizeof(T));
    return v;
  }
  void read(void* dst, std::size_t n) {
    if (pos_ + n > end_) throw IntegrityError("truncated checkpoint " + path_.string());
    std::memcpy(dst, buf_.data() + pos_, n);
    pos_ += n;
  }
  std::string str(std::size_t n) {
    std::string s(n, '\0');
    read(s.data(), n);
    return s;
  }
  bool done() const { return pos_ == end_; }

 private:
  const std::string& buf_;
  std::size_t end_;
  std::size_t pos_ = 0;
  const std::filesystem::path& path_;
};

std::uint32_t crc(const char* data, std::size_t n, std::uint32_t seed = 0) {
  uLong c = seed ? seed : crc32(0L, Z_NULL, 0);
  while (n > 0) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    c = crc32(c, reinterpret_cast<const Bytef*>(data), chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(c);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::string buf(kMagic, 4);
  put<std::uint32_t>(buf, kCheckpointVersion);
  nlohmann::json header = ckpt.header;
  header["network"] = ckpt.network;
  const std::string h = header.dump();
  put<std::uint64_t>(buf, h.size());
  buf += h;
  put<std::uint64_t>(buf, ckpt.params.size() + ckpt.buffers.size() + ckpt.momentum.size());
  for (const auto& [name, t] : ckpt.params) put_tensor(buf, 0, name, t);
  for (const auto& [name, t] : ckpt.buffers) put_tensor(buf, 1, name, t);
  for (const auto& [name, t] : ckpt.momentum) put_tensor(buf, 2, name, t);
  put<std::uint32_t>(buf, crc(buf.data(), buf.size()));

  // Write-then-rename so a crash never leaves a half-written checkpoint.
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint " + path.string());
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw DataError("write failed: " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IntegrityError("cannot open checkpoint " + path.string());
  const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < 12 || std::memcmp(buf.data(), kMagic, 4) != 0) {
    throw IntegrityError("not a checkpoint (bad magic): " + path.string());
  }
  std::uint32_t stored = 0;
  std::memcpy(&stored, buf.data() + buf.size() - 4, 4);
  if (crc(buf.data(), buf.size() - 4) != stored) {
    throw IntegrityError("checkpoint checksum mismatch (corrupted file): " + path.string());
  }
  Reader r(buf, buf.size() - 4, path);
  r.str(4);
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw IntegrityError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                         std::to_string(kCheckpointVersion) + ")");
  }
  Checkpoint ckpt;
  try {
    ckpt.header = nlohmann::json::parse(r.str(r.get<std::uint64_t>()));
    ckpt.network = ckpt.header.at("network").get<NetworkConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("bad checkpoint header: ") + e.what());
  }
  const auto count = r.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto kind = r.get<std::uint8_t>();
    const std::string name = r.str(r.get<std::uint32_t>());
    const auto ndim = r.get<std::uint32_t>();
    if (ndim > 8) throw IntegrityError("bad tensor rank in checkpoint");
    std::vector<int> shape(ndim);
    for (auto& d : shape) d = static_cast<int>(r.get<std::uint32_t>());
    Tensor t(shape);
    r.read(t.data(), t.size() * sizeof(float));
    switch (kind) {
      case 0: ckpt.params.emplace(name, std::move(t)); break;
      case 1: ckpt.buffers.emplace(name, std::move(t)); break;
      case 2: ckpt.momentum.emplace(name, std::move(t)); break;
      default: throw IntegrityError("bad tensor kind in checkpoint");
    }
  }
  if (!r.done()) throw IntegrityError("trailing bytes in checkpoint " + path.string());
  return ckpt;
}

void check_compatible(const NetworkConfig& expected, const NetworkConfig& found) {
  auto fail = [](const std::string& field, const std::string& want, const std::string& got) {
    throw IntegrityError("checkpoint incompatible: " + field + " is " + got + ", expected " + want);
  };
  if (expected.num_classes != found.num_classes) {
    fail("num_classes", std::to_string(expected.num_classes), std::to_string(found.num_classes));
  }
  if (expected.backbone != found.backbone) fail("backbone", backbone_name(expected.backbone), backbone_name(found.backbone));
  if (expected.fusion != found.fusion) fail("fusion", fusion_name(expected.fusion), fusion_name(found.fusion));
  if (expected.dim_grey != found.dim_grey || expected.dim_rgb != found.dim_rgb || expected.dim_joint != found.dim_joint) {
    fail("embedding dims", std::to_string(expected.global_dim()), std::to_string(found.global_dim()));
  }
  if (!(expected == found)) fail("network config", nlohmann::json(expected).dump(), nlohmann::json(found).dump());
}

void capture_model(TwoStreamNet& net, Checkpoint& ckpt) {
  ckpt.network = net.config();
  auto refs = net.state();
  ckpt.params.clear();
  ckpt.buffers.clear();
  for (const auto& p : refs.params) ckpt.params.emplace(p.name, *p.value);
  for (const auto& b : refs.buffers) ckpt.buffers.emplace(b.name, *b.value);
}

void restore_model(TwoStreamNet& net, const Checkpoint& ckpt) {
  check_compatible(net.config(), ckpt.network);
  auto refs = net.state();
  auto copy = [](const std::map<std::string, Tensor>& from, const std::string& name, Tensor& to) {
    auto it = from.find(name);
    if (it == from.end()) throw IntegrityError("checkpoint is missing tensor " + name);
    if (!it->second.same_shape(to)) {
      throw IntegrityError("checkpoint tensor " + name + " has shape " + shape_string(it->second.shape()) +
                           ", expected " + shape_string(to.shape()));
    }
    to = it->second;
  };
  for (auto& p : refs.params) copy(ckpt.params, p.name, *p.value);
  for (auto& b : refs.buffers) copy(ckpt.buffers, b.name, *b.value);
  if (ckpt.params.size() != refs.params.size() || ckpt.buffers.size() != refs.buffers.size()) {
    throw IntegrityError("checkpoint holds tensors the network does not have");
  }
}

TwoStreamNet load_model(const std::filesystem::path& path) {
  const Checkpoint ckpt = load_checkpoint(path);
  TwoStreamNet net(ckpt.network);
  restore_model(net, ckpt);
  return net;
}

namespace {
constexpr char kWeightsMagic[4] = {'G', 'R', 'B', 'W'};
}  // namespace

void save_backbone_weights(const std::filesystem::path& path, const std::map<std::string, Tensor>& tensors) {
  std::string buf(kWeightsMagic, 4);
  put<std::uint32_t>(buf, kBackboneWeightsVersion);
  put<std::uint64_t>(buf, tensors.size());
  for (const auto& [name, t] : tensors) {
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(name.size()));
    buf += name;
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(t.ndim()));
    for (int d : t.shape()) put<std::uint32_t>(buf, static_cast<std::uint32_t>(d));
    buf.append(reinterpret_cast<const char*>(t.data()), t.size() * sizeof(float));
  }
  std::ofstream out(path, std::ios::binary);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw DataError("cannot write " + path.string());
}

std::map<std::string, Tensor> load_backbone_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open backbone weights " + path.string());
  const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < 4 || std::memcmp(buf.data(), kWeightsMagic, 4) != 0) {
    throw IntegrityError("not a backbone weight file (bad magic): " + path.string());
  }
  Reader r(buf, buf.size(), path);
  r.str(4);
  const auto version = r.get<std::uint32_t>();
  if (version != kBackboneWeightsVersion) {
    throw IntegrityError("unsupported backbone weight version " + std::to_string(version));
  }
  std::map<std::string, Tensor> tensors;
  const auto count = r.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::string name = r.str(r.get<std::uint32_t>());
    const auto ndim = r.get<std::uint32_t>();
    if (ndim > 8) throw IntegrityError("bad tensor rank in backbone weights");
    std::vector<int> shape(ndim);
    for (auto& d : shape) d = static_cast<int>(r.get<std::uint32_t>());
    Tensor t(shape);
    r.read(t.data(), t.size() * sizeof(float));
    tensors.emplace(name, std::move(t));
  }
  if (!r.done()) throw IntegrityError("trailing bytes in backbone weights " + path.string());
  return tensors;
}

void apply_backbone_weights(TwoStreamNet& net, const std::map<std::string, Tensor>& tensors) {
  auto refs = net.state();
  auto copy = [&](const std::string& full, Tensor& to) {
    for (const std::string prefix : {"grey_backbone.", "rgb_backbone."}) {
      if (full.rfind(prefix, 0) != 0) continue;
      const std::string name = full.substr(prefix.size());
      auto it = tensors.find(name);
      if (it == tensors.end()) throw IntegrityError("backbone weights are missing tensor " + name);
      if (!it->second.same_shape(to)) {
        throw IntegrityError("backbone tensor " + name + " has shape " + shape_string(it->second.shape()) +
                             ", expected " + shape_string(to.shape()));
      }
      to = it->second;
    }
  };
  for (auto& p : refs.params) copy(p.name, *p.value);
  for (auto& b : refs.buffers) copy(b.name, *b.value);
}

std::uint32_t parameter_checksum(TwoStreamNet& net) {
  auto refs = net.state();
  std::uint32_t c = crc(nullptr, 0);
  for (const auto& p : refs.params) c = crc(reinterpret_cast<const char*>(p.value->data()), p.value->size() * 4, c);
  for (const auto& b : refs.buffers) c = crc(reinterpret_cast<const char*>(b.value->data()), b.value->size() * 4, c);
  return c;
}

}  // namespace greyreid
