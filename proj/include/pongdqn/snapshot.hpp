#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "pongdqn/network.hpp"

namespace pongdqn {

// Snapshot stream layout (all integers little-endian):
//   magic "DQN2" | version u32 | scalar width u32 | in_c,in_h,in_w u32
//   | layer count u32 | layer records | step counter u64
//   | raw weight/bias arrays in declaration order
inline constexpr char kSnapshotMagic[4] = {'D', 'Q', 'N', '2'};
inline constexpr std::uint32_t kSnapshotVersion = 1;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

inline void put_u64(std::string& out, std::uint64_t v) {
  char b[8];
  std::memcpy(b, &v, 8);
  out.append(b, 8);
}

class ByteReader {
 public:
  explicit ByteReader(const std::string& bytes) : bytes_(bytes) {}

  std::uint32_t u32() { return get<std::uint32_t>(); }
  std::uint64_t u64() { return get<std::uint64_t>(); }

  void raw(void* dst, std::size_t n) {
    if (pos_ + n > bytes_.size())
      throw SnapshotError("snapshot stream truncated at byte " + std::to_string(pos_));
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }

  void expect_end() const {
    if (pos_ != bytes_.size())
      throw SnapshotError("snapshot stream has " + std::to_string(bytes_.size() - pos_) +
                          " trailing bytes");
  }

 private:
  template <typename U>
  U get() {
    U v;
    raw(&v, sizeof(U));
    return v;
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

enum : std::uint32_t { kTagConv = 1, kTagDense = 2, kTagRelu = 3 };

}  // namespace detail

template <typename T>
std::string save_snapshot(const Network<T>& net) {
  std::string out(kSnapshotMagic, 4);
  detail::put_u32(out, kSnapshotVersion);
  detail::put_u32(out, sizeof(T));
  const Architecture& a = net.arch();
  detail::put_u32(out, static_cast<std::uint32_t>(a.in_c));
  detail::put_u32(out, static_cast<std::uint32_t>(a.in_h));
  detail::put_u32(out, static_cast<std::uint32_t>(a.in_w));
  detail::put_u32(out, static_cast<std::uint32_t>(a.layers.size()));
  for (const LayerSpec& l : a.layers) {
    if (const auto* cv = std::get_if<ConvSpec>(&l)) {
      detail::put_u32(out, detail::kTagConv);
      detail::put_u32(out, static_cast<std::uint32_t>(cv->filters));
      detail::put_u32(out, static_cast<std::uint32_t>(cv->kh));
      detail::put_u32(out, static_cast<std::uint32_t>(cv->kw));
      detail::put_u32(out, static_cast<std::uint32_t>(cv->stride));
    } else if (const auto* d = std::get_if<DenseSpec>(&l)) {
      detail::put_u32(out, detail::kTagDense);
      detail::put_u32(out, static_cast<std::uint32_t>(d->units));
    } else {
      detail::put_u32(out, detail::kTagRelu);
    }
  }
  detail::put_u64(out, net.train_steps());
  for (const Tensor<T>* p : net.params())
    out.append(reinterpret_cast<const char*>(p->data()), p->numel() * sizeof(T));
  return out;
}

template <typename T>
Network<T> load_snapshot(const std::string& bytes) {
  detail::ByteReader r(bytes);
  char magic[4];
  r.raw(magic, 4);
  if (std::memcmp(magic, kSnapshotMagic, 4) != 0)
    throw SnapshotError("bad magic bytes; not a network snapshot");
  const std::uint32_t version = r.u32();
  if (version != kSnapshotVersion)
    throw SnapshotError("unsupported snapshot version " + std::to_string(version));
  const std::uint32_t width = r.u32();
  if (width != sizeof(T))
    throw SnapshotError("snapshot holds " + std::to_string(width) +
                        "-byte scalars, expected " + std::to_string(sizeof(T)));

  Architecture a;
  a.in_c = static_cast<int>(r.u32());
  a.in_h = static_cast<int>(r.u32());
  a.in_w = static_cast<int>(r.u32());
  const std::uint32_t n_layers = r.u32();
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    switch (r.u32()) {
      case detail::kTagConv: {
        ConvSpec cv;
        cv.filters = static_cast<int>(r.u32());
        cv.kh = static_cast<int>(r.u32());
        cv.kw = static_cast<int>(r.u32());
        cv.stride = static_cast<int>(r.u32());
        a.layers.emplace_back(cv);
        break;
      }
      case detail::kTagDense:
        a.layers.emplace_back(DenseSpec{static_cast<int>(r.u32())});
        break;
      case detail::kTagRelu:
        a.layers.emplace_back(ReluSpec{});
        break;
      default:
        throw SnapshotError("unknown layer tag in snapshot");
    }
  }
  const std::uint64_t steps = r.u64();

  try {
    Network<T> net(a, 0);
    net.set_train_steps(steps);
    for (Tensor<T>* p : net.params()) r.raw(p->data(), p->numel() * sizeof(T));
    r.expect_end();
    return net;
  } catch (const ConfigError& e) {
    throw SnapshotError(std::string("snapshot architecture invalid: ") + e.what());
  }
}

inline void write_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw SnapshotError("cannot open " + path + " for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw SnapshotError("short write to " + path);
}

inline std::string read_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw SnapshotError("cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return bytes;
}

template <typename T>
void save_snapshot_file(const Network<T>& net, const std::string& path) {
  write_bytes(path, save_snapshot(net));
}

template <typename T>
Network<T> load_snapshot_file(const std::string& path) {
  return load_snapshot<T>(read_bytes(path));
}

}  // namespace pongdqn
