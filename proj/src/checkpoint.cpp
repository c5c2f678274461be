#include "partgait/model/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "partgait/errors.hpp"

namespace partgait::model {

namespace {

constexpr char kMagic[8] = {'P', 'G', 'C', 'K', '0', '0', '0', '1'};

template <typename T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

}  // namespace

void tensor_archive::put(const std::string& name, const tensorf& t) {
  tensors[name] = t;
}

const tensorf& tensor_archive::get(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end())
    throw checkpoint_mismatch_error("archive has no tensor '" + name + "'");
  return it->second;
}

bool tensor_archive::has(const std::string& name) const {
  return tensors.count(name) != 0;
}

void tensor_archive::save(const std::string& path) const {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw io_error("cannot open '" + tmp + "' for writing");
    os.write(kMagic, sizeof(kMagic));
    write_pod<uint64_t>(os, meta_json.size());
    os.write(meta_json.data(), static_cast<std::streamsize>(meta_json.size()));
    write_pod<uint32_t>(os, static_cast<uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
      write_pod<uint16_t>(os, static_cast<uint16_t>(name.size()));
      os.write(name.data(), static_cast<std::streamsize>(name.size()));
      write_pod<uint8_t>(os, static_cast<uint8_t>(t.ndim()));
      for (int i = 0; i < t.ndim(); ++i) write_pod<int64_t>(os, t.dim(i));
      os.write(reinterpret_cast<const char*>(t.data()),
               static_cast<std::streamsize>(t.numel() * sizeof(float)));
    }
    if (!os) throw io_error("write failed for '" + tmp + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw io_error("cannot move '" + tmp + "' into place");
}

tensor_archive tensor_archive::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw io_error("cannot open checkpoint '" + path + "'");
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw checkpoint_mismatch_error("'" + path + "' is not a checkpoint");

  tensor_archive ar;
  const auto meta_len = read_pod<uint64_t>(is);
  ar.meta_json.resize(meta_len);
  is.read(ar.meta_json.data(), static_cast<std::streamsize>(meta_len));

  const auto count = read_pod<uint32_t>(is);
  for (uint32_t i = 0; i < count; ++i) {
    const auto name_len = read_pod<uint16_t>(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const int ndim = read_pod<uint8_t>(is);
    std::vector<int64_t> shape(static_cast<size_t>(ndim));
    for (auto& d : shape) d = read_pod<int64_t>(is);
    tensorf t(shape);
    is.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.numel() * sizeof(float)));
    if (!is) throw checkpoint_mismatch_error("truncated checkpoint '" + path + "'");
    ar.tensors.emplace(std::move(name), std::move(t));
  }
  return ar;
}

}  // namespace partgait::model
