#include "cmit/checkpoint.hpp"

#include <cstdint>
#include <fstream>

#include "cmit/error.hpp"

namespace cmit {

namespace {

constexpr char kMagic[8] = {'C', 'M', 'I', 'T', 'C', 'K', 'P', '1'};

template <typename T>
void write_pod(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ParseError("checkpoint: truncated file");
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<CheckpointRecord>& records,
                     const std::string& config_json) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kMagic, sizeof(kMagic));
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(config_json.size()));
  out.write(config_json.data(), static_cast<std::streamsize>(config_json.size()));
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(records.size()));
  for (const auto& r : records) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(r.name.size()));
    out.write(r.name.data(), static_cast<std::streamsize>(r.name.size()));
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(r.shape.size()));
    std::size_t n = 1;
    for (std::size_t d : r.shape) {
      write_pod<std::uint64_t>(out, d);
      n *= d;
    }
    if (n != r.data.size()) throw ArgumentError("checkpoint: shape/data mismatch in " + r.name);
    out.write(reinterpret_cast<const char*>(r.data.data()),
              static_cast<std::streamsize>(r.data.size() * sizeof(double)));
  }
  if (!out) throw IoError("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::string(magic, 8) != std::string(kMagic, 8)) {
    throw ParseError("checkpoint: bad magic in " + path.string());
  }
  Checkpoint ck;
  const auto cfg_len = read_pod<std::uint32_t>(in);
  ck.config_json.resize(cfg_len);
  in.read(ck.config_json.data(), cfg_len);
  const auto n_records = read_pod<std::uint32_t>(in);
  ck.records.resize(n_records);
  for (auto& r : ck.records) {
    const auto name_len = read_pod<std::uint32_t>(in);
    r.name.resize(name_len);
    in.read(r.name.data(), name_len);
    const auto ndim = read_pod<std::uint32_t>(in);
    r.shape.resize(ndim);
    std::size_t n = 1;
    for (auto& d : r.shape) {
      d = static_cast<std::size_t>(read_pod<std::uint64_t>(in));
      n *= d;
    }
    r.data.resize(n);
    in.read(reinterpret_cast<char*>(r.data.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw ParseError("checkpoint: truncated record " + r.name);
  }
  return ck;
}

}  // namespace cmit
