#include "pfnet/tensor/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "pfnet/errors.hpp"

namespace pfnet {

static_assert(std::endian::native == std::endian::little,
              "checkpoint IO assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'P', 'F', 'N', 'E', 'T', 'C', 'K', 'P'};

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T)))
    throw ParseError(path.string() + ": truncated checkpoint");
  return value;
}

std::string get_bytes(std::istream& in, std::uint64_t n, const std::filesystem::path& path) {
  if (n > (1ull << 32)) throw ParseError(path.string() + ": implausible record length");
  std::string s(n, '\0');
  if (n && !in.read(s.data(), static_cast<std::streamsize>(n)))
    throw ParseError(path.string() + ": truncated checkpoint");
  return s;
}

}  // namespace

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return &t;
  return nullptr;
}

const std::string& Checkpoint::header_value(const std::string& key) const {
  auto it = header.find(key);
  if (it == header.end()) throw ParseError("checkpoint header lacks key '" + key + "'");
  return it->second;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  std::string header;
  for (const auto& [key, value] : checkpoint.header) {
    if (key.find_first_of("=\n") != std::string::npos || value.find('\n') != std::string::npos)
      throw UsageError("checkpoint header entry '" + key + "' contains a reserved character");
    header += key + "=" + value + "\n";
  }

  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, Checkpoint::kVersion);
    put<std::uint64_t>(out, header.size());
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    put<std::uint64_t>(out, checkpoint.tensors.size());
    for (const auto& [name, tensor] : checkpoint.tensors) {
      put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
      out.write(name.data(), static_cast<std::streamsize>(name.size()));
      put<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.rank()));
      for (std::size_t d : tensor.shape) put<std::uint64_t>(out, d);
      out.write(reinterpret_cast<const char*>(tensor.values.data()),
                static_cast<std::streamsize>(tensor.values.size() * sizeof(double)));
    }
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw ParseError(path.string() + ": not a pfnet checkpoint");
  const auto version = get<std::uint32_t>(in, path);
  if (version != Checkpoint::kVersion)
    throw ParseError(path.string() + ": unsupported checkpoint version " + std::to_string(version));

  Checkpoint ck;
  std::istringstream header(get_bytes(in, get<std::uint64_t>(in, path), path));
  for (std::string line; std::getline(header, line);) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(path.string() + ": malformed header line '" + line + "'");
    ck.header[line.substr(0, eq)] = line.substr(eq + 1);
  }

  const auto count = get<std::uint64_t>(in, path);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = get_bytes(in, get<std::uint32_t>(in, path), path);
    const auto rank = get<std::uint32_t>(in, path);
    if (rank > 8) throw ParseError(path.string() + ": implausible rank for " + name);
    Shape shape(rank);
    for (auto& d : shape) d = get<std::uint64_t>(in, path);
    std::vector<double> values(shape_numel(shape));
    if (!in.read(reinterpret_cast<char*>(values.data()),
                 static_cast<std::streamsize>(values.size() * sizeof(double))))
      throw ParseError(path.string() + ": truncated values for " + name);
    ck.tensors.emplace_back(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  return ck;
}

}  // namespace pfnet
