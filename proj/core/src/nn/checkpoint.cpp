#include "tiger/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "tiger/common/error.hpp"

namespace tiger::nn {
namespace {

constexpr char kMagic[8] = {'T', 'I', 'G', 'E', 'R', 'C', 'K', 'P'};
// Guards against absurd allocations from corrupt headers.
constexpr std::uint32_t kMaxRank = 8;
constexpr std::uint64_t kMaxElements = 1ULL << 32;

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

void put_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_bytes(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t get_u32(std::istream& in, const char* what) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) {
    throw InvalidInput(std::string("checkpoint: truncated while reading ") + what);
  }
  return v;
}

std::string get_bytes(std::istream& in, const char* what) {
  const std::uint32_t n = get_u32(in, what);
  std::string s(n, '\0');
  if (n > 0 && !in.read(s.data(), n)) {
    throw InvalidInput(std::string("checkpoint: truncated while reading ") + what);
  }
  return s;
}

}  // namespace

template <typename T>
Checkpoint make_checkpoint(const std::string& config, const ParameterStore<T>& store) {
  Checkpoint ck;
  ck.config = config;
  for (const auto& e : store.entries()) {
    CheckpointRecord r{e.name, e.tensor.shape(), {}};
    r.values.assign(e.tensor.data().begin(), e.tensor.data().end());
    ck.records.push_back(std::move(r));
  }
  return ck;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("checkpoint: cannot open '" + path.string() + "' for writing");
  out.write(kMagic, sizeof kMagic);
  put_u32(out, ck.version);
  put_bytes(out, ck.config);
  put_u32(out, static_cast<std::uint32_t>(ck.records.size()));
  for (const auto& r : ck.records) {
    put_bytes(out, r.name);
    put_u32(out, static_cast<std::uint32_t>(r.shape.size()));
    for (std::size_t d : r.shape) put_u32(out, static_cast<std::uint32_t>(d));
    out.write(reinterpret_cast<const char*>(r.values.data()),
              static_cast<std::streamsize>(r.values.size() * sizeof(float)));
  }
  if (!out) throw IoError("checkpoint: write failed for '" + path.string() + "'");
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot open '" + path.string() + "'");
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw InvalidInput("checkpoint: '" + path.string() + "' is not a checkpoint file");
  }
  Checkpoint ck;
  ck.version = get_u32(in, "version");
  if (ck.version != kCheckpointVersion) {
    throw InvalidInput("checkpoint: unsupported version " + std::to_string(ck.version));
  }
  ck.config = get_bytes(in, "config");
  const std::uint32_t count = get_u32(in, "parameter count");
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointRecord r;
    r.name = get_bytes(in, "parameter name");
    const std::uint32_t rank = get_u32(in, "rank");
    if (rank > kMaxRank) throw InvalidInput("checkpoint: implausible rank for '" + r.name + "'");
    std::uint64_t elements = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      r.shape.push_back(get_u32(in, "dimension"));
      elements *= r.shape.back();
    }
    if (elements > kMaxElements) {
      throw InvalidInput("checkpoint: implausible size for '" + r.name + "'");
    }
    r.values.resize(elements);
    if (!in.read(reinterpret_cast<char*>(r.values.data()),
                 static_cast<std::streamsize>(elements * sizeof(float)))) {
      throw InvalidInput("checkpoint: truncated values for '" + r.name + "'");
    }
    ck.records.push_back(std::move(r));
  }
  return ck;
}

template <typename T>
void load_parameters(const Checkpoint& ck, ParameterStore<T>& store) {
  const auto& entries = store.entries();
  if (ck.records.size() != entries.size()) {
    throw InvalidInput("checkpoint: holds " + std::to_string(ck.records.size()) +
                       " parameters, model expects " + std::to_string(entries.size()));
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& r = ck.records[i];
    if (r.name != entries[i].name || r.shape != entries[i].tensor.shape()) {
      throw InvalidInput("checkpoint: parameter " + std::to_string(i) + " is '" + r.name + "' " +
                         to_string(r.shape) + ", model expects '" + entries[i].name + "' " +
                         to_string(entries[i].tensor.shape()));
    }
    Tensor<T> t = entries[i].tensor;
    auto dst = t.mutable_data();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = static_cast<T>(r.values[k]);
  }
}

template Checkpoint make_checkpoint(const std::string&, const ParameterStore<float>&);
template Checkpoint make_checkpoint(const std::string&, const ParameterStore<double>&);
template void load_parameters(const Checkpoint&, ParameterStore<float>&);
template void load_parameters(const Checkpoint&, ParameterStore<double>&);

}  // namespace tiger::nn
