#include "gmlab/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "gmlab/error.hpp"

namespace gmlab {

namespace {

constexpr char kMagic[] = "GMLAB001";

std::uint64_t to_le_bits(double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  if constexpr (std::endian::native == std::endian::big) {
    bits = __builtin_bswap64(bits);
  }
  return bits;
}

double from_le_bits(std::uint64_t bits) {
  if constexpr (std::endian::native == std::endian::big) {
    bits = __builtin_bswap64(bits);
  }
  return std::bit_cast<double>(bits);
}

std::size_t numel(const Shape& s) {
  std::size_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

}  // namespace

void write_container(const std::string& path, const std::vector<Blob>& blobs) {
  std::ostringstream header;
  header << kMagic << "\n";
  std::size_t offset = 0;
  for (const auto& b : blobs) {
    if (b.name.empty() || b.name.find_first_of(" \n") != std::string::npos) {
      throw ContractError("write_container: invalid blob name");
    }
    if (numel(b.shape) != b.data.size()) {
      throw ContractError("write_container: shape does not match data size");
    }
    header << b.name << " ";
    for (std::size_t i = 0; i < b.shape.size(); ++i) {
      header << (i ? "x" : "") << b.shape[i];
    }
    if (b.shape.empty()) header << "1";  // rank-0 scalar stored as one value
    header << " " << offset << "\n";
    offset += 8 * b.data.size();
  }
  header << "end\n";

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("write_container: cannot open " + path);
  const std::string h = header.str();
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  for (const auto& b : blobs) {
    for (double v : b.data) {
      const std::uint64_t bits = to_le_bits(v);
      char buf[8];
      std::memcpy(buf, &bits, 8);
      out.write(buf, 8);
    }
  }
  if (!out) throw IoError("write_container: write failed for " + path);
}

std::vector<Blob> read_container(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("read_container: cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != kMagic) {
    throw IoError("read_container: bad magic in " + path);
  }
  struct Entry {
    std::string name;
    Shape shape;
    std::size_t offset;
  };
  std::vector<Entry> entries;
  while (std::getline(in, line)) {
    if (line == "end") break;
    std::istringstream ls(line);
    Entry e;
    std::string dims;
    if (!(ls >> e.name >> dims >> e.offset)) {
      throw IoError("read_container: malformed manifest line: " + line);
    }
    std::istringstream ds(dims);
    std::string tok;
    while (std::getline(ds, tok, 'x')) {
      e.shape.push_back(static_cast<std::size_t>(std::stoull(tok)));
    }
    if (e.shape.empty()) throw IoError("read_container: empty shape");
    entries.push_back(std::move(e));
  }
  if (line != "end") throw IoError("read_container: missing end marker");

  const std::streampos payload_start = in.tellg();
  std::vector<Blob> blobs;
  blobs.reserve(entries.size());
  for (const auto& e : entries) {
    Blob b;
    b.name = e.name;
    b.shape = e.shape;
    const std::size_t n = numel(e.shape);
    b.data.resize(n);
    in.seekg(payload_start + static_cast<std::streamoff>(e.offset));
    for (std::size_t i = 0; i < n; ++i) {
      char buf[8];
      in.read(buf, 8);
      if (!in) throw IoError("read_container: truncated payload in " + path);
      std::uint64_t bits;
      std::memcpy(&bits, buf, 8);
      b.data[i] = from_le_bits(bits);
    }
    blobs.push_back(std::move(b));
  }
  return blobs;
}

void save_checkpoint(const std::string& path, const NamedParams& params) {
  std::vector<Blob> blobs;
  blobs.reserve(params.size());
  for (const auto& [name, t] : params) {
    blobs.push_back({name, t.shape(), t.values()});
  }
  write_container(path, blobs);
}

void load_checkpoint(const std::string& path, NamedParams& params) {
  const std::vector<Blob> blobs = read_container(path);
  if (blobs.size() != params.size()) {
    throw ContractError("load_checkpoint: parameter count mismatch");
  }
  for (std::size_t i = 0; i < blobs.size(); ++i) {
    auto& [name, t] = params[i];
    const Blob& b = blobs[i];
    if (b.name != name) {
      throw ContractError("load_checkpoint: name mismatch: expected " + name +
                          ", found " + b.name);
    }
    Shape want = t.shape();
    if (want.empty()) want = {1};  // scalars round-trip through rank-1
    if (b.shape != want) {
      throw ContractError("load_checkpoint: shape mismatch for " + name);
    }
    t.mutable_values() = b.data;
  }
}

}  // namespace gmlab
