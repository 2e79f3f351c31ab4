#include "lddm/checkpoint.hpp"

#include <cstdint>
#include <fstream>
#include <sstream>
#include <vector>

namespace lddm {

void save_tensors(const std::string& path, const TensorMapF32& tensors) {
  std::ostringstream header;
  header << "LDDM-CKPT v1\n";
  std::size_t offset = 0;
  for (const auto& [name, m] : tensors) {
    header << "tensor " << name << " " << m.rows() << " " << m.cols() << " f32 " << offset << "\n";
    offset += static_cast<std::size_t>(m.size()) * sizeof(float);
  }
  header << "end\n";

  std::ofstream f(path, std::ios::binary);
  if (!f) throw invalid_argument("save_tensors: cannot open " + path);
  std::string h = header.str();
  f.write(h.data(), static_cast<std::streamsize>(h.size()));
  for (const auto& [name, m] : tensors) {
    f.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(m.size() * sizeof(float)));
  }
  if (!f) throw numerical_error("save_tensors: write failed for " + path);
}

TensorMapF32 load_tensors(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw invalid_argument("load_tensors: cannot open " + path);
  std::string line;
  std::getline(f, line);
  if (line != "LDDM-CKPT v1") {
    throw invalid_argument("load_tensors: bad magic in " + path);
  }
  struct Entry {
    std::string name;
    long rows, cols;
    std::size_t offset;
  };
  std::vector<Entry> entries;
  while (std::getline(f, line)) {
    if (line == "end") break;
    std::istringstream is(line);
    std::string tag, name, dtype;
    Entry e;
    is >> tag >> name >> e.rows >> e.cols >> dtype >> e.offset;
    if (!is || tag != "tensor" || dtype != "f32") {
      throw invalid_argument("load_tensors: malformed manifest line: " + line);
    }
    e.name = name;
    entries.push_back(e);
  }
  std::streampos payload_start = f.tellg();
  TensorMapF32 out;
  for (const auto& e : entries) {
    ad::Mat<float> m(e.rows, e.cols);
    f.seekg(payload_start + static_cast<std::streamoff>(e.offset));
    f.read(reinterpret_cast<char*>(m.data()),
           static_cast<std::streamsize>(m.size() * sizeof(float)));
    if (!f) throw invalid_argument("load_tensors: truncated payload in " + path);
    out.emplace(e.name, std::move(m));
  }
  return out;
}

template <class S>
void pack_store(TensorMapF32& out, const std::string& prefix, const ParameterStore<S>& ps) {
  for (const auto& [name, m] : ps.tensors) {
    out[prefix + name] = m.template cast<float>();
  }
}

template <class S>
ParameterStore<S> unpack_store(const TensorMapF32& archive, const std::string& prefix) {
  ParameterStore<S> ps;
  for (const auto& [name, m] : archive) {
    if (name.rfind(prefix, 0) != 0) continue;
    std::string inner = name.substr(prefix.size());
    if (inner.rfind("ema.", 0) == 0) continue;  // prefixes nest; exact slices only
    ps.tensors[inner] = m.template cast<S>();
  }
  require(!ps.tensors.empty(), "unpack_store: no tensors under prefix " + prefix);
  return ps;
}

std::uint64_t file_content_hash(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw invalid_argument("file_content_hash: cannot open " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (f) {
    f.read(buf, sizeof(buf));
    std::streamsize got = f.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

template void pack_store<float>(TensorMapF32&, const std::string&, const ParameterStore<float>&);
template void pack_store<double>(TensorMapF32&, const std::string&, const ParameterStore<double>&);
template ParameterStore<float> unpack_store<float>(const TensorMapF32&, const std::string&);
template ParameterStore<double> unpack_store<double>(const TensorMapF32&, const std::string&);

}  // namespace lddm
