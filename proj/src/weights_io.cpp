#include "sid/weights_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace sid::io {
namespace {

constexpr char kMagic[4] = {'S', 'I', 'D', 'W'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_text(std::string& out, const std::string& s) {
  put_u32(out, std::uint32_t(s.size()));
  out += s;
}

struct Reader {
  const std::string& bytes;
  std::size_t pos = 0;

  bool at_end() const { return pos == bytes.size(); }
  void need(std::size_t n, const char* what) {
    require(bytes.size() - pos >= n, fmt::format("weight file truncated while reading {}", what),
            ErrorCode::Format);
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  std::string text(const char* what) {
    const std::uint32_t n = u32(what);
    need(n, what);
    std::string s = bytes.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

std::string serialize_weights(const models::Weights& w) {
  std::string out(kMagic, 4);
  put_u32(out, kWeightsVersion);
  put_text(out, w.spec.descriptor());
  for (std::size_t i = 0; i < w.params.size(); ++i) {
    put_text(out, w.names[i]);
    const nn::Shape& s = w.params[i].shape();
    put_u32(out, 4);
    for (std::size_t d : {s.n, s.c, s.h, s.w}) put_u32(out, std::uint32_t(d));
    for (float v : w.params[i].data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

models::Weights deserialize_weights(const std::string& bytes) {
  require(bytes.size() >= 4 && std::memcmp(bytes.data(), kMagic, 4) == 0,
          "not a weight file (bad magic)", ErrorCode::Format);
  Reader r{bytes, 4};
  const std::uint32_t version = r.u32("version");
  require(version == kWeightsVersion,
          fmt::format("unsupported weight file version {}", version), ErrorCode::Format);
  models::Weights w;
  w.spec = models::ModelSpec::parse(r.text("descriptor"));
  const auto table = models::parameter_table(w.spec);
  while (!r.at_end()) {
    const std::size_t i = w.names.size();
    std::string name = r.text("parameter name");
    const std::uint32_t rank = r.u32("rank");
    require(rank >= 1 && rank <= 4, fmt::format("parameter '{}' has rank {}", name, rank),
            ErrorCode::Format);
    std::size_t dims[4] = {1, 1, 1, 1};
    for (std::uint32_t d = 0; d < rank; ++d) dims[4 - rank + d] = r.u32("dims");
    const nn::Shape shape{dims[0], dims[1], dims[2], dims[3]};
    require(i < table.size() && table[i].name == name && table[i].shape == shape,
            fmt::format("parameter '{}' {} does not match spec '{}'", name, shape.str(),
                        w.spec.descriptor()),
            ErrorCode::Mismatch);
    std::vector<float> v(shape.numel());
    r.need(v.size() * 4, "parameter data");
    for (float& x : v) x = std::bit_cast<float>(r.u32("parameter data"));
    w.names.push_back(std::move(name));
    w.params.push_back(nn::Tensor::from(shape, std::move(v)));
  }
  require(w.names.size() == table.size(),
          fmt::format("weight file has {} parameters, spec needs {}", w.names.size(), table.size()),
          ErrorCode::Mismatch);
  return w;
}

void save_weights(const std::filesystem::path& path, const models::Weights& w) {
  std::ofstream out(path, std::ios::binary);
  require(bool(out), fmt::format("cannot write {}", path.string()), ErrorCode::Io);
  const std::string bytes = serialize_weights(w);
  out.write(bytes.data(), std::streamsize(bytes.size()));
  require(bool(out), fmt::format("write failed: {}", path.string()), ErrorCode::Io);
}

models::Weights load_weights(const std::filesystem::path& path,
                             const std::optional<models::ModelSpec>& expected) {
  std::ifstream in(path, std::ios::binary);
  require(bool(in), fmt::format("cannot open weights {}", path.string()), ErrorCode::Io);
  std::ostringstream ss;
  ss << in.rdbuf();
  models::Weights w = deserialize_weights(ss.str());
  if (expected)
    require(w.spec == *expected,
            fmt::format("weights in {} are for '{}', expected '{}'", path.string(),
                        w.spec.descriptor(), expected->descriptor()),
            ErrorCode::Mismatch);
  return w;
}

}  // namespace sid::io
