#include "checkpoint.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_map>

#include "binio.hpp"
#include "errors.hpp"

namespace xltk {

namespace {
constexpr std::uint32_t kMaxNameLength = 4096;
constexpr std::uint32_t kMaxRank = 8;
}  // namespace

void write_checkpoint(std::ostream& out,
                      const std::vector<std::pair<std::string, Tensor>>& params) {
  binio::put_magic(out, "XLCK");
  binio::put<std::uint16_t>(out, kCheckpointVersion);
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, t] : params) {
    binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) binio::put<std::uint64_t>(out, d);
    for (double v : t.data()) binio::put<double>(out, v);
  }
}

void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<std::pair<std::string, Tensor>>& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path.string());
  write_checkpoint(out, params);
  if (!out) throw IoError("failed writing checkpoint: " + path.string());
}

void read_checkpoint(std::istream& in, const std::vector<std::pair<std::string, Tensor>>& params) {
  binio::expect_magic(in, "XLCK", "checkpoint");
  const auto version = binio::get<std::uint16_t>(in);
  if (version != kCheckpointVersion) {
    throw ParseError("checkpoint: unsupported version " + std::to_string(version));
  }
  std::unordered_map<std::string, Tensor> wanted;
  for (const auto& [name, t] : params) wanted.emplace(name, t);

  const auto count = binio::get<std::uint32_t>(in);
  if (count != params.size()) {
    throw SchemaError("checkpoint holds " + std::to_string(count) + " blocks, model expects " +
                      std::to_string(params.size()));
  }
  // Staged so a bad file leaves the model untouched.
  std::unordered_map<std::string, std::vector<double>> staged;
  for (std::uint32_t b = 0; b < count; ++b) {
    const auto len = binio::get<std::uint32_t>(in);
    if (len == 0 || len > kMaxNameLength) throw ParseError("checkpoint: bad block name length");
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw ParseError("unexpected end of file");
    const auto rank = binio::get<std::uint32_t>(in);
    if (rank > kMaxRank) throw ParseError("checkpoint: bad rank for " + name);
    Shape shape(rank);
    for (auto& d : shape) d = binio::get<std::uint64_t>(in);
    auto it = wanted.find(name);
    if (it == wanted.end()) throw SchemaError("checkpoint: unexpected parameter " + name);
    if (staged.count(name)) throw SchemaError("checkpoint: duplicate parameter " + name);
    if (it->second.shape() != shape) {
      throw SchemaError("checkpoint: " + name + " has shape " + shape_str(shape) +
                        ", model expects " + shape_str(it->second.shape()));
    }
    std::vector<double> values(it->second.size());
    for (auto& v : values) v = binio::get<double>(in);
    staged.emplace(name, std::move(values));
  }
  for (const auto& [name, t] : params) {
    const auto& values = staged.at(name);
    std::copy(values.begin(), values.end(), t.data().begin());
  }
}

void load_checkpoint(const std::filesystem::path& path,
                     const std::vector<std::pair<std::string, Tensor>>& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  read_checkpoint(in, params);
}

}  // namespace xltk
