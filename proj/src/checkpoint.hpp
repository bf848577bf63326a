#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "tensor.hpp"

namespace xltk {

inline constexpr std::uint16_t kCheckpointVersion = 1;

// Layout: "XLCK", u16 version, u32 block count, then per block u32 name
// length, UTF-8 name, u32 rank, u64 dims, f64 values. Little-endian.
void write_checkpoint(std::ostream& out,
                      const std::vector<std::pair<std::string, Tensor>>& params);
void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<std::pair<std::string, Tensor>>& params);

// Fills `params` in place. Every name must be present with the same shape
// and the file may not carry extra blocks.
void read_checkpoint(std::istream& in, const std::vector<std::pair<std::string, Tensor>>& params);
void load_checkpoint(const std::filesystem::path& path,
                     const std::vector<std::pair<std::string, Tensor>>& params);

}  // namespace xltk
