#pragma once

// Model checkpoint container (all integers little-endian):
//
//   offset  size  field
//   0       8     magic "SRLSTMCK"
//   8       4     format version (1)
//   12      4     H (hidden units)
//   16      4     D (input size)
//   20      4     K (classes)
//   24      4     bytes per scalar (4 = IEEE-754 binary32)
//   28      8     N = parameter count = 4HD + 4HH + 4H + KH + K
//   36      4N    parameters in declared order (see lstm.hpp), binary32 LE
//
// Decoding re-derives N from H, D, K and rejects any mismatch.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "srlstm/error.hpp"
#include "srlstm/idx.hpp"
#include "srlstm/lstm.hpp"

namespace srlstm {

inline constexpr std::array<char, 8> kCheckpointMagic{'S', 'R', 'L', 'S', 'T', 'M', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_le(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint64_t get_le(std::span<const std::uint8_t> in, std::size_t offset, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= std::uint64_t{in[offset + static_cast<std::size_t>(i)]} << (8 * i);
  return v;
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_checkpoint(const LstmParams<float>& params) {
  std::vector<std::uint8_t> out(kCheckpointMagic.begin(), kCheckpointMagic.end());
  detail::put_le(out, kCheckpointVersion, 4);
  detail::put_le(out, static_cast<std::uint64_t>(params.hidden()), 4);
  detail::put_le(out, static_cast<std::uint64_t>(params.input_size()), 4);
  detail::put_le(out, static_cast<std::uint64_t>(params.classes()), 4);
  detail::put_le(out, sizeof(float), 4);
  detail::put_le(out, static_cast<std::uint64_t>(params.size()), 8);
  for (float v : params.values()) detail::put_le(out, std::bit_cast<std::uint32_t>(v), 4);
  return out;
}

inline LstmParams<float> decode_checkpoint(std::span<const std::uint8_t> bytes) {
  constexpr std::size_t header = 36;
  require(bytes.size() >= header, Errc::truncated_payload, "checkpoint header truncated");
  require(std::memcmp(bytes.data(), kCheckpointMagic.data(), kCheckpointMagic.size()) == 0, Errc::unknown_magic,
          "not a checkpoint file");
  const auto version = detail::get_le(bytes, 8, 4);
  require(version == kCheckpointVersion, Errc::unknown_magic, "unsupported checkpoint version " + std::to_string(version));
  const auto H = static_cast<Index>(detail::get_le(bytes, 12, 4));
  const auto D = static_cast<Index>(detail::get_le(bytes, 16, 4));
  const auto K = static_cast<Index>(detail::get_le(bytes, 20, 4));
  require(detail::get_le(bytes, 24, 4) == sizeof(float), Errc::bad_dimension, "checkpoint scalar width must be 4");
  const auto n = detail::get_le(bytes, 28, 8);
  require(H > 0 && D > 0 && K > 1 && n == static_cast<std::uint64_t>(LstmParams<float>::parameter_count(H, D, K)),
          Errc::bad_dimension, "checkpoint parameter count does not match its dimensions");
  require(bytes.size() == header + 4 * n, Errc::truncated_payload, "checkpoint payload length mismatch");

  LstmParams<float> params(H, D, K);
  auto values = params.values();
  for (std::size_t k = 0; k < values.size(); ++k)
    values[k] = std::bit_cast<float>(static_cast<std::uint32_t>(detail::get_le(bytes, header + 4 * k, 4)));
  return params;
}

inline void save_checkpoint(const std::filesystem::path& path, const LstmParams<float>& params) {
  const auto bytes = encode_checkpoint(params);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::io_failure, "cannot write " + path.string());
}

inline LstmParams<float> load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file_bytes(path));
}

}  // namespace srlstm
