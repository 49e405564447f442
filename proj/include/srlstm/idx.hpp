#pragma once

// Reader and writer for the IDX container used by the MNIST distribution.
//
//   magic (u32, big-endian): 0x00000801 = 2049 labels, 0x00000803 = 2051 images
//   dims  (u32 big-endian each): labels {count}, images {count, rows, cols}
//   payload: unsigned bytes
//
// Input that starts with the gzip magic 1F 8B is inflated first.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <zlib.h>

#include "srlstm/error.hpp"

namespace srlstm {

inline constexpr std::size_t kImageRows = 28;
inline constexpr std::size_t kImageCols = 28;
inline constexpr std::size_t kImagePixels = kImageRows * kImageCols;

inline constexpr std::uint32_t kIdxLabelMagic = 2049;
inline constexpr std::uint32_t kIdxImageMagic = 2051;

struct ImageSet {
  std::size_t count = 0;
  std::size_t rows = kImageRows;
  std::size_t cols = kImageCols;
  std::vector<float> pixels;  // count*rows*cols, row-major per image, in [0,1]
};

struct LabelArray {
  std::vector<std::uint8_t> labels;
};

using IdxTensor = std::variant<ImageSet, LabelArray>;

namespace detail {

inline std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

inline void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

}  // namespace detail

inline bool is_gzip(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 2 && bytes[0] == 0x1F && bytes[1] == 0x8B;
}

inline std::vector<std::uint8_t> gunzip(std::span<const std::uint8_t> bytes) {
  z_stream zs{};
  if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK) throw Error(Errc::io_failure, "inflateInit2 failed");
  zs.next_in = const_cast<Bytef*>(bytes.data());
  zs.avail_in = static_cast<uInt>(bytes.size());

  std::vector<std::uint8_t> out;
  std::uint8_t chunk[1 << 16];
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = chunk;
    zs.avail_out = sizeof chunk;
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw Error(Errc::truncated_payload, "corrupt or incomplete gzip stream");
    }
    out.insert(out.end(), chunk, chunk + (sizeof chunk - zs.avail_out));
    if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
      inflateEnd(&zs);
      throw Error(Errc::truncated_payload, "gzip stream ended early");
    }
  }
  inflateEnd(&zs);
  return out;
}

/// Parses an IDX payload (raw or gzip-wrapped). Images are normalized by 1/255.
inline IdxTensor parse_idx(std::span<const std::uint8_t> input) {
  std::vector<std::uint8_t> inflated;
  std::span<const std::uint8_t> bytes = input;
  if (is_gzip(input)) {
    inflated = gunzip(input);
    bytes = inflated;
  }

  require(bytes.size() >= 8, Errc::truncated_payload, "IDX header shorter than 8 bytes");
  const std::uint32_t magic = detail::read_be32(bytes, 0);

  if (magic == kIdxLabelMagic) {
    const std::size_t count = detail::read_be32(bytes, 4);
    require(bytes.size() - 8 >= count, Errc::truncated_payload,
            "label file declares " + std::to_string(count) + " entries, payload has " +
                std::to_string(bytes.size() - 8));
    require(bytes.size() - 8 == count, Errc::truncated_payload, "trailing bytes after label payload");
    LabelArray out;
    out.labels.assign(bytes.begin() + 8, bytes.end());
    for (auto l : out.labels) require(l <= 9, Errc::label_out_of_range, "label " + std::to_string(l) + " > 9");
    return out;
  }

  if (magic == kIdxImageMagic) {
    require(bytes.size() >= 16, Errc::truncated_payload, "image header shorter than 16 bytes");
    ImageSet out;
    out.count = detail::read_be32(bytes, 4);
    out.rows = detail::read_be32(bytes, 8);
    out.cols = detail::read_be32(bytes, 12);
    require(out.rows == kImageRows && out.cols == kImageCols, Errc::bad_dimension,
            "images are " + std::to_string(out.rows) + "x" + std::to_string(out.cols) + ", expected 28x28");
    const std::size_t n = out.count * kImagePixels;
    require(bytes.size() - 16 >= n, Errc::truncated_payload,
            "image file declares " + std::to_string(out.count) + " images, payload too short");
    require(bytes.size() - 16 == n, Errc::truncated_payload, "trailing bytes after image payload");
    out.pixels.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.pixels[i] = static_cast<float>(bytes[16 + i]) / 255.0f;
    return out;
  }

  throw Error(Errc::unknown_magic, "magic " + std::to_string(magic) + " is neither 2049 nor 2051");
}

/// Inverse of parse_idx for images: pixel bytes are round(255*p).
inline std::vector<std::uint8_t> serialize_idx(const ImageSet& images) {
  require(images.pixels.size() == images.count * images.rows * images.cols, Errc::shape_mismatch,
          "pixel buffer does not match count*rows*cols");
  std::vector<std::uint8_t> out;
  out.reserve(16 + images.pixels.size());
  detail::write_be32(out, kIdxImageMagic);
  detail::write_be32(out, static_cast<std::uint32_t>(images.count));
  detail::write_be32(out, static_cast<std::uint32_t>(images.rows));
  detail::write_be32(out, static_cast<std::uint32_t>(images.cols));
  for (float p : images.pixels) out.push_back(static_cast<std::uint8_t>(std::lround(p * 255.0f)));
  return out;
}

inline std::vector<std::uint8_t> serialize_idx(const LabelArray& labels) {
  std::vector<std::uint8_t> out;
  out.reserve(8 + labels.labels.size());
  detail::write_be32(out, kIdxLabelMagic);
  detail::write_be32(out, static_cast<std::uint32_t>(labels.labels.size()));
  out.insert(out.end(), labels.labels.begin(), labels.labels.end());
  return out;
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_failure, "cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline ImageSet load_images(const std::filesystem::path& path) {
  auto tensor = parse_idx(read_file_bytes(path));
  if (auto* images = std::get_if<ImageSet>(&tensor)) return std::move(*images);
  throw Error(Errc::unknown_magic, path.string() + " holds labels, expected images");
}

inline LabelArray load_labels(const std::filesystem::path& path) {
  auto tensor = parse_idx(read_file_bytes(path));
  if (auto* labels = std::get_if<LabelArray>(&tensor)) return std::move(*labels);
  throw Error(Errc::unknown_magic, path.string() + " holds images, expected labels");
}

}  // namespace srlstm
