#pragma once

#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "srlstm/error.hpp"
#include "srlstm/idx.hpp"
#include "srlstm/rng.hpp"

namespace srlstm {

/// Label of the no-signal class (black images).
inline constexpr std::uint8_t kEmptyLabel = 10;

enum class Split { train, validation };

inline std::string_view to_string(Split s) { return s == Split::train ? "train" : "validation"; }

/// Default number of black images added per split, about one digit's share of MNIST.
inline constexpr std::size_t kDefaultEmptyTrain = 6000;
inline constexpr std::size_t kDefaultEmptyValidation = 1000;

struct Dataset {
  std::vector<float> pixels;          // size() * 784, one contiguous image per example
  std::vector<std::uint8_t> labels;
  int num_classes = 10;
  Split split = Split::train;

  std::size_t size() const { return labels.size(); }
  std::span<const float> image(std::size_t i) const {
    return std::span<const float>(pixels).subspan(i * kImagePixels, kImagePixels);
  }
  std::size_t digit_count() const {
    std::size_t n = 0;
    for (auto l : labels) n += (l != kEmptyLabel);
    return n;
  }
};

/// Combines images and labels, optionally appending `empty_count` black
/// images labelled 10, then shuffles the example order with `seed`.
inline Dataset build_dataset(const ImageSet& images, const LabelArray& labels, bool include_empty,
                             std::size_t empty_count, Split split, std::uint64_t seed) {
  require(images.count == labels.labels.size(), Errc::count_mismatch,
          std::to_string(images.count) + " images vs " + std::to_string(labels.labels.size()) + " labels");
  require(images.rows * images.cols == kImagePixels, Errc::bad_dimension, "images must be 28x28");
  for (auto l : labels.labels) require(l < 10, Errc::label_out_of_range, "digit label " + std::to_string(l));

  const std::size_t extra = include_empty ? empty_count : 0;
  const std::size_t n = images.count + extra;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto gen = rng::make_engine({seed, static_cast<std::uint64_t>(rng::Stream::dataset)});
  rng::shuffle(order.begin(), order.end(), gen);

  Dataset out;
  out.num_classes = include_empty ? 11 : 10;
  out.split = split;
  out.pixels.assign(n * kImagePixels, 0.0f);
  out.labels.resize(n);
  for (std::size_t dst = 0; dst < n; ++dst) {
    const std::size_t src = order[dst];
    if (src < images.count) {
      std::copy_n(images.pixels.begin() + static_cast<std::ptrdiff_t>(src * kImagePixels), kImagePixels,
                  out.pixels.begin() + static_cast<std::ptrdiff_t>(dst * kImagePixels));
      out.labels[dst] = labels.labels[src];
    } else {
      out.labels[dst] = kEmptyLabel;
    }
  }
  return out;
}

}  // namespace srlstm
