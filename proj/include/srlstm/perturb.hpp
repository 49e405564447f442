#pragma once

// Test-time stimulus degradation: contrast scaling by a thresholding factor t,
// then additive non-negative noise redrawn independently at every sequence
// step, then clamping to [0,1].

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "srlstm/error.hpp"
#include "srlstm/idx.hpp"
#include "srlstm/rng.hpp"

namespace srlstm {

enum class NoiseKind { none, uniform, gaussian };

inline std::string_view to_string(NoiseKind k) {
  switch (k) {
    case NoiseKind::none: return "none";
    case NoiseKind::uniform: return "uniform";
    case NoiseKind::gaussian: return "gaussian";
  }
  return "none";
}

inline NoiseKind parse_noise_kind(std::string_view s) {
  if (s == "none") return NoiseKind::none;
  if (s == "uniform") return NoiseKind::uniform;
  if (s == "gaussian") return NoiseKind::gaussian;
  throw Error(Errc::invalid_argument, "unknown noise kind '" + std::string(s) + "'");
}

struct Condition {
  double t_factor = 1.0;
  NoiseKind noise_kind = NoiseKind::none;
  double noise_level = 0.0;  // uniform: upper bound; gaussian: sigma before clipping
  int seq_len = 1;

  double effective_level() const { return noise_kind == NoiseKind::none ? 0.0 : noise_level; }
  bool noisy() const { return effective_level() > 0.0; }

  void validate() const {
    require(t_factor >= 0.0 && t_factor <= 1.0, Errc::out_of_range_factor,
            "thresholding factor " + std::to_string(t_factor) + " outside [0,1]");
    require(noise_kind == NoiseKind::none || noise_level >= 0.0, Errc::negative_level,
            "noise level " + std::to_string(noise_level) + " < 0");
    require(seq_len >= 1, Errc::invalid_argument, "sequence length must be >= 1");
  }

  /// Identifies the condition's noise substream by value, so a condition
  /// draws the same noise no matter which grid it appears in.
  std::uint64_t key() const {
    const NoiseKind kind = noisy() ? noise_kind : NoiseKind::none;
    return rng::derive_seed({rng::double_bits(t_factor), static_cast<std::uint64_t>(kind),
                             rng::double_bits(effective_level()), static_cast<std::uint64_t>(seq_len)});
  }
};

/// Coordinates of one example's noise within an experiment.
struct NoiseKey {
  std::uint64_t seed = 0;
  std::uint64_t model = 0;
  std::uint64_t condition = 0;
  std::uint64_t example = 0;

  rng::Engine engine_for_step(std::uint64_t step) const {
    return rng::make_engine(
        {seed, static_cast<std::uint64_t>(rng::Stream::noise), model, condition, example, step});
  }
};

inline std::vector<float> apply_contrast(std::span<const float> image, double t) {
  require(t >= 0.0 && t <= 1.0, Errc::out_of_range_factor, "thresholding factor " + std::to_string(t) + " outside [0,1]");
  const auto tf = static_cast<float>(t);
  std::vector<float> out(image.size());
  std::transform(image.begin(), image.end(), out.begin(), [tf](float p) { return p * tf; });
  return out;
}

/// Fills `out` with i.i.d. noise: uniform on [0, level), max(0, N(0, level^2)),
/// or zeros.
inline void sample_noise_into(std::span<float> out, NoiseKind kind, double level, rng::Engine& gen) {
  require(kind == NoiseKind::none || level >= 0.0, Errc::negative_level, "noise level " + std::to_string(level) + " < 0");
  if (kind == NoiseKind::none || level == 0.0) {
    std::fill(out.begin(), out.end(), 0.0f);
    return;
  }
  if (kind == NoiseKind::uniform) {
    // Largest float strictly below `level` keeps the interval half-open after rounding.
    float hi = static_cast<float>(level);
    while (static_cast<double>(hi) >= level) hi = std::nextafter(hi, 0.0f);
    for (auto& v : out) v = std::min(static_cast<float>(level * rng::uniform01(gen)), hi);
    return;
  }
  std::size_t k = 0;
  for (; k + 1 < out.size(); k += 2) {
    const auto [z0, z1] = rng::standard_normal_pair(gen);
    out[k] = static_cast<float>(std::max(0.0, level * z0));
    out[k + 1] = static_cast<float>(std::max(0.0, level * z1));
  }
  if (k < out.size()) out[k] = static_cast<float>(std::max(0.0, level * rng::standard_normal_pair(gen).first));
}

inline std::vector<float> sample_noise(NoiseKind kind, double level, rng::Engine& gen,
                                       std::size_t size = kImagePixels) {
  std::vector<float> out(size);
  sample_noise_into(out, kind, level, gen);
  return out;
}

/// Writes clamp(base + noise, 0, 1) for one step into `out`.
inline void perturb_step_into(std::span<float> out, std::span<const float> base, const Condition& cond,
                              const NoiseKey& key, std::uint64_t step) {
  if (!cond.noisy()) {
    std::copy(base.begin(), base.end(), out.begin());
    return;
  }
  auto gen = key.engine_for_step(step);
  sample_noise_into(out, cond.noise_kind, cond.noise_level, gen);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::clamp(base[k] + out[k], 0.0f, 1.0f);
}

/// The L-step input sequence for one example: contrast applied once, fresh
/// noise at every step.
inline std::vector<std::vector<float>> perturbed_sequence(std::span<const float> image, const Condition& cond,
                                                          const NoiseKey& key) {
  cond.validate();
  const auto base = apply_contrast(image, cond.t_factor);
  std::vector<std::vector<float>> steps(static_cast<std::size_t>(cond.seq_len), std::vector<float>(image.size()));
  for (std::size_t s = 0; s < steps.size(); ++s) perturb_step_into(steps[s], base, cond, key, s);
  return steps;
}

}  // namespace srlstm
