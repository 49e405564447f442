#pragma once

// Result serialization.
//
// Sweep CSV: header
//   noise_kind,t_factor,noise_level,seq_len,mean_acc,std_acc,mean_detection,n_models
// floats printed with 6 decimals, rows sorted by t_factor descending, then
// noise_level ascending, then seq_len ascending. mean_detection is empty for
// 10-class models. mean_acc counts every validation example, including the
// black no-signal images, which receive the same perturbation as digits.
//
// Images: binary PGM (P5, maxval 255), byte = round(255 * pixel).

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "srlstm/dataset.hpp"
#include "srlstm/error.hpp"
#include "srlstm/harness.hpp"
#include "srlstm/perturb.hpp"

namespace srlstm {

inline constexpr const char* kSweepCsvHeader =
    "noise_kind,t_factor,noise_level,seq_len,mean_acc,std_acc,mean_detection,n_models";
inline constexpr const char* kManifestHeader =
    "index,true_label,pred_orig,pred_contrast,pred_noised,file_orig,file_contrast,file_noised";

/// One CSV line, as written and as parsed back.
struct SweepRow {
  NoiseKind noise_kind = NoiseKind::none;
  double t_factor = 1.0;
  double noise_level = 0.0;
  int seq_len = 1;
  double mean_acc = 0.0;
  double std_acc = 0.0;
  std::optional<double> mean_detection;
  std::size_t n_models = 0;
};

inline std::vector<SweepRow> to_rows(const SweepTable& table) {
  std::vector<SweepRow> rows;
  for (const auto& s : table.rows) {
    rows.push_back(SweepRow{s.condition.noise_kind, s.condition.t_factor, s.condition.effective_level(),
                            s.condition.seq_len, s.mean_accuracy, s.std_accuracy, s.mean_detection_rate,
                            s.per_model_accuracy.size()});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
    if (a.t_factor != b.t_factor) return a.t_factor > b.t_factor;
    if (a.noise_level != b.noise_level) return a.noise_level < b.noise_level;
    return a.seq_len < b.seq_len;
  });
  return rows;
}

inline std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline std::string format_csv(const SweepTable& table) {
  require(!table.rows.empty(), Errc::invalid_argument, "cannot write an empty sweep table");
  std::string out = kSweepCsvHeader;
  out += '\n';
  for (const auto& r : to_rows(table)) {
    out += to_string(r.noise_kind);
    out += ',' + fixed6(r.t_factor) + ',' + fixed6(r.noise_level) + ',' + std::to_string(r.seq_len) + ',' +
           fixed6(r.mean_acc) + ',' + fixed6(r.std_acc) + ',' + (r.mean_detection ? fixed6(*r.mean_detection) : "") +
           ',' + std::to_string(r.n_models) + '\n';
  }
  return out;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  out.flush();
  if (!out) throw Error(Errc::io_failure, "cannot write " + path.string());
}

inline void write_csv(const SweepTable& table, const std::filesystem::path& path) {
  write_text_file(path, format_csv(table));
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

}  // namespace detail

inline std::vector<SweepRow> parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)) && line == kSweepCsvHeader, Errc::invalid_argument,
          "missing or unexpected sweep CSV header");
  std::vector<SweepRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    require(f.size() == 8, Errc::invalid_argument, "sweep CSV row needs 8 fields: " + line);
    SweepRow r;
    r.noise_kind = parse_noise_kind(f[0]);
    r.t_factor = std::stod(f[1]);
    r.noise_level = std::stod(f[2]);
    r.seq_len = std::stoi(f[3]);
    r.mean_acc = std::stod(f[4]);
    r.std_acc = std::stod(f[5]);
    if (!f[6].empty()) r.mean_detection = std::stod(f[6]);
    r.n_models = static_cast<std::size_t>(std::stoull(f[7]));
    rows.push_back(r);
  }
  return rows;
}

inline std::vector<SweepRow> read_csv(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return parse_csv(std::string(bytes.begin(), bytes.end()));
}

struct GrayImage {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> bytes;

  float pixel(std::size_t i) const { return static_cast<float>(bytes[i]) / 255.0f; }
};

inline std::uint8_t to_gray_byte(float p) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(p, 0.0f, 1.0f) * 255.0f));
}

inline std::string encode_pgm(std::span<const float> pixels, std::size_t rows, std::size_t cols) {
  require(pixels.size() == rows * cols, Errc::shape_mismatch, "pixel count does not match rows*cols");
  std::string out = "P5\n" + std::to_string(cols) + " " + std::to_string(rows) + "\n255\n";
  for (float p : pixels) out.push_back(static_cast<char>(to_gray_byte(p)));
  return out;
}

inline void write_pgm(const std::filesystem::path& path, std::span<const float> pixels, std::size_t rows = kImageRows,
                      std::size_t cols = kImageCols) {
  write_text_file(path, encode_pgm(pixels, rows, cols));
}

inline GrayImage decode_pgm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    std::string t;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) t.push_back(static_cast<char>(bytes[pos++]));
    return t;
  };
  require(token() == "P5", Errc::unknown_magic, "not a binary PGM (P5)");
  GrayImage img;
  const auto w = token(), h = token(), maxval = token();
  require(!w.empty() && !h.empty() && maxval == "255", Errc::bad_dimension, "PGM header must give width, height, 255");
  img.cols = std::stoul(w);
  img.rows = std::stoul(h);
  ++pos;  // single whitespace before the raster
  require(bytes.size() >= pos && bytes.size() - pos == img.rows * img.cols, Errc::truncated_payload,
          "PGM raster length mismatch");
  img.bytes.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end());
  return img;
}

inline GrayImage read_pgm(const std::filesystem::path& path) { return decode_pgm(read_file_bytes(path)); }

struct ExampleTriplet {
  std::size_t example_index = 0;  // position in the validation set
  int true_label = 0;
  std::vector<float> original;
  std::vector<float> contrasted;
  std::vector<float> noised;  // first step of the perturbed sequence
  int pred_original = 0;
  int pred_contrasted = 0;
  int pred_noised = 0;
};

/// Selects `n` digit-bearing validation examples (seeded), predicts each at
/// full contrast, contrasted, and contrasted + noise, and writes three PGMs per
/// example plus manifest.csv into `outdir`. Predictions use the same noise
/// substream as evaluation of model 0.
inline std::vector<ExampleTriplet> render_examples(const LstmParams<float>& model, const Dataset& val,
                                                   const Condition& cond, std::size_t n,
                                                   const std::filesystem::path& outdir, std::uint64_t seed) {
  cond.validate();
  require(model.classes() == 11 && val.num_classes == 11, Errc::class_count_mismatch,
          "example rendering needs an 11-class model and validation set");
  std::vector<std::size_t> digits;
  for (std::size_t e = 0; e < val.size(); ++e)
    if (val.labels[e] != kEmptyLabel) digits.push_back(e);
  require(n <= digits.size(), Errc::invalid_argument, "requested more examples than digit images available");
  auto gen = rng::make_engine({seed, static_cast<std::uint64_t>(rng::Stream::sample)});
  rng::shuffle(digits.begin(), digits.end(), gen);
  digits.resize(n);

  std::error_code ec;
  std::filesystem::create_directories(outdir, ec);
  if (ec) throw Error(Errc::io_failure, "cannot create " + outdir.string());

  const Condition clean{1.0, NoiseKind::none, 0.0, cond.seq_len};
  const Condition dimmed{cond.t_factor, NoiseKind::none, 0.0, cond.seq_len};
  std::string manifest = std::string(kManifestHeader) + "\n";
  std::vector<ExampleTriplet> out;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t e = digits[k];
    const auto image = val.image(e);
    const NoiseKey key{seed, 0, cond.key(), e};

    ExampleTriplet tr;
    tr.example_index = e;
    tr.true_label = val.labels[e];
    tr.original.assign(image.begin(), image.end());
    tr.contrasted = apply_contrast(image, cond.t_factor);
    const auto noisy_seq = perturbed_sequence(image, cond, key);
    tr.noised = noisy_seq.front();
    tr.pred_original = predict_sequence(model, perturbed_sequence(image, clean, key));
    tr.pred_contrasted = predict_sequence(model, perturbed_sequence(image, dimmed, key));
    tr.pred_noised = predict_sequence(model, noisy_seq);

    char stem[32];
    std::snprintf(stem, sizeof stem, "ex%03zu", k);
    const std::string f_orig = std::string(stem) + "_orig.pgm";
    const std::string f_con = std::string(stem) + "_contrast.pgm";
    const std::string f_noise = std::string(stem) + "_noised.pgm";
    write_pgm(outdir / f_orig, tr.original);
    write_pgm(outdir / f_con, tr.contrasted);
    write_pgm(outdir / f_noise, tr.noised);
    manifest += std::to_string(k) + ',' + std::to_string(tr.true_label) + ',' + std::to_string(tr.pred_original) + ',' +
                std::to_string(tr.pred_contrasted) + ',' + std::to_string(tr.pred_noised) + ',' + f_orig + ',' +
                f_con + ',' + f_noise + '\n';
    out.push_back(std::move(tr));
  }
  write_text_file(outdir / "manifest.csv", manifest);
  return out;
}

}  // namespace srlstm
