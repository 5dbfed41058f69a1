// dataset.hpp — in-memory ensemble dataset and its on-disk formats
//
// A dataset holds N per-model logit matrices of shape [M][C], M labels and
// N per-model latency costs (ms). Logits are kept as binary32, exactly as
// stored on disk; every consumer widens them to double before arithmetic.
//
// On-disk layout (all integers little-endian):
//   manifest.json        version/num_models/num_samples/num_classes,
//                        logit_files[N], label_file, costs_ms[N]
//   logit file           "ENSL" u32 version=1, u32 M, u32 C, M*C f32 row-major
//   label file           "ENSY" u32 version=1, u32 M, M u32 class indices
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace flexens {

class EnsembleDataset {
 public:
  EnsembleDataset() = default;

  // Validates every invariant; throws Error on the first violation with the
  // offending coordinates in the message.
  EnsembleDataset(std::size_t num_models, std::size_t num_samples, std::size_t num_classes,
                  std::vector<float> logits, std::vector<std::uint32_t> labels,
                  std::vector<double> costs_ms);

  std::size_t num_models() const noexcept { return num_models_; }
  std::size_t num_samples() const noexcept { return num_samples_; }
  std::size_t num_classes() const noexcept { return num_classes_; }

  /// Logits of one model for one sample (length C).
  std::span<const float> logits(std::size_t model, std::size_t sample) const {
    return {logits_.data() + (model * num_samples_ + sample) * num_classes_, num_classes_};
  }
  /// Whole [M][C] matrix of one model.
  std::span<const float> model_logits(std::size_t model) const {
    return {logits_.data() + model * num_samples_ * num_classes_, num_samples_ * num_classes_};
  }
  std::span<const float> all_logits() const noexcept { return logits_; }
  std::span<const std::uint32_t> labels() const noexcept { return labels_; }
  std::span<const double> costs_ms() const noexcept { return costs_; }

  /// Copy with the first `limit` samples only (limit >= 1).
  EnsembleDataset head(std::size_t limit) const;
  /// Same logits and labels under a different cost vector.
  EnsembleDataset with_costs(std::vector<double> costs_ms) const;

  /// FNV-1a 64 over dimensions, logit bits, labels and cost bits.
  std::uint64_t fingerprint() const;

  friend bool operator==(const EnsembleDataset&, const EnsembleDataset&) = default;

 private:
  std::size_t num_models_ = 0;
  std::size_t num_samples_ = 0;
  std::size_t num_classes_ = 0;
  std::vector<float> logits_;  // [N][M][C]
  std::vector<std::uint32_t> labels_;
  std::vector<double> costs_;
};

struct DatasetManifest {
  int version = 1;
  std::size_t num_models = 0;
  std::size_t num_samples = 0;
  std::size_t num_classes = 0;
  std::vector<std::string> logit_files;  // relative to the manifest directory
  std::string label_file;
  std::vector<double> costs_ms;
};

inline constexpr const char* kManifestName = "manifest.json";

/// Accepts either a manifest file or the directory containing manifest.json.
EnsembleDataset load_dataset(const std::filesystem::path& manifest_path);

/// Writes manifest.json, model_<i>.ensl and labels.ensy into `dir`
/// (created if missing). Output is byte-deterministic.
DatasetManifest save_dataset(const EnsembleDataset& dataset, const std::filesystem::path& dir);

DatasetManifest read_manifest(const std::filesystem::path& manifest_file);

// Low-level payload readers/writers, exposed for tooling and tests.
std::vector<float> read_logit_file(const std::filesystem::path& path, std::uint32_t& rows,
                                   std::uint32_t& cols);
std::vector<std::uint32_t> read_label_file(const std::filesystem::path& path);
void write_logit_file(const std::filesystem::path& path, std::span<const float> values,
                      std::uint32_t rows, std::uint32_t cols);
void write_label_file(const std::filesystem::path& path, std::span<const std::uint32_t> labels);

/// Builds a dataset from hand-authored CSV: one file per model with M rows of
/// C comma-separated reals, a label file with M rows of one integer each.
EnsembleDataset import_csv(std::span<const std::filesystem::path> logits_csvs,
                           const std::filesystem::path& labels_csv,
                           std::vector<double> costs_ms);

/// Writes one model's logit matrix as CSV using the shortest decimal text that
/// round-trips each binary32 value.
void export_logits_csv(const EnsembleDataset& dataset, std::size_t model,
                       const std::filesystem::path& path);
void export_labels_csv(const EnsembleDataset& dataset, const std::filesystem::path& path);

}  // namespace flexens
