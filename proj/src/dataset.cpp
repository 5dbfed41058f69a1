#include "flexens/dataset.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "json.hpp"

#include "flexens/error.hpp"

namespace flexens {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "payload codec assumes a little-endian host");

namespace {

constexpr std::array<char, 4> kLogitMagic{'E', 'N', 'S', 'L'};
constexpr std::array<char, 4> kLabelMagic{'E', 'N', 'S', 'Y'};
constexpr std::uint32_t kFormatVersion = 1;

std::string coord(std::size_t model, std::size_t sample, std::size_t cls) {
  std::ostringstream os;
  os << "model " << model << ", sample " << sample << ", class " << cls;
  return os.str();
}

std::vector<char> read_all(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoFailure, "cannot open " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorKind::IoFailure, "read failed: " + path.string());
  return bytes;
}

class ByteReader {
 public:
  ByteReader(const std::vector<char>& bytes, const fs::path& path) : bytes_(bytes), path_(path) {}

  void expect_magic(const std::array<char, 4>& magic) {
    need(4);
    if (std::memcmp(bytes_.data() + pos_, magic.data(), 4) != 0)
      throw Error(ErrorKind::DimensionMismatch, "bad magic in " + path_.string());
    pos_ += 4;
  }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v;
    std::memcpy(&v, bytes_.data() + pos_, 4);
    pos_ += 4;
    return v;
  }

  template <typename T>
  std::vector<T> array(std::size_t count) {
    need(count * sizeof(T));
    std::vector<T> out(count);
    if (count) std::memcpy(out.data(), bytes_.data() + pos_, count * sizeof(T));
    pos_ += count * sizeof(T);
    return out;
  }

  void expect_end() const {
    if (pos_ != bytes_.size())
      throw Error(ErrorKind::DimensionMismatch,
                  "trailing bytes after payload in " + path_.string());
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n)
      throw Error(ErrorKind::DimensionMismatch, "truncated file " + path_.string());
  }

  const std::vector<char>& bytes_;
  const fs::path& path_;
  std::size_t pos_ = 0;
};

void put_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), 4);
}

void check_written(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw Error(ErrorKind::IoFailure, "write failed: " + path.string());
}

std::uint32_t narrow_u32(std::size_t v, const char* what) {
  if (v > 0xFFFFFFFFu) throw Error(ErrorKind::DimensionMismatch, std::string(what) + " exceeds u32");
  return static_cast<std::uint32_t>(v);
}

// ---- CSV -------------------------------------------------------------------

std::vector<std::string> csv_lines(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoFailure, "cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  // A trailing newline leaves no empty record; blank lines elsewhere are rows.
  return lines;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    auto comma = line.find(',', start);
    fields.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_field(std::string_view text, const fs::path& path, std::size_t row, std::size_t col) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    std::ostringstream os;
    os << path.string() << " row " << row << " column " << col << ": cannot parse '" << text << "'";
    throw Error(ErrorKind::ParseFailure, os.str());
  }
  return value;
}

std::string shortest(float v) {
  std::array<char, 64> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

}  // namespace

// ---- EnsembleDataset ---------------------------------------------------------

EnsembleDataset::EnsembleDataset(std::size_t num_models, std::size_t num_samples,
                                 std::size_t num_classes, std::vector<float> logits,
                                 std::vector<std::uint32_t> labels, std::vector<double> costs_ms)
    : num_models_(num_models),
      num_samples_(num_samples),
      num_classes_(num_classes),
      logits_(std::move(logits)),
      labels_(std::move(labels)),
      costs_(std::move(costs_ms)) {
  if (num_models_ < 1) throw Error(ErrorKind::DimensionMismatch, "num_models must be >= 1");
  if (num_samples_ < 1) throw Error(ErrorKind::DimensionMismatch, "num_samples must be >= 1");
  if (num_classes_ < 2)
    throw Error(ErrorKind::TooFewClasses, "num_classes must be >= 2 (score margin undefined)");
  if (logits_.size() != num_models_ * num_samples_ * num_classes_)
    throw Error(ErrorKind::DimensionMismatch, "logit tensor size does not match N*M*C");
  if (labels_.size() != num_samples_)
    throw Error(ErrorKind::DimensionMismatch, "label count does not match num_samples");
  if (costs_.size() != num_models_)
    throw Error(ErrorKind::DimensionMismatch, "cost count does not match num_models");

  for (std::size_t i = 0; i < logits_.size(); ++i) {
    if (!std::isfinite(logits_[i])) {
      std::size_t cls = i % num_classes_;
      std::size_t sample = (i / num_classes_) % num_samples_;
      std::size_t model = i / (num_classes_ * num_samples_);
      throw Error(ErrorKind::NonFiniteLogit, coord(model, sample, cls));
    }
  }
  for (std::size_t m = 0; m < num_samples_; ++m) {
    if (labels_[m] >= num_classes_) {
      std::ostringstream os;
      os << "sample " << m << " has label " << labels_[m] << " with " << num_classes_
         << " classes";
      throw Error(ErrorKind::LabelOutOfRange, os.str());
    }
  }
  for (std::size_t i = 0; i < num_models_; ++i) {
    if (!(costs_[i] > 0.0) || !std::isfinite(costs_[i])) {
      std::ostringstream os;
      os << "model " << i << " has cost " << costs_[i];
      throw Error(ErrorKind::NonPositiveCost, os.str());
    }
  }
}

EnsembleDataset EnsembleDataset::head(std::size_t limit) const {
  if (limit < 1) throw Error(ErrorKind::InvalidArgument, "limit must be >= 1");
  if (limit >= num_samples_) return *this;
  std::vector<float> logits;
  logits.reserve(num_models_ * limit * num_classes_);
  for (std::size_t i = 0; i < num_models_; ++i) {
    auto mat = model_logits(i);
    logits.insert(logits.end(), mat.begin(), mat.begin() + limit * num_classes_);
  }
  std::vector<std::uint32_t> labels(labels_.begin(), labels_.begin() + limit);
  return EnsembleDataset(num_models_, limit, num_classes_, std::move(logits), std::move(labels),
                         costs_);
}

EnsembleDataset EnsembleDataset::with_costs(std::vector<double> costs_ms) const {
  return EnsembleDataset(num_models_, num_samples_, num_classes_, logits_, labels_,
                         std::move(costs_ms));
}

std::uint64_t EnsembleDataset::fingerprint() const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ull;
    }
  };
  std::uint64_t dims[3] = {num_models_, num_samples_, num_classes_};
  mix(dims, sizeof dims);
  mix(logits_.data(), logits_.size() * sizeof(float));
  mix(labels_.data(), labels_.size() * sizeof(std::uint32_t));
  mix(costs_.data(), costs_.size() * sizeof(double));
  return h;
}

// ---- binary payloads --------------------------------------------------------

std::vector<float> read_logit_file(const fs::path& path, std::uint32_t& rows,
                                   std::uint32_t& cols) {
  auto bytes = read_all(path);
  ByteReader r(bytes, path);
  r.expect_magic(kLogitMagic);
  if (auto v = r.u32(); v != kFormatVersion)
    throw Error(ErrorKind::DimensionMismatch,
                "unsupported logit file version " + std::to_string(v) + " in " + path.string());
  rows = r.u32();
  cols = r.u32();
  auto values = r.array<float>(static_cast<std::size_t>(rows) * cols);
  r.expect_end();
  return values;
}

std::vector<std::uint32_t> read_label_file(const fs::path& path) {
  auto bytes = read_all(path);
  ByteReader r(bytes, path);
  r.expect_magic(kLabelMagic);
  if (auto v = r.u32(); v != kFormatVersion)
    throw Error(ErrorKind::DimensionMismatch,
                "unsupported label file version " + std::to_string(v) + " in " + path.string());
  std::uint32_t count = r.u32();
  auto labels = r.array<std::uint32_t>(count);
  r.expect_end();
  return labels;
}

void write_logit_file(const fs::path& path, std::span<const float> values, std::uint32_t rows,
                      std::uint32_t cols) {
  if (values.size() != static_cast<std::size_t>(rows) * cols)
    throw Error(ErrorKind::DimensionMismatch, "logit payload size does not match rows*cols");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoFailure, "cannot create " + path.string());
  out.write(kLogitMagic.data(), 4);
  put_u32(out, kFormatVersion);
  put_u32(out, rows);
  put_u32(out, cols);
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(float)));
  check_written(out, path);
}

void write_label_file(const fs::path& path, std::span<const std::uint32_t> labels) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoFailure, "cannot create " + path.string());
  out.write(kLabelMagic.data(), 4);
  put_u32(out, kFormatVersion);
  put_u32(out, narrow_u32(labels.size(), "label count"));
  out.write(reinterpret_cast<const char*>(labels.data()),
            static_cast<std::streamsize>(labels.size() * sizeof(std::uint32_t)));
  check_written(out, path);
}

// ---- manifest ---------------------------------------------------------------

DatasetManifest read_manifest(const fs::path& manifest_file) {
  auto bytes = read_all(manifest_file);
  json j;
  try {
    j = json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    throw Error(ErrorKind::MalformedManifest, manifest_file.string() + ": " + e.what());
  }
  DatasetManifest m;
  try {
    if (!j.is_object()) throw Error(ErrorKind::MalformedManifest, "top level is not an object");
    m.version = j.at("version").get<int>();
    if (m.version != 1)
      throw Error(ErrorKind::MalformedManifest, "unsupported version " + std::to_string(m.version));
    auto count = [&](const char* key) {
      const auto& v = j.at(key);
      if (!v.is_number_unsigned())
        throw Error(ErrorKind::MalformedManifest, std::string(key) + " must be a non-negative integer");
      return v.get<std::size_t>();
    };
    m.num_models = count("num_models");
    m.num_samples = count("num_samples");
    m.num_classes = count("num_classes");
    m.logit_files = j.at("logit_files").get<std::vector<std::string>>();
    m.label_file = j.at("label_file").get<std::string>();
    for (const auto& c : j.at("costs_ms")) {
      if (!c.is_number()) throw Error(ErrorKind::MalformedManifest, "costs_ms must hold numbers");
      m.costs_ms.push_back(c.get<double>());
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::MalformedManifest, manifest_file.string() + ": " + e.what());
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::MalformedManifest) throw;
    throw Error(ErrorKind::MalformedManifest, manifest_file.string() + ": " + e.what());
  }
  if (m.logit_files.size() != m.num_models)
    throw Error(ErrorKind::MalformedManifest,
                manifest_file.string() + ": logit_files length differs from num_models");
  if (m.costs_ms.size() != m.num_models)
    throw Error(ErrorKind::MalformedManifest,
                manifest_file.string() + ": costs_ms length differs from num_models");
  return m;
}

EnsembleDataset load_dataset(const fs::path& manifest_path) {
  fs::path manifest_file = manifest_path;
  if (fs::is_directory(manifest_file)) manifest_file /= kManifestName;
  DatasetManifest m = read_manifest(manifest_file);
  const fs::path base = manifest_file.parent_path();

  std::vector<float> logits;
  logits.reserve(m.num_models * m.num_samples * m.num_classes);
  for (std::size_t i = 0; i < m.num_models; ++i) {
    fs::path file = base / m.logit_files[i];
    std::uint32_t rows = 0, cols = 0;
    auto values = read_logit_file(file, rows, cols);
    if (rows != m.num_samples || cols != m.num_classes) {
      std::ostringstream os;
      os << file.string() << ": header says M=" << rows << ", C=" << cols << " but manifest says M="
         << m.num_samples << ", C=" << m.num_classes;
      throw Error(ErrorKind::DimensionMismatch, os.str());
    }
    logits.insert(logits.end(), values.begin(), values.end());
  }
  fs::path label_path = base / m.label_file;
  auto labels = read_label_file(label_path);
  if (labels.size() != m.num_samples) {
    std::ostringstream os;
    os << label_path.string() << ": header says M=" << labels.size() << " but manifest says M="
       << m.num_samples;
    throw Error(ErrorKind::DimensionMismatch, os.str());
  }
  return EnsembleDataset(m.num_models, m.num_samples, m.num_classes, std::move(logits),
                         std::move(labels), std::move(m.costs_ms));
}

DatasetManifest save_dataset(const EnsembleDataset& dataset, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::IoFailure, "cannot create directory " + dir.string() + ": " + ec.message());

  DatasetManifest m;
  m.num_models = dataset.num_models();
  m.num_samples = dataset.num_samples();
  m.num_classes = dataset.num_classes();
  m.label_file = "labels.ensy";
  m.costs_ms.assign(dataset.costs_ms().begin(), dataset.costs_ms().end());

  const auto rows = narrow_u32(m.num_samples, "num_samples");
  const auto cols = narrow_u32(m.num_classes, "num_classes");
  for (std::size_t i = 0; i < m.num_models; ++i) {
    std::string name = "model_" + std::to_string(i) + ".ensl";
    write_logit_file(dir / name, dataset.model_logits(i), rows, cols);
    m.logit_files.push_back(std::move(name));
  }
  write_label_file(dir / m.label_file, dataset.labels());

  // nlohmann emits doubles with round-trip precision, so costs survive exactly.
  json j = json::object();
  j["version"] = m.version;
  j["num_models"] = m.num_models;
  j["num_samples"] = m.num_samples;
  j["num_classes"] = m.num_classes;
  j["logit_files"] = m.logit_files;
  j["label_file"] = m.label_file;
  j["costs_ms"] = m.costs_ms;
  fs::path manifest_file = dir / kManifestName;
  std::ofstream out(manifest_file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoFailure, "cannot create " + manifest_file.string());
  out << j.dump(2) << '\n';
  check_written(out, manifest_file);
  return m;
}

// ---- CSV --------------------------------------------------------------------

EnsembleDataset import_csv(std::span<const fs::path> logits_csvs, const fs::path& labels_csv,
                           std::vector<double> costs_ms) {
  if (logits_csvs.empty()) throw Error(ErrorKind::DimensionMismatch, "no logit CSV files given");
  std::size_t num_samples = 0, num_classes = 0;
  std::vector<float> logits;
  for (std::size_t i = 0; i < logits_csvs.size(); ++i) {
    const auto& path = logits_csvs[i];
    auto lines = csv_lines(path);
    if (i == 0) {
      num_samples = lines.size();
      if (num_samples == 0) throw Error(ErrorKind::DimensionMismatch, path.string() + " has no rows");
      num_classes = split_fields(lines[0]).size();
    } else if (lines.size() != num_samples) {
      throw Error(ErrorKind::DimensionMismatch,
                  path.string() + " has " + std::to_string(lines.size()) + " rows, expected " +
                      std::to_string(num_samples));
    }
    for (std::size_t row = 0; row < lines.size(); ++row) {
      auto fields = split_fields(lines[row]);
      if (fields.size() != num_classes) {
        std::ostringstream os;
        os << path.string() << " row " << row << " has " << fields.size() << " columns, expected "
           << num_classes;
        throw Error(ErrorKind::RaggedRows, os.str());
      }
      for (std::size_t col = 0; col < fields.size(); ++col)
        logits.push_back(parse_field<float>(fields[col], path, row, col));
    }
  }

  auto lines = csv_lines(labels_csv);
  if (lines.size() != num_samples)
    throw Error(ErrorKind::DimensionMismatch,
                labels_csv.string() + " has " + std::to_string(lines.size()) + " rows, expected " +
                    std::to_string(num_samples));
  std::vector<std::uint32_t> labels;
  labels.reserve(num_samples);
  for (std::size_t row = 0; row < lines.size(); ++row) {
    auto fields = split_fields(lines[row]);
    if (fields.size() != 1) {
      std::ostringstream os;
      os << labels_csv.string() << " row " << row << " has " << fields.size()
         << " columns, expected 1";
      throw Error(ErrorKind::RaggedRows, os.str());
    }
    labels.push_back(parse_field<std::uint32_t>(fields[0], labels_csv, row, 0));
  }
  return EnsembleDataset(logits_csvs.size(), num_samples, num_classes, std::move(logits),
                         std::move(labels), std::move(costs_ms));
}

void export_logits_csv(const EnsembleDataset& dataset, std::size_t model, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoFailure, "cannot create " + path.string());
  for (std::size_t m = 0; m < dataset.num_samples(); ++m) {
    auto row = dataset.logits(model, m);
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out << ',';
      out << shortest(row[c]);
    }
    out << '\n';
  }
  check_written(out, path);
}

void export_labels_csv(const EnsembleDataset& dataset, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoFailure, "cannot create " + path.string());
  for (auto label : dataset.labels()) out << label << '\n';
  check_written(out, path);
}

}  // namespace flexens
