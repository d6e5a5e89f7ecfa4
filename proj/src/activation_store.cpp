#include "bpm/activation_store.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <unordered_map>

#include "bpm/error.hpp"

namespace bpm {

std::string_view kind_name(ContainerKind k) {
  return k == ContainerKind::Activations ? "activations" : "class_probabilities";
}

ActivationContainer::ActivationContainer(std::string model_id, std::string layer_tag, ContainerKind kind,
                                         std::vector<std::string> stimulus_ids, std::size_t n_units,
                                         std::vector<float> data, std::map<int, std::string> label_map)
    : model_id_(std::move(model_id)),
      layer_tag_(std::move(layer_tag)),
      kind_(kind),
      stimulus_ids_(std::move(stimulus_ids)),
      n_units_(n_units),
      data_(std::move(data)),
      label_map_(std::move(label_map)) {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::InvariantViolation, why); };
  if (data_.size() != stimulus_ids_.size() * n_units_) {
    fail("data holds " + std::to_string(data_.size()) + " values, expected " +
         std::to_string(stimulus_ids_.size()) + " x " + std::to_string(n_units_));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) fail("non-finite value at flat index " + std::to_string(i));
  }
  for (const auto& id : stimulus_ids_) {
    if (id.empty() || id.find_first_of("\n\r") != std::string::npos) fail("bad stimulus id '" + id + "'");
  }
  if (kind_ == ContainerKind::ClassProbabilities) {
    for (std::size_t r = 0; r < stimulus_ids_.size(); ++r) {
      double sum = 0.0;
      for (float v : row(r)) {
        if (v < 0.0f) fail("negative probability in row " + std::to_string(r));
        sum += v;
      }
      if (std::abs(sum - 1.0) > 1e-4) {
        fail("probability row " + std::to_string(r) + " sums to " + format_double(sum));
      }
    }
  }
}

namespace {

std::vector<unsigned char> encode_blob(std::span<const float> values) {
  std::vector<unsigned char> out(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(values[i]);
    out[4 * i + 0] = static_cast<unsigned char>(bits & 0xFF);
    out[4 * i + 1] = static_cast<unsigned char>((bits >> 8) & 0xFF);
    out[4 * i + 2] = static_cast<unsigned char>((bits >> 16) & 0xFF);
    out[4 * i + 3] = static_cast<unsigned char>((bits >> 24) & 0xFF);
  }
  return out;
}

std::vector<float> decode_blob(std::span<const unsigned char> bytes) {
  std::vector<float> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::uint32_t bits = static_cast<std::uint32_t>(bytes[4 * i]) |
                               (static_cast<std::uint32_t>(bytes[4 * i + 1]) << 8) |
                               (static_cast<std::uint32_t>(bytes[4 * i + 2]) << 16) |
                               (static_cast<std::uint32_t>(bytes[4 * i + 3]) << 24);
    out[i] = std::bit_cast<float>(bits);
  }
  return out;
}

std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::string sha256_hex(std::span<const unsigned char> bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
    throw Error(ErrorCode::IoError, "sha256 failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xF];
  }
  return out;
}

// meta layout:
//   format_version = 1
//   model_id = ...
//   layer_tag = ...
//   kind = activations | class_probabilities
//   n_stimuli = N
//   n_units = U
//   blob_sha256 = <hex>
//   [stimulus_ids]
//   <one id per line, row order>
//   [label_map]            (optional)
//   <class index> <TAB> <label>
void write_container(const ActivationContainer& c, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto blob = encode_blob(c.data());
  std::string meta;
  meta += "format_version = " + std::to_string(ActivationContainer::kFormatVersion) + "\n";
  meta += "model_id = " + c.model_id() + "\n";
  meta += "layer_tag = " + c.layer_tag() + "\n";
  meta += "kind = " + std::string(kind_name(c.kind())) + "\n";
  meta += "n_stimuli = " + std::to_string(c.n_stimuli()) + "\n";
  meta += "n_units = " + std::to_string(c.n_units()) + "\n";
  meta += "blob_sha256 = " + sha256_hex(blob) + "\n";
  meta += "[stimulus_ids]\n";
  for (const auto& id : c.stimulus_ids()) meta += id + "\n";
  if (!c.label_map().empty()) {
    meta += "[label_map]\n";
    for (const auto& [k, v] : c.label_map()) meta += std::to_string(k) + "\t" + v + "\n";
  }

  {
    std::ofstream out(dir / "data.f32", std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + (dir / "data.f32").string());
    out.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + (dir / "data.f32").string());
  }
  write_text_file(dir / "meta", meta);
}

ActivationContainer read_container(const std::filesystem::path& dir) {
  const auto meta_path = dir / "meta";
  const auto blob_path = dir / "data.f32";
  if (!std::filesystem::exists(meta_path) || !std::filesystem::exists(blob_path)) {
    throw Error(ErrorCode::IoError, "container " + dir.string() + " lacks meta or data.f32");
  }
  const auto text = read_text_file(meta_path);

  std::map<std::string, std::string> fields;
  std::vector<std::string> ids;
  std::map<int, std::string> labels;
  enum class Section { Header, Ids, Labels } section = Section::Header;
  for (auto line : split(text, '\n')) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line == "[stimulus_ids]") {
      section = Section::Ids;
      continue;
    }
    if (line == "[label_map]") {
      section = Section::Labels;
      continue;
    }
    if (line.empty()) continue;
    switch (section) {
      case Section::Header: {
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw Error(ErrorCode::ParseError, "meta: bad line '" + line + "'");
        fields[std::string(trim(std::string_view(line).substr(0, eq)))] =
            std::string(trim(std::string_view(line).substr(eq + 1)));
        break;
      }
      case Section::Ids:
        ids.push_back(line);
        break;
      case Section::Labels: {
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw Error(ErrorCode::ParseError, "meta: bad label line '" + line + "'");
        labels[static_cast<int>(parse_double(line.substr(0, tab)))] = line.substr(tab + 1);
        break;
      }
    }
  }
  auto field = [&](const std::string& key) -> const std::string& {
    const auto it = fields.find(key);
    if (it == fields.end()) throw Error(ErrorCode::ParseError, "meta: missing field '" + key + "'");
    return it->second;
  };
  if (field("format_version") != std::to_string(ActivationContainer::kFormatVersion)) {
    throw Error(ErrorCode::UnknownVersion, "format_version " + field("format_version"));
  }
  ContainerKind kind;
  if (field("kind") == "activations") {
    kind = ContainerKind::Activations;
  } else if (field("kind") == "class_probabilities") {
    kind = ContainerKind::ClassProbabilities;
  } else {
    throw Error(ErrorCode::ParseError, "meta: unknown kind '" + field("kind") + "'");
  }
  const auto n_stimuli = static_cast<std::size_t>(parse_double(field("n_stimuli")));
  const auto n_units = static_cast<std::size_t>(parse_double(field("n_units")));
  if (ids.size() != n_stimuli) {
    throw Error(ErrorCode::ShapeMismatch, "meta lists " + std::to_string(ids.size()) + " stimulus ids, n_stimuli = " +
                                              std::to_string(n_stimuli));
  }

  const auto blob = read_bytes(blob_path);
  if (blob.size() != n_stimuli * n_units * 4) {
    throw Error(ErrorCode::ShapeMismatch, "data.f32 has " + std::to_string(blob.size()) + " bytes, expected " +
                                              std::to_string(n_stimuli * n_units * 4));
  }
  if (sha256_hex(blob) != field("blob_sha256")) {
    throw Error(ErrorCode::ChecksumMismatch, "data.f32 does not match blob_sha256 in " + meta_path.string());
  }
  return ActivationContainer(field("model_id"), field("layer_tag"), kind, std::move(ids), n_units,
                             decode_blob(blob), std::move(labels));
}

Alignment align(const ActivationContainer& c, const StimulusSet& s) {
  std::unordered_map<std::string, std::size_t> row;
  std::string duplicates;
  for (std::size_t i = 0; i < c.stimulus_ids().size(); ++i) {
    if (!row.emplace(c.stimulus_ids()[i], i).second) {
      duplicates += (duplicates.empty() ? "" : ", ") + c.stimulus_ids()[i];
    }
  }
  if (!duplicates.empty()) throw Error(ErrorCode::DuplicateStimulus, duplicates);

  Alignment a;
  std::string missing;
  for (const auto& r : s.manifest) {
    const auto it = row.find(r.stimulus_id);
    if (it == row.end()) {
      missing += (missing.empty() ? "" : ", ") + r.stimulus_id;
      continue;
    }
    a.row_of_record.push_back(it->second);
  }
  if (!missing.empty()) throw Error(ErrorCode::MissingStimulus, missing);
  return a;
}

}  // namespace bpm
