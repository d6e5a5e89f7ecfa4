#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "bpm/stimulus.hpp"

namespace bpm {

enum class ContainerKind { Activations, ClassProbabilities };

std::string_view kind_name(ContainerKind k);

/// Responses of one model layer to one stimulus set. Rows are stimuli,
/// columns are units (or classes for probability containers).
class ActivationContainer {
 public:
  static constexpr int kFormatVersion = 1;

  ActivationContainer() = default;
  /// Validates the invariants; throws InvariantViolation.
  ActivationContainer(std::string model_id, std::string layer_tag, ContainerKind kind,
                      std::vector<std::string> stimulus_ids, std::size_t n_units, std::vector<float> data,
                      std::map<int, std::string> label_map = {});

  const std::string& model_id() const { return model_id_; }
  const std::string& layer_tag() const { return layer_tag_; }
  ContainerKind kind() const { return kind_; }
  std::size_t n_stimuli() const { return stimulus_ids_.size(); }
  std::size_t n_units() const { return n_units_; }
  const std::vector<std::string>& stimulus_ids() const { return stimulus_ids_; }
  const std::map<int, std::string>& label_map() const { return label_map_; }

  std::span<const float> data() const { return data_; }
  std::span<const float> row(std::size_t i) const { return std::span<const float>(data_).subspan(i * n_units_, n_units_); }

  bool operator==(const ActivationContainer&) const = default;

 private:
  std::string model_id_;
  std::string layer_tag_;
  ContainerKind kind_ = ContainerKind::Activations;
  std::vector<std::string> stimulus_ids_;
  std::size_t n_units_ = 0;
  std::vector<float> data_;
  std::map<int, std::string> label_map_;
};

/// Writes `<dir>/meta` and `<dir>/data.f32`.
void write_container(const ActivationContainer& c, const std::filesystem::path& dir);
ActivationContainer read_container(const std::filesystem::path& dir);

std::string sha256_hex(std::span<const unsigned char> bytes);

/// Container row for each manifest record, in manifest order.
struct Alignment {
  std::vector<std::size_t> row_of_record;
};

Alignment align(const ActivationContainer& c, const StimulusSet& s);

}  // namespace bpm
