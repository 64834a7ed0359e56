#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace emsca {

/// Labeled feature matrix shared by the classifier and the novelty detector.
/// Rows are stored contiguously, row-major.
struct Dataset {
  std::size_t feature_dim = 0;
  std::vector<std::string> class_table;
  std::vector<double> values;
  std::vector<std::uint32_t> labels;

  std::size_t rows() const noexcept { return labels.size(); }
  std::size_t n_classes() const noexcept { return class_table.size(); }
  bool empty() const noexcept { return labels.empty(); }

  std::span<const double> row(std::size_t i) const noexcept {
    return {values.data() + i * feature_dim, feature_dim};
  }
  void add_row(std::span<const double> features, std::uint32_t label);

  std::vector<std::size_t> class_counts() const;
  /// Rows at `indices`, in that order; class table unchanged.
  Dataset subset(std::span<const std::size_t> indices) const;
  /// Row indices whose label is `class_index`, ascending.
  std::vector<std::size_t> rows_of_class(std::uint32_t class_index) const;

  /// Shape and label checks; throws invalid_dataset.
  void validate() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Dataset file: a UTF-8 header
//
//   emsca-features/1
//   rows <N>
//   cols <D>
//   classes <C>
//   class <name>        (C lines, index order)
//   end
//
// followed by N*D little-endian float64 values (row-major) and N
// little-endian uint32 class indices.
inline constexpr const char* kDatasetMagic = "emsca-features/1";

void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace emsca
