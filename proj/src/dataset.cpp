#include "emsca/dataset.hpp"

#include <cmath>
#include <sstream>

#include "byte_io.hpp"
#include "emsca/error.hpp"
#include "emsca/text.hpp"

namespace emsca {

void Dataset::add_row(std::span<const double> features, std::uint32_t label) {
  if (labels.empty() && feature_dim == 0) feature_dim = features.size();
  if (features.size() != feature_dim) {
    fail(Errc::shape, "row has " + std::to_string(features.size()) +
                          " features, dataset expects " + std::to_string(feature_dim));
  }
  values.insert(values.end(), features.begin(), features.end());
  labels.push_back(label);
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(class_table.size(), 0);
  for (auto l : labels) {
    if (l < counts.size()) ++counts[l];
  }
  return counts;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.feature_dim = feature_dim;
  out.class_table = class_table;
  out.values.reserve(indices.size() * feature_dim);
  out.labels.reserve(indices.size());
  for (auto i : indices) {
    const auto r = row(i);
    out.values.insert(out.values.end(), r.begin(), r.end());
    out.labels.push_back(labels[i]);
  }
  return out;
}

std::vector<std::size_t> Dataset::rows_of_class(std::uint32_t class_index) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == class_index) out.push_back(i);
  }
  return out;
}

void Dataset::validate() const {
  if (values.size() != labels.size() * feature_dim) {
    fail(Errc::invalid_dataset, "value count does not match rows x feature_dim");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= class_table.size()) {
      fail(Errc::invalid_dataset, "row " + std::to_string(i) + " has class index " +
                                      std::to_string(labels[i]) + " outside the class table");
    }
  }
  for (double v : values) {
    if (!std::isfinite(v)) fail(Errc::invalid_dataset, "dataset contains a non-finite feature");
  }
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  dataset.validate();
  std::ostringstream header;
  header << kDatasetMagic << '\n'
         << "rows " << dataset.rows() << '\n'
         << "cols " << dataset.feature_dim << '\n'
         << "classes " << dataset.class_table.size() << '\n';
  for (const auto& c : dataset.class_table) header << "class " << c << '\n';
  header << "end\n";
  detail::ByteWriter w;
  w.bytes(header.str());
  w.f64s(dataset.values);
  for (auto l : dataset.labels) w.u32(l);
  text::write_file(path, w.view());
}

Dataset load_dataset(const std::filesystem::path& path) {
  const std::string body = text::read_file(path);
  const std::string ctx = path.string();
  std::size_t pos = 0;
  auto next_line = [&]() -> std::string_view {
    const auto nl = body.find('\n', pos);
    if (nl == std::string::npos) fail(Errc::invalid_dataset, ctx + ": truncated header");
    std::string_view line(body.data() + pos, nl - pos);
    pos = nl + 1;
    return line;
  };
  auto keyed = [&](std::string_view key) {
    const auto line = next_line();
    if (line.substr(0, key.size() + 1) != std::string(key) + " ") {
      fail(Errc::invalid_dataset, ctx + ": expected '" + std::string(key) + "' line");
    }
    return line.substr(key.size() + 1);
  };
  auto count = [&](std::string_view key) {
    auto v = text::parse_u64(keyed(key));
    if (!v) fail(Errc::invalid_dataset, ctx + ": bad " + std::string(key) + " count");
    return static_cast<std::size_t>(*v);
  };

  if (next_line() != kDatasetMagic) fail(Errc::invalid_dataset, ctx + ": not an emsca feature file");
  Dataset d;
  const std::size_t rows = count("rows");
  d.feature_dim = count("cols");
  const std::size_t n_classes = count("classes");
  for (std::size_t c = 0; c < n_classes; ++c) d.class_table.emplace_back(keyed("class"));
  if (next_line() != "end") fail(Errc::invalid_dataset, ctx + ": missing header terminator");

  detail::ByteReader r(std::string_view(body).substr(pos), Errc::invalid_dataset, ctx);
  if (rows != 0 && d.feature_dim > (r.remaining() / 8) / rows) {
    fail(Errc::invalid_dataset, ctx + ": truncated feature matrix");
  }
  d.values = r.f64s(rows * d.feature_dim);
  d.labels.resize(rows);
  for (auto& l : d.labels) l = r.u32();
  r.expect_end();
  d.validate();
  return d;
}

}  // namespace emsca
