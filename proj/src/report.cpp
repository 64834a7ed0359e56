#include "emsca/report.hpp"

#include <algorithm>
#include <sstream>

#include "emsca/error.hpp"
#include "emsca/text.hpp"

namespace emsca {

namespace {

RowOrder resolve_order(const ClassificationReport& r, const RowOrder& order) {
  if (order.empty()) {
    RowOrder all;
    for (const auto& c : r.class_table) all.emplace_back(c, c);
    return all;
  }
  for (const auto& [id, name] : order) {
    if (std::find(r.class_table.begin(), r.class_table.end(), id) == r.class_table.end()) {
      fail(Errc::lookup, "report has no class '" + id + "'");
    }
  }
  return order;
}

std::size_t index_of(const ClassificationReport& r, const std::string& id) {
  return static_cast<std::size_t>(std::find(r.class_table.begin(), r.class_table.end(), id) -
                                  r.class_table.begin());
}

std::string pad(std::string s, std::size_t w) {
  if (s.size() < w) s.append(w - s.size(), ' ');
  return s;
}

std::string lpad(std::string s, std::size_t w) {
  if (s.size() < w) s.insert(0, w - s.size(), ' ');
  return s;
}

}  // namespace

std::string format_classification_table(const ClassificationReport& report, const RowOrder& order,
                                        const std::string& first_header) {
  const auto rows = resolve_order(report, order);
  std::size_t w = first_header.size();
  for (const auto& [id, name] : rows) w = std::max(w, name.size());
  const std::vector<std::string> heads{"Precision", "Recall", "F1-Score"};
  std::ostringstream os;
  auto rule = [&] {
    os << '+' << std::string(w + 2, '-');
    for (const auto& h : heads) os << '+' << std::string(h.size() + 2, '-');
    os << "+\n";
  };
  rule();
  os << "| " << pad(first_header, w) << ' ';
  for (const auto& h : heads) os << "| " << h << ' ';
  os << "|\n";
  rule();
  for (const auto& [id, name] : rows) {
    const std::size_t c = index_of(report, id);
    const double vals[] = {report.precision[c], report.recall[c], report.f1[c]};
    os << "| " << pad(name, w) << ' ';
    for (std::size_t k = 0; k < heads.size(); ++k) {
      os << "| " << lpad(text::format_fixed(vals[k], 2), heads[k].size()) << ' ';
    }
    os << "|\n";
  }
  rule();
  os << "accuracy " << text::format_fixed(report.accuracy, 4) << " over " << report.total << " samples\n";
  return os.str();
}

std::string format_confusion(const ClassificationReport& report, const std::vector<std::string>& labels) {
  const auto& names = labels.empty() ? report.class_table : labels;
  if (names.size() != report.class_table.size()) {
    fail(Errc::invalid_argument, "confusion labels do not match the class count");
  }
  std::size_t w = 4;
  for (const auto& n : names) w = std::max(w, n.size());
  for (const auto& row : report.confusion) {
    for (auto v : row) w = std::max(w, std::to_string(v).size());
  }
  std::ostringstream os;
  os << pad("true\\pred", std::max<std::size_t>(w, 9));
  for (const auto& n : names) os << ' ' << lpad(n, w);
  os << '\n';
  for (std::size_t i = 0; i < names.size(); ++i) {
    os << pad(names[i], std::max<std::size_t>(w, 9));
    for (auto v : report.confusion[i]) os << ' ' << lpad(std::to_string(v), w);
    os << '\n';
  }
  return os.str();
}

std::string classification_csv(const ClassificationReport& report, const RowOrder& order) {
  const auto rows = resolve_order(report, order);
  std::ostringstream os;
  os << "class,precision,recall,f1,support\n";
  for (const auto& [id, name] : rows) {
    const std::size_t c = index_of(report, id);
    std::size_t support = 0;
    for (auto v : report.confusion[c]) support += v;
    os << name << ',' << text::format_fixed(report.precision[c], 6) << ','
       << text::format_fixed(report.recall[c], 6) << ',' << text::format_fixed(report.f1[c], 6) << ','
       << support << '\n';
  }
  os << "accuracy,,,," << text::format_fixed(report.accuracy, 6) << '\n';
  return os.str();
}

std::string confusion_csv(const ClassificationReport& report, const std::vector<std::string>& labels) {
  const auto& names = labels.empty() ? report.class_table : labels;
  if (names.size() != report.class_table.size()) {
    fail(Errc::invalid_argument, "confusion labels do not match the class count");
  }
  std::ostringstream os;
  os << "true\\predicted";
  for (const auto& n : names) os << ',' << n;
  os << '\n';
  for (std::size_t i = 0; i < names.size(); ++i) {
    os << names[i];
    for (auto v : report.confusion[i]) os << ',' << v;
    os << '\n';
  }
  return os.str();
}

std::string crossval_csv(const CrossValReport& report) {
  std::ostringstream os;
  os << "fold,accuracy,macro_f1\n";
  for (std::size_t f = 0; f < report.fold_accuracies.size(); ++f) {
    os << f << ',' << text::format_fixed(report.fold_accuracies[f], 6) << ','
       << text::format_fixed(report.fold_macro_f1[f], 6) << '\n';
  }
  os << "mean," << text::format_fixed(report.mean_accuracy, 6) << ','
     << text::format_fixed(report.mean_macro_f1, 6) << '\n';
  os << "ci95," << text::format_fixed(report.ci95_halfwidth, 6) << ','
     << text::format_fixed(report.f1_ci95_halfwidth, 6) << '\n';
  return os.str();
}

}  // namespace emsca
