#pragma once

// Text and CSV renderings of classification results. Numbers are printed with
// fixed decimals so reruns produce byte-identical files.

#include <string>
#include <utility>
#include <vector>

#include "emsca/mlp.hpp"

namespace emsca {

/// (class id, display name) in the order rows should appear.
using RowOrder = std::vector<std::pair<std::string, std::string>>;

/// "Activity | Precision | Recall | F1-Score" table; empty order means every
/// class in table order under its own name.
std::string format_classification_table(const ClassificationReport& report,
                                        const RowOrder& order = {},
                                        const std::string& first_header = "Activity");

/// Confusion grid, rows = true class, columns = predicted; `labels` replaces
/// the class names in the headers when given.
std::string format_confusion(const ClassificationReport& report,
                             const std::vector<std::string>& labels = {});

/// class,precision,recall,f1,support
std::string classification_csv(const ClassificationReport& report, const RowOrder& order = {});
/// true\predicted grid with a header row of class names.
std::string confusion_csv(const ClassificationReport& report,
                          const std::vector<std::string>& labels = {});
/// fold,accuracy,macro_f1 then mean and ci95 rows.
std::string crossval_csv(const CrossValReport& report);

}  // namespace emsca
