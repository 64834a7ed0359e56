#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace emsca {

enum class Errc {
  invalid_argument,
  malformed_trace,
  corrupt_sample,
  out_of_range,
  unsupported_ratio,
  io,
  lookup,
  insufficient_data,
  missing_label,
  invalid_dataset,
  divergence,
  shape,
  incompatible_dataset,
  insufficient_samples,
  model_format,
  degenerate_data,
  solver,
  network,
  manifest,
};

std::string_view errc_name(Errc code) noexcept;

/// Every failure raised by the library carries one of the codes above so the
/// CLI can map it onto an exit status.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace emsca
