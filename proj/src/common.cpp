#include <cstdlib>
#include <thread>

#include "emsca/error.hpp"
#include "emsca/parallel.hpp"
#include "emsca/text.hpp"

namespace emsca {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::malformed_trace: return "malformed-trace";
    case Errc::corrupt_sample: return "corrupt-sample";
    case Errc::out_of_range: return "range";
    case Errc::unsupported_ratio: return "unsupported-ratio";
    case Errc::io: return "io";
    case Errc::lookup: return "lookup";
    case Errc::insufficient_data: return "insufficient-data";
    case Errc::missing_label: return "missing-label";
    case Errc::invalid_dataset: return "invalid-dataset";
    case Errc::divergence: return "divergence";
    case Errc::shape: return "shape";
    case Errc::incompatible_dataset: return "incompatible-dataset";
    case Errc::insufficient_samples: return "insufficient-samples";
    case Errc::model_format: return "model-format";
    case Errc::degenerate_data: return "degenerate-data";
    case Errc::solver: return "solver";
    case Errc::network: return "network";
    case Errc::manifest: return "manifest";
  }
  return "unknown";
}

unsigned worker_count() noexcept {
  if (const char* env = std::getenv("EMSCA_THREADS")) {
    if (auto v = text::parse_u64(env); v && *v > 0) return static_cast<unsigned>(*v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

}  // namespace emsca
