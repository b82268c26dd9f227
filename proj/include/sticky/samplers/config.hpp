#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

#include "sticky/samplers/skeleton.hpp"

namespace sticky {

enum class ZigZagVariant { Global, Local, FullyLocal, Sparse };

inline const char* to_string(ZigZagVariant v) {
  switch (v) {
    case ZigZagVariant::Global: return "global";
    case ZigZagVariant::Local: return "local";
    case ZigZagVariant::FullyLocal: return "fully-local";
    case ZigZagVariant::Sparse: return "sparse";
  }
  return "?";
}

inline ZigZagVariant parse_variant(const std::string& s) {
  if (s == "global") return ZigZagVariant::Global;
  if (s == "local") return ZigZagVariant::Local;
  if (s == "fully-local" || s == "fully_local") return ZigZagVariant::FullyLocal;
  if (s == "sparse") return ZigZagVariant::Sparse;
  throw std::invalid_argument("unknown sampler variant '" + s + "'");
}

struct SamplerConfig {
  double T = 1.0;
  std::uint64_t seed = 1;
  ZigZagVariant variant = ZigZagVariant::Local;
  double refresh_rate = 0.0;
  bool subsampling = false;
  double rj_p = 1.0;
  bool record = true;  // keep the event list, not just counts

  void validate() const {
    if (!(T >= 0.0)) throw std::invalid_argument("SamplerConfig: T must be nonnegative");
    if (!(rj_p > 0.0 && rj_p <= 1.0)) throw std::invalid_argument("SamplerConfig: rj_p must lie in (0,1]");
    if (refresh_rate < 0.0) throw std::invalid_argument("SamplerConfig: refresh rate must be nonnegative");
  }
};

struct RunStats {
  std::uint64_t clock_recomputations = 0;
  std::uint64_t proposals = 0;
  std::uint64_t renewals = 0;      // horizon exhaustions
  std::uint64_t crossings = 0;     // zero passages without sticking
  std::uint64_t queue_pops = 0;
  std::uint64_t stale_pops = 0;
  std::uint64_t order_violations = 0;  // popped earlier than the previous pop
  bool stopped_early = false;

  double acceptance_ratio(const EventCounts& c) const {
    const auto tried = c.reflect + c.shadow;
    return tried == 0 ? 1.0 : static_cast<double>(c.reflect) / static_cast<double>(tried);
  }
};

struct SamplerRun {
  Skeleton skeleton;
  StickyState final_state;
  RunStats stats;
};

// Called after each recorded event; returning false stops the run at that time.
// Positions of lazily advanced coordinates in the state may lag behind the event time.
using EventObserver = std::function<bool(const StickyState&, const EventRecord&)>;

}  // namespace sticky
