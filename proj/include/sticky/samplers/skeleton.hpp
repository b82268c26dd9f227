#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sticky/state.hpp"

namespace sticky {

enum class EventKind : std::uint8_t { Freeze = 0, Thaw = 1, Reflect = 2, Shadow = 3, Refresh = 4 };

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::Freeze: return "freeze";
    case EventKind::Thaw: return "thaw";
    case EventKind::Reflect: return "reflect";
    case EventKind::Shadow: return "shadow";
    case EventKind::Refresh: return "refresh";
  }
  return "?";
}

inline constexpr std::size_t kNoCoord = std::numeric_limits<std::size_t>::max();
inline constexpr std::uint32_t kNoVector = std::numeric_limits<std::uint32_t>::max();

// Post-event value of the touched coordinate. Events that change the whole
// velocity (BPS, Boomerang) point into the skeleton's vector table instead.
struct EventRecord {
  double t = 0.0;
  EventKind kind = EventKind::Reflect;
  std::size_t coord = kNoCoord;
  double x = 0.0;
  double v = 0.0;
  std::uint32_t full = kNoVector;
};

struct EventCounts {
  std::uint64_t reflect = 0, freeze = 0, thaw = 0, shadow = 0, refresh = 0;

  void add(EventKind k) {
    switch (k) {
      case EventKind::Reflect: ++reflect; break;
      case EventKind::Freeze: ++freeze; break;
      case EventKind::Thaw: ++thaw; break;
      case EventKind::Shadow: ++shadow; break;
      case EventKind::Refresh: ++refresh; break;
    }
  }
  std::uint64_t total() const { return reflect + freeze + thaw + shadow + refresh; }
};

struct Skeleton {
  StickyState initial;
  DynamicsKind dynamics = LinearDynamics{};
  std::vector<EventRecord> events;
  std::vector<std::vector<double>> full_x, full_v;
  double T = 0.0;
  EventCounts counts;
  bool recorded = true;  // false when only counts were kept

  void push(const EventRecord& e) {
    counts.add(e.kind);
    if (recorded) events.push_back(e);
  }

  void push_full(double t, EventKind kind, const std::vector<double>& x, const std::vector<double>& v) {
    counts.add(kind);
    if (!recorded) return;
    EventRecord e;
    e.t = t;
    e.kind = kind;
    e.full = static_cast<std::uint32_t>(full_x.size());
    full_x.push_back(x);
    full_v.push_back(v);
    events.push_back(e);
  }
};

struct ReplayReport {
  bool ok = true;
  std::string message;
  std::size_t events_checked = 0;
};

// Re-simulates the deterministic flow between events and checks that every
// recorded event is consistent with it.
inline ReplayReport replay_check(const Skeleton& sk, double tol = 1e-7) {
  ReplayReport rep;
  auto fail = [&](std::size_t k, const std::string& why) {
    rep.ok = false;
    rep.message = "event " + std::to_string(k) + ": " + why;
    return rep;
  };
  try {
    sk.initial.validate();
  } catch (const std::exception& e) {
    return fail(0, e.what());
  }
  StickyState s = sk.initial;
  double prev = s.t;
  for (std::size_t k = 0; k < sk.events.size(); ++k) {
    const auto& e = sk.events[k];
    if (!(e.t >= prev)) return fail(k, "time decreases");
    if (e.t > sk.T * (1.0 + 1e-12) + 1e-12) return fail(k, "event after final time");
    flow_in_place(s, e.t - prev, sk.dynamics);
    s.t = e.t;
    prev = e.t;
    if (e.full != kNoVector) {
      const auto& fx = sk.full_x[e.full];
      const auto& fv = sk.full_v[e.full];
      if (fx.size() != s.dim() || fv.size() != s.dim()) return fail(k, "vector size mismatch");
      for (std::size_t i = 0; i < s.dim(); ++i) {
        if (std::abs(fx[i] - s.x[i]) > tol * (1.0 + std::abs(s.x[i]))) return fail(k, "position jump");
        if (s.frozen[i] && (fv[i] > 0.0) != (s.v[i] > 0.0)) return fail(k, "frozen velocity changed sign");
      }
      s.x = fx;
      s.v = fv;
    } else {
      const std::size_t i = e.coord;
      if (i >= s.dim()) return fail(k, "coordinate out of range");
      const double scale = 1.0 + std::abs(s.x[i]);
      switch (e.kind) {
        case EventKind::Freeze:
          if (s.frozen[i]) return fail(k, "freeze of a frozen coordinate");
          if (std::abs(s.x[i]) > tol * scale) return fail(k, "freeze away from zero");
          if (e.x != 0.0) return fail(k, "frozen position not snapped to zero");
          s.x[i] = 0.0;
          s.frozen[i] = 1;
          break;
        case EventKind::Thaw:
          if (!s.frozen[i]) return fail(k, "thaw of an active coordinate");
          s.frozen[i] = 0;
          s.v[i] = e.v;
          break;
        case EventKind::Reflect:
        case EventKind::Shadow:
          if (s.frozen[i]) return fail(k, "reflection of a frozen coordinate");
          if (std::abs(e.x - s.x[i]) > tol * scale) return fail(k, "position mismatch");
          s.x[i] = e.x;
          s.v[i] = e.v;
          break;
        case EventKind::Refresh:
          s.v[i] = e.v;
          break;
      }
    }
    for (std::size_t i = 0; i < s.dim(); ++i)
      if (s.frozen[i] && (s.x[i] != 0.0 || s.v[i] == 0.0)) return fail(k, "frozen invariant broken");
    ++rep.events_checked;
  }
  return rep;
}

inline void write_skeleton_csv(std::ostream& os, const Skeleton& sk) {
  os.precision(17);
  os << "t,kind,coord,x,v\n";
  std::vector<double> cur_v = sk.initial.v;
  for (const auto& e : sk.events) {
    if (e.full == kNoVector) {
      os << e.t << ',' << to_string(e.kind) << ',' << e.coord << ',' << e.x << ',' << e.v << '\n';
      if (e.coord < cur_v.size()) cur_v[e.coord] = e.v;
    } else {
      const auto& fx = sk.full_x[e.full];
      const auto& fv = sk.full_v[e.full];
      for (std::size_t i = 0; i < fx.size(); ++i) {
        if (fv[i] == cur_v[i]) continue;
        os << e.t << ',' << to_string(e.kind) << ',' << i << ',' << fx[i] << ',' << fv[i] << '\n';
        cur_v[i] = fv[i];
      }
    }
  }
}

}  // namespace sticky
