#pragma once

#include <array>
#include <cstdint>

#include "cobra/errors.hpp"

namespace cobra {

/// Stream priorities at equal timestamps, lowest first.
enum class StreamKind : std::uint8_t {
  Control = 0,
  Depth = 1,
  Rgb = 2,
  Detect = 3,
  Replan = 4,
};

inline const char* stream_name(StreamKind k) {
  switch (k) {
    case StreamKind::Control: return "control";
    case StreamKind::Depth: return "depth";
    case StreamKind::Rgb: return "rgb";
    case StreamKind::Detect: return "detect";
    case StreamKind::Replan: return "replan";
  }
  return "?";
}

struct ScheduleConfig {
  double rgb = 30.0;
  double depth = 15.0;
  double detect = 10.0;
  double control = 500.0;
  double replan = 0.5;

  void validate() const {
    for (double r : {rgb, depth, detect, control, replan}) {
      if (!(r > 0)) throw ConfigError("rates", "all rates must be > 0");
    }
    if (control < rgb || control < depth || control < detect ||
        control < replan) {
      throw ConfigError("rates.control", "must be the fastest stream");
    }
  }
};

/// Logical-clock event stepper. Every stream ticks at k/rate for k = 0, 1,
/// ...; ties resolve by the fixed StreamKind priority, which makes the event
/// order fully deterministic.
class MultiRateScheduler {
 public:
  struct Tick {
    StreamKind kind;
    double time;
    std::int64_t index;
  };

  explicit MultiRateScheduler(const ScheduleConfig& cfg) {
    cfg.validate();
    streams_ = {Stream{StreamKind::Control, cfg.control},
                Stream{StreamKind::Depth, cfg.depth},
                Stream{StreamKind::Rgb, cfg.rgb},
                Stream{StreamKind::Detect, cfg.detect},
                Stream{StreamKind::Replan, cfg.replan}};
  }

  Tick next() {
    int best = 0;
    for (int i = 1; i < int(streams_.size()); ++i) {
      if (streams_[i].next_time() < streams_[best].next_time()) best = i;
      // Equal times fall through: the array is already priority-ordered.
    }
    Stream& s = streams_[best];
    const Tick tick{s.kind, s.next_time(), s.k};
    ++s.k;
    return tick;
  }

 private:
  struct Stream {
    StreamKind kind;
    double rate;
    std::int64_t k = 0;
    double next_time() const { return double(k) / rate; }
  };
  std::array<Stream, 5> streams_;
};

}  // namespace cobra
