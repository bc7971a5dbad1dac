#pragma once

#include <optional>
#include <string>
#include <vector>

#include "edr/common.hpp"

namespace edr {

struct TimelinePoint {
    Timestamp minute{};
    double pred_bpm = 0;
    std::optional<double> label_bpm;
    std::optional<double> rolling_bpm;
};

/// Minute-indexed RR values for one patient; minutes strictly increasing,
/// absent minutes are gaps.
struct RrTimeline {
    std::string patient_id;
    std::vector<TimelinePoint> points;
};

}  // namespace edr
