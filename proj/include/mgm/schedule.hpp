#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mgm/rng.hpp"

namespace mgm {

enum class MaskScheduleId { Root, Linear, Square, Cosine, Arccos };

MaskScheduleId schedule_from_name(const std::string& name);
const char* schedule_name(MaskScheduleId id);
std::vector<MaskScheduleId> all_schedules();

// Mask fraction gamma(r): 1 at r=0, 0 at r=1, strictly decreasing.
// r outside [0,1] is a parameter error.
double schedule_gamma(MaskScheduleId id, double r);

// clamp(round(gamma(r)*n), 1, n): every draw masks at least one position.
int masked_count_for_ratio(MaskScheduleId id, double r, int n);

struct TrainingMask {
  std::vector<std::uint8_t> mask;  // n entries, 1 = masked
  double ratio = 0.0;              // the uniform draw r
  int masked_count = 0;
};

// r ~ Uniform(0,1); masked positions chosen uniformly without replacement.
TrainingMask sample_training_mask(int n, MaskScheduleId id, Rng& rng);

}  // namespace mgm
