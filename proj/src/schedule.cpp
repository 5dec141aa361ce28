#include "mgm/schedule.hpp"

#include <cmath>

#include "mgm/error.hpp"

namespace mgm {

MaskScheduleId schedule_from_name(const std::string& name) {
  if (name == "root") return MaskScheduleId::Root;
  if (name == "linear") return MaskScheduleId::Linear;
  if (name == "square") return MaskScheduleId::Square;
  if (name == "cosine") return MaskScheduleId::Cosine;
  if (name == "arccos") return MaskScheduleId::Arccos;
  throw InvalidParameterError("unknown mask schedule '" + name +
                              "' (expected root|linear|square|cosine|arccos)");
}

const char* schedule_name(MaskScheduleId id) {
  switch (id) {
    case MaskScheduleId::Root: return "root";
    case MaskScheduleId::Linear: return "linear";
    case MaskScheduleId::Square: return "square";
    case MaskScheduleId::Cosine: return "cosine";
    case MaskScheduleId::Arccos: return "arccos";
  }
  throw ContractError("schedule_name: bad enum value");
}

std::vector<MaskScheduleId> all_schedules() {
  return {MaskScheduleId::Root, MaskScheduleId::Linear, MaskScheduleId::Square,
          MaskScheduleId::Cosine, MaskScheduleId::Arccos};
}

double schedule_gamma(MaskScheduleId id, double r) {
  if (!(r >= 0.0 && r <= 1.0)) {
    throw InvalidParameterError("schedule_gamma: r must lie in [0,1], got " + std::to_string(r));
  }
  constexpr double kPi = 3.14159265358979323846;
  switch (id) {
    case MaskScheduleId::Root: return 1.0 - std::sqrt(r);
    case MaskScheduleId::Linear: return 1.0 - r;
    case MaskScheduleId::Square: return 1.0 - r * r;
    case MaskScheduleId::Cosine: return std::cos(kPi * r / 2.0);
    case MaskScheduleId::Arccos: return (2.0 / kPi) * std::acos(r);
  }
  throw ContractError("schedule_gamma: bad enum value");
}

int masked_count_for_ratio(MaskScheduleId id, double r, int n) {
  if (n < 1) throw InvalidParameterError("masked_count_for_ratio: n must be >= 1");
  const double want = std::round(schedule_gamma(id, r) * n);
  if (want <= 1.0) return 1;
  if (want >= n) return n;
  return static_cast<int>(want);
}

TrainingMask sample_training_mask(int n, MaskScheduleId id, Rng& rng) {
  TrainingMask out;
  out.ratio = rng.uniform();
  out.masked_count = masked_count_for_ratio(id, out.ratio, n);
  out.mask.assign(static_cast<std::size_t>(n), 0);
  for (int pos : rng.sample_without_replacement(n, out.masked_count)) {
    out.mask[static_cast<std::size_t>(pos)] = 1;
  }
  return out;
}

}  // namespace mgm
