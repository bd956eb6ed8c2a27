#pragma once

#include <string>

#include "lpnsr/models.hpp"
#include "lpnsr/schedule.hpp"

namespace lpnsr {

// LPNW checkpoint: magic "LPNW", u32 version=1, u32 tensor count, then per
// tensor u16 name length, UTF-8 name, u32 ndim, dims, little-endian f32
// payload. A text manifest at "<path>.manifest" records the architecture tag
// and the schedule the network was trained under.
void save_checkpoint(const std::string& path, const NetworkParams& params,
                     const DiffusionSchedule& sched);

// Verifies magic/version (FormatError), architecture kind (ConfigError when
// the tag's kind differs from expected_kind) and schedule (ConfigError on any
// eta/kappa/T mismatch). Round-trips are bit-identical.
NetworkParams load_checkpoint(const std::string& path, const std::string& expected_kind,
                              const DiffusionSchedule& expected_sched);

}  // namespace lpnsr
