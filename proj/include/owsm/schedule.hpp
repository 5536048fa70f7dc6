#pragma once

#include <cmath>
#include <cstdint>

namespace owsm {

// Two-phase linear warmup followed by exponential decay: a slow ramp to a
// very small rate over the first knee_step updates, a faster ramp to the
// peak over the next (peak_step - knee_step), then peak * decay_rate^(n).
struct WarmupSchedule {
    int64_t knee_step = 30000;
    double knee_lr = 5e-5;
    int64_t peak_step = 60000;
    double peak_lr = 2e-4;
    double decay_rate = default_decay_rate();

    // Default halves the rate every 200K post-peak steps.
    static double default_decay_rate() { return std::pow(0.5, 1.0 / 200000.0); }

    void validate() const;
};

double lr_at_step(int64_t step, const WarmupSchedule& sched);

} // namespace owsm
