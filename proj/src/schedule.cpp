#include "owsm/schedule.hpp"

#include <stdexcept>

namespace owsm {

void WarmupSchedule::validate() const {
    if (knee_step <= 0 || peak_step <= knee_step)
        throw std::invalid_argument("schedule: need 0 < knee_step < peak_step");
    if (knee_lr <= 0.0 || peak_lr <= knee_lr)
        throw std::invalid_argument("schedule: need 0 < knee_lr < peak_lr");
    if (decay_rate <= 0.0 || decay_rate >= 1.0) throw std::invalid_argument("schedule: decay rate must lie in (0, 1)");
}

double lr_at_step(int64_t step, const WarmupSchedule& sched) {
    sched.validate();
    if (step < 0) throw std::invalid_argument("schedule: step must be nonnegative");
    if (step <= sched.knee_step) {
        const double t = static_cast<double>(step) / static_cast<double>(sched.knee_step);
        return sched.knee_lr * t;
    }
    if (step <= sched.peak_step) {
        const double t = static_cast<double>(step - sched.knee_step) /
                         static_cast<double>(sched.peak_step - sched.knee_step);
        return sched.knee_lr * (1.0 - t) + sched.peak_lr * t;
    }
    return sched.peak_lr * std::pow(sched.decay_rate, static_cast<double>(step - sched.peak_step));
}

} // namespace owsm
