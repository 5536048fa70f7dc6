#pragma once

#include "owsm/tensor.hpp"

#include <vector>

namespace owsm {

// Adam with bias correction. Moments are held per parameter in registration
// order; update arithmetic runs in double and is fully deterministic.
class Adam {
public:
    explicit Adam(double beta1 = 0.9, double beta2 = 0.98, double eps = 1e-9)
        : beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(std::vector<Parameter>& params, double lr);

    int64_t t() const { return t_; }

private:
    double beta1_, beta2_, eps_;
    int64_t t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

} // namespace owsm
