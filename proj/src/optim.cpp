#include "owsm/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace owsm {

void Adam::step(std::vector<Parameter>& params, double lr) {
    if (m_.empty()) {
        m_.resize(params.size());
        v_.resize(params.size());
        for (size_t i = 0; i < params.size(); ++i) {
            m_[i].assign(params[i].value.numel(), 0.0);
            v_[i].assign(params[i].value.numel(), 0.0);
        }
    }
    if (m_.size() != params.size()) throw std::invalid_argument("adam: parameter set changed between steps");
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i];
        if (p.value.numel() != m_[i].size()) throw std::invalid_argument("adam: shape mismatch for " + p.name);
        auto& val = p.value.vec();
        const auto& grad = p.grad.vec();
        for (size_t j = 0; j < val.size(); ++j) {
            const double gj = static_cast<double>(grad[j]);
            m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * gj;
            v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * gj * gj;
            const double mhat = m_[i][j] / bc1;
            const double vhat = v_[i][j] / bc2;
            val[j] = static_cast<float>(static_cast<double>(val[j]) - lr * mhat / (std::sqrt(vhat) + eps_));
        }
    }
}

} // namespace owsm
