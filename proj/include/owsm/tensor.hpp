#pragma once

#include <cstddef>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace owsm {

inline std::string shape_str(const std::vector<int>& shape) {
    std::string s = "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

// Dense row-major rank-N array. Data and grad buffers are shared_ptrs so
// tensors can be passed around and aliased cheaply; every op allocates a
// fresh output, so shared buffers are never written through an alias.
template <class Real>
class TensorT {
public:
    TensorT() = default;

    explicit TensorT(std::vector<int> shape) : shape_(std::move(shape)) {
        size_t n = checked_numel(shape_);
        data_ = std::make_shared<std::vector<Real>>(n, Real(0));
    }

    TensorT(std::vector<int> shape, std::vector<Real> values) : shape_(std::move(shape)) {
        size_t n = checked_numel(shape_);
        if (values.size() != n) {
            throw std::invalid_argument("tensor data length " + std::to_string(values.size()) +
                                        " does not match shape " + shape_str(shape_));
        }
        data_ = std::make_shared<std::vector<Real>>(std::move(values));
    }

    static TensorT zeros(std::vector<int> shape) { return TensorT(std::move(shape)); }

    static TensorT full(std::vector<int> shape, Real v) {
        TensorT t(std::move(shape));
        for (auto& x : *t.data_) x = v;
        return t;
    }

    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    size_t numel() const { return data_ ? data_->size() : 0; }
    bool empty() const { return !data_; }

    Real* data() { return data_->data(); }
    const Real* data() const { return data_->data(); }
    std::vector<Real>& vec() { return *data_; }
    const std::vector<Real>& vec() const { return *data_; }

    Real& at(size_t i) { return (*data_)[i]; }
    Real at(size_t i) const { return (*data_)[i]; }

    // 2-D accessors; most of the engine works on [rows, cols] views.
    Real& at(int r, int c) { return (*data_)[static_cast<size_t>(r) * cols() + c]; }
    Real at(int r, int c) const { return (*data_)[static_cast<size_t>(r) * cols() + c]; }
    int rows() const { return shape_.empty() ? 0 : shape_.front(); }
    int cols() const {
        if (shape_.size() < 2) return shape_.size() == 1 ? shape_[0] : 0;
        size_t c = 1;
        for (size_t i = 1; i < shape_.size(); ++i) c *= static_cast<size_t>(shape_[i]);
        return static_cast<int>(c);
    }

    bool has_grad() const { return grad_ != nullptr; }

    std::vector<Real>& grad() {
        if (!grad_) grad_ = std::make_shared<std::vector<Real>>(numel(), Real(0));
        return *grad_;
    }
    const std::vector<Real>& grad() const { return *grad_; }

    void zero_grad() {
        if (grad_)
            for (auto& g : *grad_) g = Real(0);
    }

    void drop_grad() { grad_.reset(); }

    // Deep copy of data (grad buffer is not copied).
    TensorT clone() const {
        TensorT t;
        t.shape_ = shape_;
        t.data_ = std::make_shared<std::vector<Real>>(*data_);
        return t;
    }

    template <class Other>
    TensorT<Other> cast() const {
        std::vector<Other> v(numel());
        for (size_t i = 0; i < v.size(); ++i) v[i] = static_cast<Other>((*data_)[i]);
        return TensorT<Other>(shape_, std::move(v));
    }

private:
    static size_t checked_numel(const std::vector<int>& shape) {
        size_t n = 1;
        for (int d : shape) {
            if (d <= 0) throw std::invalid_argument("tensor dims must be positive, got " + shape_str(shape));
            n *= static_cast<size_t>(d);
        }
        return n;
    }

    std::vector<int> shape_;
    std::shared_ptr<std::vector<Real>> data_;
    std::shared_ptr<std::vector<Real>> grad_;
};

using Tensor = TensorT<float>;

// Named trainable tensor; grad has the same shape as value and is zeroed
// between optimizer steps.
template <class Real>
struct ParameterT {
    std::string name;
    TensorT<Real> value;
    TensorT<Real> grad;

    ParameterT() = default;
    ParameterT(std::string n, TensorT<Real> v)
        : name(std::move(n)), value(std::move(v)), grad(TensorT<Real>::zeros(value.shape())) {}

    void zero_grad() {
        for (auto& g : grad.vec()) g = Real(0);
    }
};

using Parameter = ParameterT<float>;

} // namespace owsm
