#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "fmanet/common.hpp"

namespace fmanet {

// Dense row-major tensor of doubles, last dimension contiguous. Copies share
// the underlying buffer; operators always allocate fresh outputs and treat
// inputs as immutable, so shared buffers behave like values. Use clone() (or
// data() on a uniquely owned tensor) when in-place mutation is intended, e.g.
// optimizer updates between tape builds.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> dims) : dims_(std::move(dims)) {
        int64_t n = 1;
        for (int d : dims_) {
            fm_check(d > 0, "tensor dims must be positive, got ", d);
            n *= d;
        }
        data_ = std::make_shared<std::vector<double>>(static_cast<size_t>(n), 0.0);
    }

    static Tensor zeros(std::vector<int> dims) { return Tensor(std::move(dims)); }

    static Tensor full(std::vector<int> dims, double v) {
        Tensor t(std::move(dims));
        for (auto& x : *t.data_) x = v;
        return t;
    }

    static Tensor from(std::vector<int> dims, std::vector<double> vals) {
        Tensor t;
        t.dims_ = std::move(dims);
        int64_t n = 1;
        for (int d : t.dims_) n *= d;
        fm_check(n == static_cast<int64_t>(vals.size()), "tensor data length ", vals.size(),
                 " does not match shape product ", n);
        t.data_ = std::make_shared<std::vector<double>>(std::move(vals));
        return t;
    }

    static Tensor scalar(double v) { return from({1}, {v}); }

    bool defined() const { return data_ != nullptr; }
    int rank() const { return static_cast<int>(dims_.size()); }
    int dim(int i) const { return dims_[static_cast<size_t>(i)]; }
    const std::vector<int>& dims() const { return dims_; }

    int64_t numel() const {
        int64_t n = 1;
        for (int d : dims_) n *= d;
        return data_ ? n : 0;
    }

    double* data() { return data_->data(); }
    const double* data() const { return data_->data(); }

    double& operator[](int64_t i) { return (*data_)[static_cast<size_t>(i)]; }
    double operator[](int64_t i) const { return (*data_)[static_cast<size_t>(i)]; }

    template <class... Ix>
    double& at(Ix... ix) {
        return (*data_)[flat(ix...)];
    }
    template <class... Ix>
    double at(Ix... ix) const {
        return (*data_)[flat(ix...)];
    }

    Tensor clone() const {
        Tensor t;
        t.dims_ = dims_;
        t.data_ = std::make_shared<std::vector<double>>(*data_);
        return t;
    }

    // Same buffer, new dims. Element count must match.
    Tensor reshaped(std::vector<int> dims) const {
        Tensor t;
        t.dims_ = std::move(dims);
        int64_t n = 1;
        for (int d : t.dims_) n *= d;
        fm_check(n == numel(), "reshape from ", shape_str(), " to ", n, " elements");
        t.data_ = data_;
        return t;
    }

    bool same_shape(const Tensor& o) const { return dims_ == o.dims_; }

    std::string shape_str() const {
        std::string s = "[";
        for (size_t i = 0; i < dims_.size(); ++i) {
            if (i) s += "x";
            s += std::to_string(dims_[i]);
        }
        return s + "]";
    }

    bool all_finite() const {
        for (double v : *data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    double item() const {
        fm_check(numel() == 1, "item() on non-scalar tensor ", shape_str());
        return (*data_)[0];
    }

private:
    template <class... Ix>
    size_t flat(Ix... ix) const {
        static_assert(sizeof...(Ix) > 0);
        const int idx[] = {static_cast<int>(ix)...};
        const int r = static_cast<int>(sizeof...(Ix));
        size_t off = 0;
        for (int i = 0; i < r; ++i) off = off * static_cast<size_t>(dims_[static_cast<size_t>(i)]) + static_cast<size_t>(idx[i]);
        return off;
    }

    std::vector<int> dims_;
    std::shared_ptr<std::vector<double>> data_;
};

}  // namespace fmanet
