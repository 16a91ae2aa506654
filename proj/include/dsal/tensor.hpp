#ifndef DSAL_TENSOR_HPP
#define DSAL_TENSOR_HPP

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace dsal {

// Dense NCHW grid of doubles. Feature maps, images, confidence maps and
// scalars (1x1x1x1) all use this one container.
class Tensor {
public:
    Tensor() = default;
    Tensor(int n, int c, int h, int w) : n_(n), c_(c), h_(h), w_(w) {
        if (n <= 0 || c <= 0 || h <= 0 || w <= 0)
            throw std::invalid_argument("Tensor: nonpositive dimension");
        data_.assign(static_cast<size_t>(n) * c * h * w, 0.0);
    }

    static Tensor zeros(int n, int c, int h, int w) { return Tensor(n, c, h, w); }

    static Tensor full(int n, int c, int h, int w, double v) {
        Tensor t(n, c, h, w);
        t.data_.assign(t.data_.size(), v);
        return t;
    }

    static Tensor scalar(double v) { return full(1, 1, 1, 1, v); }

    int n() const { return n_; }
    int c() const { return c_; }
    int h() const { return h_; }
    int w() const { return w_; }
    size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    double& at(int in, int ic, int iy, int ix) {
        return data_[((static_cast<size_t>(in) * c_ + ic) * h_ + iy) * w_ + ix];
    }
    double at(int in, int ic, int iy, int ix) const {
        return data_[((static_cast<size_t>(in) * c_ + ic) * h_ + iy) * w_ + ix];
    }
    double& operator[](size_t i) { return data_[i]; }
    double operator[](size_t i) const { return data_[i]; }

    bool same_shape(const Tensor& o) const {
        return n_ == o.n_ && c_ == o.c_ && h_ == o.h_ && w_ == o.w_;
    }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    double item() const {
        if (data_.size() != 1) throw std::logic_error("Tensor::item on non-scalar");
        return data_[0];
    }

    void fill(double v) { data_.assign(data_.size(), v); }

    std::string shape_str() const {
        return "(" + std::to_string(n_) + "," + std::to_string(c_) + "," +
               std::to_string(h_) + "," + std::to_string(w_) + ")";
    }

private:
    int n_ = 0, c_ = 0, h_ = 0, w_ = 0;
    std::vector<double> data_;
};

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(what) + ": shape mismatch " + a.shape_str() +
                                    " vs " + b.shape_str());
}

}  // namespace dsal

#endif
