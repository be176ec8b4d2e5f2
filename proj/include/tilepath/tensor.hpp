#pragma once
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "tilepath/errors.hpp"

#ifdef TILEPATH_USE_CBLAS
#include <cblas.h>
#endif

namespace tilepath {

// Dense row-major f64 tensor. No broadcasting: elementwise ops demand
// identical shapes and fail with both shapes named.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0)
        : shape_(std::move(shape)), data_(numel_of(shape_), fill) {}

    Tensor(std::vector<std::size_t> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (numel_of(shape_) != data_.size()) {
            throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                                 " does not match shape " + shape_str(shape_));
        }
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t numel() const { return data_.size(); }
    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    double operator[](std::size_t i) const { return data_[i]; }
    double& operator[](std::size_t i) { return data_[i]; }

    double at2(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
    double& at2(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    double at3(std::size_t i, std::size_t j, std::size_t k) const {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }
    double& at3(std::size_t i, std::size_t j, std::size_t k) {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }

    Tensor reshape(std::vector<std::size_t> new_shape) const {
        if (numel_of(new_shape) != data_.size()) {
            throw DimensionError("cannot reshape " + shape_str(shape_) + " to " +
                                 shape_str(new_shape));
        }
        return Tensor(std::move(new_shape), data_);
    }

    bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(),
                           [](double v) { return std::isfinite(v); });
    }

    static std::string shape_str(const std::vector<std::size_t>& s) {
        std::ostringstream os;
        os << "[";
        for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
        os << "]";
        return os.str();
    }

    static std::size_t numel_of(const std::vector<std::size_t>& shape) {
        return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                               std::multiplies<>());
    }

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

namespace detail {
inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " +
                             Tensor::shape_str(a.shape()) + " vs " +
                             Tensor::shape_str(b.shape()));
    }
}
}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
    detail::require_same_shape(a, b, "add");
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.numel(); ++i) out[i] = a[i] + b[i];
    return out;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    detail::require_same_shape(a, b, "sub");
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.numel(); ++i) out[i] = a[i] - b[i];
    return out;
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    detail::require_same_shape(a, b, "mul");
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.numel(); ++i) out[i] = a[i] * b[i];
    return out;
}

inline Tensor scale(const Tensor& a, double s) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.numel(); ++i) out[i] = a[i] * s;
    return out;
}

// C(m,n) = A(m,k) * B(k,n), row-major
inline void matmul_raw(const double* a, const double* b, double* c,
                       std::size_t m, std::size_t k, std::size_t n) {
#ifdef TILEPATH_USE_CBLAS
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, static_cast<int>(m),
                static_cast<int>(n), static_cast<int>(k), 1.0, a,
                static_cast<int>(k), b, static_cast<int>(n), 0.0, c,
                static_cast<int>(n));
#else
    std::fill(c, c + m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a[i * k + p];
            const double* brow = b + p * n;
            double* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
#endif
}

// C(m,n) = A^T(k,m)^T... i.e. C = A(k,m)^T * B(k,n)
inline void matmul_at_b(const double* a, const double* b, double* c,
                        std::size_t k, std::size_t m, std::size_t n) {
#ifdef TILEPATH_USE_CBLAS
    cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, static_cast<int>(m),
                static_cast<int>(n), static_cast<int>(k), 1.0, a,
                static_cast<int>(m), b, static_cast<int>(n), 0.0, c,
                static_cast<int>(n));
#else
    std::fill(c, c + m * n, 0.0);
    for (std::size_t p = 0; p < k; ++p) {
        for (std::size_t i = 0; i < m; ++i) {
            const double av = a[p * m + i];
            const double* brow = b + p * n;
            double* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
#endif
}

// C(m,k) = A(m,n) * B(k,n)^T
inline void matmul_a_bt(const double* a, const double* b, double* c,
                        std::size_t m, std::size_t n, std::size_t k) {
#ifdef TILEPATH_USE_CBLAS
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, static_cast<int>(m),
                static_cast<int>(k), static_cast<int>(n), 1.0, a,
                static_cast<int>(n), b, static_cast<int>(n), 0.0, c,
                static_cast<int>(k));
#else
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            double acc = 0.0;
            const double* arow = a + i * n;
            const double* brow = b + j * n;
            for (std::size_t p = 0; p < n; ++p) acc += arow[p] * brow[p];
            c[i * k + j] = acc;
        }
    }
#endif
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) {
        throw DimensionError("matmul: incompatible shapes " +
                             Tensor::shape_str(a.shape()) + " vs " +
                             Tensor::shape_str(b.shape()));
    }
    const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    Tensor out({m, n});
    matmul_raw(a.data().data(), b.data().data(), out.data().data(), m, k, n);
    return out;
}

inline double reduce_sum(const Tensor& a) {
    return std::accumulate(a.data().begin(), a.data().end(), 0.0);
}

inline double reduce_max(const Tensor& a) {
    if (a.numel() == 0) throw DimensionError("reduce_max: empty tensor");
    return *std::max_element(a.data().begin(), a.data().end());
}

inline std::size_t argmax(const Tensor& a) {
    if (a.numel() == 0) throw DimensionError("argmax: empty tensor");
    return static_cast<std::size_t>(
        std::max_element(a.data().begin(), a.data().end()) - a.data().begin());
}

// Contiguous slice along axis 0: rows [begin, end)
inline Tensor slice0(const Tensor& a, std::size_t begin, std::size_t end) {
    if (a.rank() == 0 || begin > end || end > a.shape()[0]) {
        throw DimensionError("slice0: range [" + std::to_string(begin) + "," +
                             std::to_string(end) + ") out of " +
                             Tensor::shape_str(a.shape()));
    }
    std::size_t inner = a.numel() / a.shape()[0];
    std::vector<std::size_t> shape = a.shape();
    shape[0] = end - begin;
    std::vector<double> data(a.data().begin() + static_cast<std::ptrdiff_t>(begin * inner),
                             a.data().begin() + static_cast<std::ptrdiff_t>(end * inner));
    return Tensor(std::move(shape), std::move(data));
}

}  // namespace tilepath
