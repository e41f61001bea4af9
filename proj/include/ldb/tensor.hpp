#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace ldb {

std::string shape_to_string(const std::vector<int>& shape);

/// Dense n-dimensional array of doubles, flat row-major storage.
class Tensor {
public:
    Tensor() = default;

    /// Zero-filled tensor of the given shape. Dimensions must be positive.
    explicit Tensor(std::vector<int> shape);

    Tensor(std::vector<int> shape, std::vector<double> data);

    /// 2-D tensor from nested braces, row by row.
    static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);

    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    /// 2-D element access.
    double& at2(int r, int c) { return data_[static_cast<std::size_t>(r) * shape_[1] + c]; }
    double at2(int r, int c) const { return data_[static_cast<std::size_t>(r) * shape_[1] + c]; }

    void fill(double v);

    /// Same data, new shape; element count must match.
    Tensor reshaped(std::vector<int> shape) const;

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

// --- shape-checked arithmetic -------------------------------------------

/// a (m,k) times b (k,n).
Tensor matmul(const Tensor& a, const Tensor& b);
/// a (m,k) times transpose(b) where b is (n,k).
Tensor matmul_nt(const Tensor& a, const Tensor& b);
/// transpose(a) times b where a is (k,m), b is (k,n).
Tensor matmul_tn(const Tensor& a, const Tensor& b);

Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);

void add_inplace(Tensor& a, const Tensor& b);
/// y += alpha * x
void axpy(double alpha, const Tensor& x, Tensor& y);

double sum(const Tensor& a);
double max_abs(const Tensor& a);
/// Column index of the largest entry in the given row of a 2-D tensor.
int argmax_row(const Tensor& a, int row);

bool all_finite(const Tensor& a);

// --- 2-D cross-correlation (convolution without kernel flip) -------------

/// x (n, cin, h, w) with kernel (cout, cin, kh, kw) and per-channel bias
/// (cout), zero padding pad, stride 1.
Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias, int pad);

/// Gradient of conv2d w.r.t. its input.
Tensor conv2d_grad_input(const Tensor& grad_out, const Tensor& kernel,
                         const std::vector<int>& input_shape, int pad);

/// Gradients of conv2d w.r.t. kernel and bias, written into grad_kernel /
/// grad_bias (overwritten, shapes must match).
void conv2d_grad_params(const Tensor& x, const Tensor& grad_out, int pad,
                        Tensor& grad_kernel, Tensor& grad_bias);

} // namespace ldb
