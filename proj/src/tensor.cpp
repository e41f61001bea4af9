#include "ldb/tensor.hpp"

#include <cmath>
#include <cstdlib>
#include <numeric>
#include <sstream>

#include "ldb/error.hpp"

namespace ldb {

std::string shape_to_string(const std::vector<int>& shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ", ";
        os << shape[i];
    }
    os << ')';
    return os.str();
}

namespace {

std::size_t checked_numel(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d <= 0) {
            throw ShapeError("tensor dimensions must be positive, got " + shape_to_string(shape));
        }
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

void require_rank2(const Tensor& t, const char* name) {
    if (t.rank() != 2) {
        throw ShapeError(std::string(name) + " must be rank-2, got shape " + shape_to_string(t.shape()));
    }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) +
                         " vs " + shape_to_string(b.shape()));
    }
}

} // namespace

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(checked_numel(shape_), 0.0);
}

Tensor::Tensor(std::vector<int> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (checked_numel(shape_) != data_.size()) {
        throw ShapeError("data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_to_string(shape_));
    }
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    int r = static_cast<int>(rows.size());
    int c = r > 0 ? static_cast<int>(rows.begin()->size()) : 0;
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(r) * c);
    for (const auto& row : rows) {
        if (static_cast<int>(row.size()) != c) {
            throw ShapeError("ragged rows in tensor literal");
        }
        data.insert(data.end(), row.begin(), row.end());
    }
    return Tensor({r, c}, std::move(data));
}

void Tensor::fill(double v) {
    std::fill(data_.begin(), data_.end(), v);
}

Tensor Tensor::reshaped(std::vector<int> shape) const {
    if (checked_numel(shape) != data_.size()) {
        throw ShapeError("cannot reshape " + shape_to_string(shape_) + " to " + shape_to_string(shape));
    }
    return Tensor(std::move(shape), data_);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank2(a, "matmul lhs");
    require_rank2(b, "matmul rhs");
    if (a.dim(1) != b.dim(0)) {
        throw ShapeError("matmul: inner dimensions differ, " + shape_to_string(a.shape()) +
                         " x " + shape_to_string(b.shape()));
    }
    const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor c({m, n});
    const double* pa = a.data();
    const double* pb = b.data();
    double* pc = c.data();
    for (int i = 0; i < m; ++i) {
        double* crow = pc + static_cast<std::size_t>(i) * n;
        for (int l = 0; l < k; ++l) {
            const double av = pa[static_cast<std::size_t>(i) * k + l];
            const double* brow = pb + static_cast<std::size_t>(l) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    require_rank2(a, "matmul_nt lhs");
    require_rank2(b, "matmul_nt rhs");
    if (a.dim(1) != b.dim(1)) {
        throw ShapeError("matmul_nt: inner dimensions differ, " + shape_to_string(a.shape()) +
                         " x " + shape_to_string(b.shape()) + "^T");
    }
    const int m = a.dim(0), k = a.dim(1), n = b.dim(0);
    Tensor c({m, n});
    const double* pa = a.data();
    const double* pb = b.data();
    double* pc = c.data();
    for (int i = 0; i < m; ++i) {
        const double* arow = pa + static_cast<std::size_t>(i) * k;
        for (int j = 0; j < n; ++j) {
            const double* brow = pb + static_cast<std::size_t>(j) * k;
            double acc = 0.0;
            for (int l = 0; l < k; ++l) acc += arow[l] * brow[l];
            pc[static_cast<std::size_t>(i) * n + j] = acc;
        }
    }
    return c;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    require_rank2(a, "matmul_tn lhs");
    require_rank2(b, "matmul_tn rhs");
    if (a.dim(0) != b.dim(0)) {
        throw ShapeError("matmul_tn: inner dimensions differ, " + shape_to_string(a.shape()) +
                         "^T x " + shape_to_string(b.shape()));
    }
    const int k = a.dim(0), m = a.dim(1), n = b.dim(1);
    Tensor c({m, n});
    const double* pa = a.data();
    const double* pb = b.data();
    double* pc = c.data();
    for (int l = 0; l < k; ++l) {
        const double* arow = pa + static_cast<std::size_t>(l) * m;
        const double* brow = pb + static_cast<std::size_t>(l) * n;
        for (int i = 0; i < m; ++i) {
            const double av = arow[i];
            double* crow = pc + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

Tensor transpose(const Tensor& a) {
    require_rank2(a, "transpose");
    const int m = a.dim(0), n = a.dim(1);
    Tensor t({n, m});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) t.at2(j, i) = a.at2(i, j);
    return t;
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    Tensor c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c[i] += b[i];
    return c;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    Tensor c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c[i] -= b[i];
    return c;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    Tensor c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c[i] *= b[i];
    return c;
}

Tensor scale(const Tensor& a, double s) {
    Tensor c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c[i] *= s;
    return c;
}

void add_inplace(Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add_inplace");
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

void axpy(double alpha, const Tensor& x, Tensor& y) {
    require_same_shape(x, y, "axpy");
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += alpha * x[i];
}

double sum(const Tensor& a) {
    return std::accumulate(a.data(), a.data() + a.size(), 0.0);
}

double max_abs(const Tensor& a) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i]));
    return m;
}

int argmax_row(const Tensor& a, int row) {
    require_rank2(a, "argmax_row");
    const int n = a.dim(1);
    int best = 0;
    double bv = a.at2(row, 0);
    for (int j = 1; j < n; ++j) {
        if (a.at2(row, j) > bv) {
            bv = a.at2(row, j);
            best = j;
        }
    }
    return best;
}

bool all_finite(const Tensor& a) {
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!std::isfinite(a[i])) return false;
    }
    return true;
}

namespace {

void require_conv_shapes(const Tensor& x, const Tensor& kernel, const Tensor& bias, int pad) {
    if (x.rank() != 4) {
        throw ShapeError("conv2d input must be rank-4 (n, c, h, w), got " + shape_to_string(x.shape()));
    }
    if (kernel.rank() != 4) {
        throw ShapeError("conv2d kernel must be rank-4 (cout, cin, kh, kw), got " +
                         shape_to_string(kernel.shape()));
    }
    if (x.dim(1) != kernel.dim(1)) {
        throw ShapeError("conv2d: input channels " + shape_to_string(x.shape()) +
                         " do not match kernel " + shape_to_string(kernel.shape()));
    }
    if (bias.rank() != 1 || bias.dim(0) != kernel.dim(0)) {
        throw ShapeError("conv2d: bias shape " + shape_to_string(bias.shape()) +
                         " does not match kernel " + shape_to_string(kernel.shape()));
    }
    if (pad < 0) throw ShapeError("conv2d: negative padding");
    if (x.dim(2) + 2 * pad < kernel.dim(2) || x.dim(3) + 2 * pad < kernel.dim(3)) {
        throw ShapeError("conv2d: kernel " + shape_to_string(kernel.shape()) +
                         " larger than padded input " + shape_to_string(x.shape()));
    }
}

} // namespace

Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias, int pad) {
    require_conv_shapes(x, kernel, bias, pad);
    const int n = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int cout = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
    const int ho = h + 2 * pad - kh + 1;
    const int wo = w + 2 * pad - kw + 1;
    Tensor y({n, cout, ho, wo});
    const double* px = x.data();
    const double* pk = kernel.data();
    double* py = y.data();
    for (int img = 0; img < n; ++img) {
        for (int co = 0; co < cout; ++co) {
            const double b = bias[static_cast<std::size_t>(co)];
            for (int oy = 0; oy < ho; ++oy) {
                for (int ox = 0; ox < wo; ++ox) {
                    double acc = b;
                    for (int ci = 0; ci < cin; ++ci) {
                        const double* xplane =
                            px + ((static_cast<std::size_t>(img) * cin + ci) * h) * w;
                        const double* kplane =
                            pk + ((static_cast<std::size_t>(co) * cin + ci) * kh) * kw;
                        for (int ky = 0; ky < kh; ++ky) {
                            const int iy = oy + ky - pad;
                            if (iy < 0 || iy >= h) continue;
                            for (int kx = 0; kx < kw; ++kx) {
                                const int ix = ox + kx - pad;
                                if (ix < 0 || ix >= w) continue;
                                acc += xplane[static_cast<std::size_t>(iy) * w + ix] *
                                       kplane[static_cast<std::size_t>(ky) * kw + kx];
                            }
                        }
                    }
                    py[((static_cast<std::size_t>(img) * cout + co) * ho + oy) * wo + ox] = acc;
                }
            }
        }
    }
    return y;
}

Tensor conv2d_grad_input(const Tensor& grad_out, const Tensor& kernel,
                         const std::vector<int>& input_shape, int pad) {
    if (input_shape.size() != 4) {
        throw ShapeError("conv2d_grad_input: input shape must be rank-4, got " +
                         shape_to_string(input_shape));
    }
    const int n = input_shape[0], cin = input_shape[1], h = input_shape[2], w = input_shape[3];
    const int cout = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
    const int ho = grad_out.dim(2), wo = grad_out.dim(3);
    Tensor gx({n, cin, h, w});
    const double* pg = grad_out.data();
    const double* pk = kernel.data();
    double* px = gx.data();
    for (int img = 0; img < n; ++img) {
        for (int co = 0; co < cout; ++co) {
            const double* gplane = pg + ((static_cast<std::size_t>(img) * cout + co) * ho) * wo;
            for (int ci = 0; ci < cin; ++ci) {
                const double* kplane = pk + ((static_cast<std::size_t>(co) * cin + ci) * kh) * kw;
                double* xplane = px + ((static_cast<std::size_t>(img) * cin + ci) * h) * w;
                for (int oy = 0; oy < ho; ++oy) {
                    for (int ox = 0; ox < wo; ++ox) {
                        const double g = gplane[static_cast<std::size_t>(oy) * wo + ox];
                        for (int ky = 0; ky < kh; ++ky) {
                            const int iy = oy + ky - pad;
                            if (iy < 0 || iy >= h) continue;
                            for (int kx = 0; kx < kw; ++kx) {
                                const int ix = ox + kx - pad;
                                if (ix < 0 || ix >= w) continue;
                                xplane[static_cast<std::size_t>(iy) * w + ix] +=
                                    g * kplane[static_cast<std::size_t>(ky) * kw + kx];
                            }
                        }
                    }
                }
            }
        }
    }
    return gx;
}

void conv2d_grad_params(const Tensor& x, const Tensor& grad_out, int pad,
                        Tensor& grad_kernel, Tensor& grad_bias) {
    const int n = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int cout = grad_out.dim(1), ho = grad_out.dim(2), wo = grad_out.dim(3);
    const int kh = grad_kernel.dim(2), kw = grad_kernel.dim(3);
    grad_kernel.fill(0.0);
    grad_bias.fill(0.0);
    const double* px = x.data();
    const double* pg = grad_out.data();
    double* pk = grad_kernel.data();
    for (int img = 0; img < n; ++img) {
        for (int co = 0; co < cout; ++co) {
            const double* gplane = pg + ((static_cast<std::size_t>(img) * cout + co) * ho) * wo;
            double bacc = 0.0;
            for (int i = 0; i < ho * wo; ++i) bacc += gplane[i];
            grad_bias[static_cast<std::size_t>(co)] += bacc;
            for (int ci = 0; ci < cin; ++ci) {
                const double* xplane = px + ((static_cast<std::size_t>(img) * cin + ci) * h) * w;
                double* kplane = pk + ((static_cast<std::size_t>(co) * cin + ci) * kh) * kw;
                for (int oy = 0; oy < ho; ++oy) {
                    for (int ox = 0; ox < wo; ++ox) {
                        const double g = gplane[static_cast<std::size_t>(oy) * wo + ox];
                        for (int ky = 0; ky < kh; ++ky) {
                            const int iy = oy + ky - pad;
                            if (iy < 0 || iy >= h) continue;
                            for (int kx = 0; kx < kw; ++kx) {
                                const int ix = ox + kx - pad;
                                if (ix < 0 || ix >= w) continue;
                                kplane[static_cast<std::size_t>(ky) * kw + kx] +=
                                    g * xplane[static_cast<std::size_t>(iy) * w + ix];
                            }
                        }
                    }
                }
            }
        }
    }
}

} // namespace ldb
