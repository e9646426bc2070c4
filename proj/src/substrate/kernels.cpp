// kernels.cpp
#include "pcgl/substrate/kernels.h"

#include <cblas.h>

#include <vector>

namespace pcgl::substrate {

namespace {

// im2col for 1D: x [in_ch, L] -> cols [in_ch*kernel, L_out]
template <typename T>
void im2col_1d(const T* x, int in_ch, int in_len, const Conv1dSpec& s, T* cols) {
    const int out_len = s.out_len(in_len);
    for (int c = 0; c < in_ch; ++c) {
        for (int k = 0; k < s.kernel; ++k) {
            T* row = cols + (static_cast<std::size_t>(c) * s.kernel + k) * out_len;
            const int off = k * s.dilation - s.padding;
            for (int o = 0; o < out_len; ++o) {
                const int i = o * s.stride + off;
                row[o] = (i >= 0 && i < in_len) ? x[static_cast<std::size_t>(c) * in_len + i]
                                                : T(0);
            }
        }
    }
}

template <typename T>
void col2im_1d(const T* cols, int in_ch, int in_len, const Conv1dSpec& s, T* x) {
    const int out_len = s.out_len(in_len);
    for (int c = 0; c < in_ch; ++c) {
        for (int k = 0; k < s.kernel; ++k) {
            const T* row = cols + (static_cast<std::size_t>(c) * s.kernel + k) * out_len;
            const int off = k * s.dilation - s.padding;
            for (int o = 0; o < out_len; ++o) {
                const int i = o * s.stride + off;
                if (i >= 0 && i < in_len) x[static_cast<std::size_t>(c) * in_len + i] += row[o];
            }
        }
    }
}

// im2col for 2D: x [in_ch, H, W] -> cols [in_ch*k*k, H_out*W_out]
template <typename T>
void im2col_2d(const T* x, int in_ch, int h, int w, const Conv2dSpec& s, T* cols) {
    const int ho = s.out_hw(h), wo = s.out_hw(w);
    std::size_t r = 0;
    for (int c = 0; c < in_ch; ++c) {
        for (int ki = 0; ki < s.kernel; ++ki) {
            for (int kj = 0; kj < s.kernel; ++kj, ++r) {
                T* row = cols + r * static_cast<std::size_t>(ho) * wo;
                for (int oi = 0; oi < ho; ++oi) {
                    const int ii = oi * s.stride + ki - s.padding;
                    for (int oj = 0; oj < wo; ++oj) {
                        const int jj = oj * s.stride + kj - s.padding;
                        row[oi * wo + oj] =
                            (ii >= 0 && ii < h && jj >= 0 && jj < w)
                                ? x[(static_cast<std::size_t>(c) * h + ii) * w + jj]
                                : T(0);
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im_2d(const T* cols, int in_ch, int h, int w, const Conv2dSpec& s, T* x) {
    const int ho = s.out_hw(h), wo = s.out_hw(w);
    std::size_t r = 0;
    for (int c = 0; c < in_ch; ++c) {
        for (int ki = 0; ki < s.kernel; ++ki) {
            for (int kj = 0; kj < s.kernel; ++kj, ++r) {
                const T* row = cols + r * static_cast<std::size_t>(ho) * wo;
                for (int oi = 0; oi < ho; ++oi) {
                    const int ii = oi * s.stride + ki - s.padding;
                    if (ii < 0 || ii >= h) continue;
                    for (int oj = 0; oj < wo; ++oj) {
                        const int jj = oj * s.stride + kj - s.padding;
                        if (jj >= 0 && jj < w)
                            x[(static_cast<std::size_t>(c) * h + ii) * w + jj] += row[oi * wo + oj];
                    }
                }
            }
        }
    }
}

struct BlasInit {
    BlasInit() { openblas_set_num_threads(1); }
};
const BlasInit blas_init_once;

}  // namespace

template <>
void gemm<float>(bool ta, bool tb, int m, int n, int k, float alpha, const float* a, int lda,
                 const float* b, int ldb, float beta, float* c, int ldc) {
    cblas_sgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans, m,
                n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

template <>
void gemm<double>(bool ta, bool tb, int m, int n, int k, double alpha, const double* a, int lda,
                  const double* b, int ldb, double beta, double* c, int ldc) {
    cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans, m,
                n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

template <typename T>
void conv1d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* bias,
                    const Conv1dSpec& s, Tensor<T>& y) {
    const int n = x.dim(0), in_len = x.dim(2);
    const int out_len = s.out_len(in_len);
    PCGL_CHECK(x.dim(1) == s.in_ch, "conv1d: input has " << x.dim(1) << " channels, want "
                                                         << s.in_ch << " for input "
                                                         << shape_str(x.shape));
    PCGL_CHECK(out_len > 0, "conv1d: non-positive output length for input " << shape_str(x.shape));
    y = Tensor<T>({n, s.out_ch, out_len});
    const int kdim = s.in_ch * s.kernel;
    std::vector<T> cols(static_cast<std::size_t>(kdim) * out_len);
    for (int i = 0; i < n; ++i) {
        im2col_1d(x.ptr() + static_cast<std::size_t>(i) * s.in_ch * in_len, s.in_ch, in_len, s,
                  cols.data());
        gemm<T>(false, false, s.out_ch, out_len, kdim, T(1), w.ptr(), kdim, cols.data(), out_len,
                T(0), y.ptr() + static_cast<std::size_t>(i) * s.out_ch * out_len, out_len);
    }
    if (bias) {
        for (int i = 0; i < n; ++i)
            for (int c = 0; c < s.out_ch; ++c) {
                T* row = y.ptr() + (static_cast<std::size_t>(i) * s.out_ch + c) * out_len;
                const T b = (*bias)[static_cast<std::size_t>(c)];
                for (int o = 0; o < out_len; ++o) row[o] += b;
            }
    }
}

template <typename T>
void conv1d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy,
                     const Conv1dSpec& s, Tensor<T>& dx, Tensor<T>& dw, Tensor<T>* db) {
    const int n = x.dim(0), in_len = x.dim(2);
    const int out_len = s.out_len(in_len);
    dx = Tensor<T>::zeros_like(x);
    dw = Tensor<T>::zeros_like(w);
    const int kdim = s.in_ch * s.kernel;
    std::vector<T> cols(static_cast<std::size_t>(kdim) * out_len);
    std::vector<T> dcols(cols.size());
    for (int i = 0; i < n; ++i) {
        const T* dyi = dy.ptr() + static_cast<std::size_t>(i) * s.out_ch * out_len;
        // dW += dY * cols^T
        im2col_1d(x.ptr() + static_cast<std::size_t>(i) * s.in_ch * in_len, s.in_ch, in_len, s,
                  cols.data());
        gemm<T>(false, true, s.out_ch, kdim, out_len, T(1), dyi, out_len, cols.data(), out_len,
                T(1), dw.ptr(), kdim);
        // dcols = W^T * dY
        gemm<T>(true, false, kdim, out_len, s.out_ch, T(1), w.ptr(), kdim, dyi, out_len, T(0),
                dcols.data(), out_len);
        col2im_1d(dcols.data(), s.in_ch, in_len, s,
                  dx.ptr() + static_cast<std::size_t>(i) * s.in_ch * in_len);
    }
    if (db) {
        for (int c = 0; c < s.out_ch; ++c) {
            double acc = 0;
            for (int i = 0; i < n; ++i) {
                const T* row = dy.ptr() + (static_cast<std::size_t>(i) * s.out_ch + c) * out_len;
                for (int o = 0; o < out_len; ++o) acc += static_cast<double>(row[o]);
            }
            (*db)[static_cast<std::size_t>(c)] += static_cast<T>(acc);
        }
    }
}

template <typename T>
void conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* bias,
                    const Conv2dSpec& s, Tensor<T>& y) {
    const int n = x.dim(0), h = x.dim(2), wd = x.dim(3);
    const int ho = s.out_hw(h), wo = s.out_hw(wd);
    PCGL_CHECK(x.dim(1) == s.in_ch, "conv2d: input has " << x.dim(1) << " channels, want "
                                                         << s.in_ch << " for input "
                                                         << shape_str(x.shape));
    PCGL_CHECK(ho > 0 && wo > 0, "conv2d: non-positive output size for input "
                                     << shape_str(x.shape));
    y = Tensor<T>({n, s.out_ch, ho, wo});
    const int kdim = s.in_ch * s.kernel * s.kernel;
    const int odim = ho * wo;
    std::vector<T> cols(static_cast<std::size_t>(kdim) * odim);
    for (int i = 0; i < n; ++i) {
        im2col_2d(x.ptr() + static_cast<std::size_t>(i) * s.in_ch * h * wd, s.in_ch, h, wd, s,
                  cols.data());
        gemm<T>(false, false, s.out_ch, odim, kdim, T(1), w.ptr(), kdim, cols.data(), odim, T(0),
                y.ptr() + static_cast<std::size_t>(i) * s.out_ch * odim, odim);
    }
    if (bias) {
        for (int i = 0; i < n; ++i)
            for (int c = 0; c < s.out_ch; ++c) {
                T* row = y.ptr() + (static_cast<std::size_t>(i) * s.out_ch + c) * odim;
                const T b = (*bias)[static_cast<std::size_t>(c)];
                for (int o = 0; o < odim; ++o) row[o] += b;
            }
    }
}

template <typename T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy,
                     const Conv2dSpec& s, Tensor<T>& dx, Tensor<T>& dw, Tensor<T>* db) {
    const int n = x.dim(0), h = x.dim(2), wd = x.dim(3);
    const int ho = s.out_hw(h), wo = s.out_hw(wd);
    const int kdim = s.in_ch * s.kernel * s.kernel;
    const int odim = ho * wo;
    dx = Tensor<T>::zeros_like(x);
    dw = Tensor<T>::zeros_like(w);
    std::vector<T> cols(static_cast<std::size_t>(kdim) * odim);
    std::vector<T> dcols(cols.size());
    for (int i = 0; i < n; ++i) {
        const T* dyi = dy.ptr() + static_cast<std::size_t>(i) * s.out_ch * odim;
        im2col_2d(x.ptr() + static_cast<std::size_t>(i) * s.in_ch * h * wd, s.in_ch, h, wd, s,
                  cols.data());
        gemm<T>(false, true, s.out_ch, kdim, odim, T(1), dyi, odim, cols.data(), odim, T(1),
                dw.ptr(), kdim);
        gemm<T>(true, false, kdim, odim, s.out_ch, T(1), w.ptr(), kdim, dyi, odim, T(0),
                dcols.data(), odim);
        col2im_2d(dcols.data(), s.in_ch, h, wd, s,
                  dx.ptr() + static_cast<std::size_t>(i) * s.in_ch * h * wd);
    }
    if (db) {
        for (int c = 0; c < s.out_ch; ++c) {
            double acc = 0;
            for (int i = 0; i < n; ++i) {
                const T* row = dy.ptr() + (static_cast<std::size_t>(i) * s.out_ch + c) * odim;
                for (int o = 0; o < odim; ++o) acc += static_cast<double>(row[o]);
            }
            (*db)[static_cast<std::size_t>(c)] += static_cast<T>(acc);
        }
    }
}

template void conv1d_forward<float>(const Tensor<float>&, const Tensor<float>&,
                                    const Tensor<float>*, const Conv1dSpec&, Tensor<float>&);
template void conv1d_forward<double>(const Tensor<double>&, const Tensor<double>&,
                                     const Tensor<double>*, const Conv1dSpec&, Tensor<double>&);
template void conv1d_backward<float>(const Tensor<float>&, const Tensor<float>&,
                                     const Tensor<float>&, const Conv1dSpec&, Tensor<float>&,
                                     Tensor<float>&, Tensor<float>*);
template void conv1d_backward<double>(const Tensor<double>&, const Tensor<double>&,
                                      const Tensor<double>&, const Conv1dSpec&, Tensor<double>&,
                                      Tensor<double>&, Tensor<double>*);
template void conv2d_forward<float>(const Tensor<float>&, const Tensor<float>&,
                                    const Tensor<float>*, const Conv2dSpec&, Tensor<float>&);
template void conv2d_forward<double>(const Tensor<double>&, const Tensor<double>&,
                                     const Tensor<double>*, const Conv2dSpec&, Tensor<double>&);
template void conv2d_backward<float>(const Tensor<float>&, const Tensor<float>&,
                                     const Tensor<float>&, const Conv2dSpec&, Tensor<float>&,
                                     Tensor<float>&, Tensor<float>*);
template void conv2d_backward<double>(const Tensor<double>&, const Tensor<double>&,
                                      const Tensor<double>&, const Conv2dSpec&, Tensor<double>&,
                                      Tensor<double>&, Tensor<double>*);

}  // namespace pcgl::substrate
