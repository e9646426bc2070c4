// kernels.h
// BLAS-backed compute kernels shared by the layer implementations.
// Convolutions lower to im2col + GEMM; everything is deterministic
// (single-threaded BLAS, fixed accumulation order).
#pragma once

#include "pcgl/substrate/tensor.h"

namespace pcgl::substrate {

// C[m,n] = alpha * op(A) * op(B) + beta * C, row-major.
template <typename T>
void gemm(bool trans_a, bool trans_b, int m, int n, int k, T alpha, const T* a, int lda,
          const T* b, int ldb, T beta, T* c, int ldc);

struct Conv1dSpec {
    int in_ch, out_ch, kernel, stride, dilation, padding;
    int out_len(int in_len) const {
        return (in_len + 2 * padding - dilation * (kernel - 1) - 1) / stride + 1;
    }
};

// x: [N, in_ch, L], w: [out_ch, in_ch*kernel], b: [out_ch] (may be null) -> y: [N, out_ch, L_out]
template <typename T>
void conv1d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* bias,
                    const Conv1dSpec& spec, Tensor<T>& y);
template <typename T>
void conv1d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy,
                     const Conv1dSpec& spec, Tensor<T>& dx, Tensor<T>& dw, Tensor<T>* db);

struct Conv2dSpec {
    int in_ch, out_ch, kernel, stride, padding;
    int out_hw(int in) const { return (in + 2 * padding - kernel) / stride + 1; }
};

// x: [N, in_ch, H, W], w: [out_ch, in_ch*k*k], b: [out_ch] -> y: [N, out_ch, H', W']
template <typename T>
void conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* bias,
                    const Conv2dSpec& spec, Tensor<T>& y);
template <typename T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy,
                     const Conv2dSpec& spec, Tensor<T>& dx, Tensor<T>& dw, Tensor<T>* db);

}  // namespace pcgl::substrate
