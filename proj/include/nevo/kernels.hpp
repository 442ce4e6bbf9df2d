#ifndef NEVO_KERNELS_HPP
#define NEVO_KERNELS_HPP

#include <vector>

#include "nevo/rng.hpp"

namespace nevo::kernels {

// Activation buffers are sample-major, row-major inside a sample:
// index = (sample * H + y) * W + x. Filters are fy rows of fx weights.
//
// Per dimension a filter either gathers (in >= out: i = o + w, always in
// bounds) or scatters with clipping (in < out: i = o - w, skipped when
// outside the input); both cases follow from the |out - in| + 1 sizing rule.
//
// conv_forward and the pooling forward accumulate (+=) into `out` so a node
// can sum several incoming edges; conv_backward_input accumulates into
// `d_in` the same way. conv_backward_weights and the pooling scale gradient
// overwrite their outputs.

namespace serial {

void conv_forward(const double* in, int in_x, int in_y, double* out,
                  int out_x, int out_y, const double* w, int fx, int fy,
                  int batch);

void conv_backward_input(double* d_in, int in_x, int in_y,
                         const double* d_out, int out_x, int out_y,
                         const double* w, int fx, int fy, int batch);

void conv_backward_weights(const double* in, int in_x, int in_y,
                           const double* d_out, int out_x, int out_y,
                           double* d_w, int fx, int fy, int batch);

// part_x/part_y hold out_x/out_y pool extents summing to in_x/in_y.
// argmax (batch * out_y * out_x entries) records the flat within-sample
// input index of each window maximum for the backward pass.
void pool_forward(const double* in, int in_x, int in_y, double* out,
                  int out_x, int out_y, const int* part_x, const int* part_y,
                  double scale, int batch, int* argmax);

// d_scale is overwritten with d(loss)/d(scale); d_in accumulates.
void pool_backward(const double* in, double* d_in, int in_x, int in_y,
                   const double* d_out, int out_x, int out_y,
                   const int* argmax, double scale, int batch,
                   double* d_scale);

} // namespace serial

// OpenMP variants. Writes are partitioned so every buffer entry has a single
// owner and per-entry accumulation order matches the serial reference;
// results are bit-identical to it for any thread count.
void conv_forward(const double* in, int in_x, int in_y, double* out,
                  int out_x, int out_y, const double* w, int fx, int fy,
                  int batch);

void conv_backward_input(double* d_in, int in_x, int in_y,
                         const double* d_out, int out_x, int out_y,
                         const double* w, int fx, int fy, int batch);

void conv_backward_weights(const double* in, int in_x, int in_y,
                           const double* d_out, int out_x, int out_y,
                           double* d_w, int fx, int fy, int batch);

void pool_forward(const double* in, int in_x, int in_y, double* out,
                  int out_x, int out_y, const int* part_x, const int* part_y,
                  double scale, int batch, int* argmax);

void pool_backward(const double* in, double* d_in, int in_x, int in_y,
                   const double* d_out, int out_x, int out_y,
                   const int* argmax, double scale, int batch,
                   double* d_scale);

// Near-equal partition of n into m parts: (n mod m) pools of ceil(n/m)
// followed by pools of floor(n/m). Throws std::invalid_argument unless
// 1 <= m <= n.
std::vector<int> canonical_partition(int n, int m);

// Canonical partition in shuffled order; one shuffle per call.
std::vector<int> pooling_partition(int n, int m, Rng& rng);

} // namespace nevo::kernels

#endif
