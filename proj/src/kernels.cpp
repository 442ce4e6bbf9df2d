#include "nevo/kernels.hpp"

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace nevo::kernels {

namespace serial {

// Reference kernels: straightforward loops, per-tap bounds checks. The
// OpenMP variants must visit taps for each buffer entry in exactly this
// order; the equality tests compare them bitwise.

void conv_forward(const double* in, int in_x, int in_y, double* out,
                  int out_x, int out_y, const double* w, int fx, int fy,
                  int batch) {
    const std::ptrdiff_t in_n = std::ptrdiff_t{1} * in_y * in_x;
    const std::ptrdiff_t out_n = std::ptrdiff_t{1} * out_y * out_x;
    for (int s = 0; s < batch; ++s) {
        const double* ins = in + s * in_n;
        double* outs = out + s * out_n;
        for (int oy = 0; oy < out_y; ++oy) {
            for (int ox = 0; ox < out_x; ++ox) {
                double acc = 0.0;
                for (int wy = 0; wy < fy; ++wy) {
                    const int iy = in_y >= out_y ? oy + wy : oy - wy;
                    if (iy < 0 || iy >= in_y) continue;
                    for (int wx = 0; wx < fx; ++wx) {
                        const int ix = in_x >= out_x ? ox + wx : ox - wx;
                        if (ix < 0 || ix >= in_x) continue;
                        acc += ins[iy * in_x + ix] * w[wy * fx + wx];
                    }
                }
                outs[oy * out_x + ox] += acc;
            }
        }
    }
}

void conv_backward_input(double* d_in, int in_x, int in_y,
                         const double* d_out, int out_x, int out_y,
                         const double* w, int fx, int fy, int batch) {
    const std::ptrdiff_t in_n = std::ptrdiff_t{1} * in_y * in_x;
    const std::ptrdiff_t out_n = std::ptrdiff_t{1} * out_y * out_x;
    for (int s = 0; s < batch; ++s) {
        double* ds = d_in + s * in_n;
        const double* gs = d_out + s * out_n;
        for (int iy = 0; iy < in_y; ++iy) {
            for (int ix = 0; ix < in_x; ++ix) {
                double acc = 0.0;
                for (int wy = 0; wy < fy; ++wy) {
                    // Inverse of the forward map: gather dims used
                    // i = o + w, scatter dims i = o - w.
                    const int oy = in_y >= out_y ? iy - wy : iy + wy;
                    if (oy < 0 || oy >= out_y) continue;
                    for (int wx = 0; wx < fx; ++wx) {
                        const int ox = in_x >= out_x ? ix - wx : ix + wx;
                        if (ox < 0 || ox >= out_x) continue;
                        acc += gs[oy * out_x + ox] * w[wy * fx + wx];
                    }
                }
                ds[iy * in_x + ix] += acc;
            }
        }
    }
}

void conv_backward_weights(const double* in, int in_x, int in_y,
                           const double* d_out, int out_x, int out_y,
                           double* d_w, int fx, int fy, int batch) {
    const std::ptrdiff_t in_n = std::ptrdiff_t{1} * in_y * in_x;
    const std::ptrdiff_t out_n = std::ptrdiff_t{1} * out_y * out_x;
    for (int wy = 0; wy < fy; ++wy) {
        for (int wx = 0; wx < fx; ++wx) {
            double acc = 0.0;
            for (int s = 0; s < batch; ++s) {
                const double* ins = in + s * in_n;
                const double* gs = d_out + s * out_n;
                for (int oy = 0; oy < out_y; ++oy) {
                    const int iy = in_y >= out_y ? oy + wy : oy - wy;
                    if (iy < 0 || iy >= in_y) continue;
                    for (int ox = 0; ox < out_x; ++ox) {
                        const int ix = in_x >= out_x ? ox + wx : ox - wx;
                        if (ix < 0 || ix >= in_x) continue;
                        acc += ins[iy * in_x + ix] * gs[oy * out_x + ox];
                    }
                }
            }
            d_w[wy * fx + wx] = acc;
        }
    }
}

void pool_forward(const double* in, int in_x, int in_y, double* out,
                  int out_x, int out_y, const int* part_x, const int* part_y,
                  double scale, int batch, int* argmax) {
    const std::ptrdiff_t in_n = std::ptrdiff_t{1} * in_y * in_x;
    const std::ptrdiff_t out_n = std::ptrdiff_t{1} * out_y * out_x;
    for (int s = 0; s < batch; ++s) {
        const double* ins = in + s * in_n;
        double* outs = out + s * out_n;
        int* ams = argmax + s * out_n;
        int ry = 0;
        for (int oy = 0; oy < out_y; ++oy) {
            int cx = 0;
            for (int ox = 0; ox < out_x; ++ox) {
                // Scan order (y, x) with strict > keeps the first maximum.
                int best = ry * in_x + cx;
                double best_v = ins[best];
                for (int y = ry; y < ry + part_y[oy]; ++y) {
                    for (int x = cx; x < cx + part_x[ox]; ++x) {
                        const int idx = y * in_x + x;
                        if (ins[idx] > best_v) {
                            best_v = ins[idx];
                            best = idx;
                        }
                    }
                }
                outs[oy * out_x + ox] += best_v * scale;
                ams[oy * out_x + ox] = best;
                cx += part_x[ox];
            }
            ry += part_y[oy];
        }
    }
}

void pool_backward(const double* in, double* d_in, int in_x, int in_y,
                   const double* d_out, int out_x, int out_y,
                   const int* argmax, double scale, int batch,
                   double* d_scale) {
    const std::ptrdiff_t in_n = std::ptrdiff_t{1} * in_y * in_x;
    const std::ptrdiff_t out_n = std::ptrdiff_t{1} * out_y * out_x;
    // Per-sample partials summed afterwards so the reduction order is fixed
    // no matter how samples are processed.
    std::vector<double> partial(static_cast<std::size_t>(std::max(batch, 0)),
                                0.0);
    for (int s = 0; s < batch; ++s) {
        const double* ins = in + s * in_n;
        double* ds = d_in + s * in_n;
        const double* gs = d_out + s * out_n;
        const int* ams = argmax + s * out_n;
        double acc = 0.0;
        for (int o = 0; o < out_y * out_x; ++o) {
            const double g = gs[o];
            const int idx = ams[o];
            ds[idx] += g * scale;
            acc += g * ins[idx];
        }
        partial[s] = acc;
    }
    double total = 0.0;
    for (int s = 0; s < batch; ++s) total += partial[s];
    *d_scale = total;
}

} // namespace serial

namespace {

// Tap range for one dimension of the forward map given the output
// coordinate: gather dims (in >= out) accept every tap, scatter dims clip
// i = o - w to [0, in). Returned as [lo, hi).
inline void forward_tap_range(int o, int in, int out, int f, int& lo,
                              int& hi) {
    if (in >= out) {
        lo = 0;
        hi = std::min(f, in - o);
    } else {
        lo = std::max(0, o - in + 1);
        hi = std::min(f, o + 1);
    }
}

// Tap range given the input coordinate (backward-input direction):
// gather dims solve o = i - w in [0, out), scatter dims o = i + w.
inline void backward_tap_range(int i, int out, int in, int f, int& lo,
                               int& hi) {
    if (in >= out) {
        lo = std::max(0, i - out + 1);
        hi = std::min(f, i + 1);
    } else {
        lo = 0;
        hi = std::min(f, out - i);
    }
}

// Output range for one dimension given the tap (backward-weights
// direction): every o with both o in [0, out) and the mapped i in [0, in).
inline void output_range(int w, int in, int out, int& lo, int& hi) {
    if (in >= out) {
        lo = 0;
        hi = std::min(out, in - w);
    } else {
        lo = w;
        hi = std::min(out, in + w);
    }
}

} // namespace

void conv_forward(const double* in, int in_x, int in_y, double* out,
                  int out_x, int out_y, const double* w, int fx, int fy,
                  int batch) {
    const std::ptrdiff_t in_n = std::ptrdiff_t{1} * in_y * in_x;
    const std::ptrdiff_t out_n = std::ptrdiff_t{1} * out_y * out_x;
#pragma omp parallel for schedule(static)
    for (int s = 0; s < batch; ++s) {
        const double* ins = in + s * in_n;
        double* outs = out + s * out_n;
        for (int oy = 0; oy < out_y; ++oy) {
            int wy_lo, wy_hi;
            forward_tap_range(oy, in_y, out_y, fy, wy_lo, wy_hi);
            for (int ox = 0; ox < out_x; ++ox) {
                int wx_lo, wx_hi;
                forward_tap_range(ox, in_x, out_x, fx, wx_lo, wx_hi);
                double acc = 0.0;
                for (int wy = wy_lo; wy < wy_hi; ++wy) {
                    const int iy = in_y >= out_y ? oy + wy : oy - wy;
                    const double* row = ins + iy * in_x;
                    const double* wrow = w + wy * fx;
                    for (int wx = wx_lo; wx < wx_hi; ++wx) {
                        const int ix = in_x >= out_x ? ox + wx : ox - wx;
                        acc += row[ix] * wrow[wx];
                    }
                }
                outs[oy * out_x + ox] += acc;
            }
        }
    }
}

void conv_backward_input(double* d_in, int in_x, int in_y,
                         const double* d_out, int out_x, int out_y,
                         const double* w, int fx, int fy, int batch) {
    const std::ptrdiff_t in_n = std::ptrdiff_t{1} * in_y * in_x;
    const std::ptrdiff_t out_n = std::ptrdiff_t{1} * out_y * out_x;
#pragma omp parallel for schedule(static)
    for (int s = 0; s < batch; ++s) {
        double* ds = d_in + s * in_n;
        const double* gs = d_out + s * out_n;
        for (int iy = 0; iy < in_y; ++iy) {
            int wy_lo, wy_hi;
            backward_tap_range(iy, out_y, in_y, fy, wy_lo, wy_hi);
            for (int ix = 0; ix < in_x; ++ix) {
                int wx_lo, wx_hi;
                backward_tap_range(ix, out_x, in_x, fx, wx_lo, wx_hi);
                double acc = 0.0;
                for (int wy = wy_lo; wy < wy_hi; ++wy) {
                    const int oy = in_y >= out_y ? iy - wy : iy + wy;
                    const double* grow = gs + oy * out_x;
                    const double* wrow = w + wy * fx;
                    for (int wx = wx_lo; wx < wx_hi; ++wx) {
                        const int ox = in_x >= out_x ? ix - wx : ix + wx;
                        acc += grow[ox] * wrow[wx];
                    }
                }
                ds[iy * in_x + ix] += acc;
            }
        }
    }
}

void conv_backward_weights(const double* in, int in_x, int in_y,
                           const double* d_out, int out_x, int out_y,
                           double* d_w, int fx, int fy, int batch) {
    const std::ptrdiff_t in_n = std::ptrdiff_t{1} * in_y * in_x;
    const std::ptrdiff_t out_n = std::ptrdiff_t{1} * out_y * out_x;
    // Each thread owns whole rows of d_w; the (s, oy, ox) accumulation
    // order inside one tap matches the serial reference.
#pragma omp parallel for schedule(static)
    for (int wy = 0; wy < fy; ++wy) {
        int oy_lo, oy_hi;
        output_range(wy, in_y, out_y, oy_lo, oy_hi);
        for (int wx = 0; wx < fx; ++wx) {
            int ox_lo, ox_hi;
            output_range(wx, in_x, out_x, ox_lo, ox_hi);
            double acc = 0.0;
            for (int s = 0; s < batch; ++s) {
                const double* ins = in + s * in_n;
                const double* gs = d_out + s * out_n;
                for (int oy = oy_lo; oy < oy_hi; ++oy) {
                    const int iy = in_y >= out_y ? oy + wy : oy - wy;
                    const double* row = ins + iy * in_x;
                    const double* grow = gs + oy * out_x;
                    for (int ox = ox_lo; ox < ox_hi; ++ox) {
                        const int ix = in_x >= out_x ? ox + wx : ox - wx;
                        acc += row[ix] * grow[ox];
                    }
                }
            }
            d_w[wy * fx + wx] = acc;
        }
    }
}

void pool_forward(const double* in, int in_x, int in_y, double* out,
                  int out_x, int out_y, const int* part_x, const int* part_y,
                  double scale, int batch, int* argmax) {
    const std::ptrdiff_t in_n = std::ptrdiff_t{1} * in_y * in_x;
    const std::ptrdiff_t out_n = std::ptrdiff_t{1} * out_y * out_x;
    // Window origins are shared across samples; precompute them once.
    std::vector<int> off_y(static_cast<std::size_t>(out_y) + 1, 0);
    std::vector<int> off_x(static_cast<std::size_t>(out_x) + 1, 0);
    for (int oy = 0; oy < out_y; ++oy) off_y[oy + 1] = off_y[oy] + part_y[oy];
    for (int ox = 0; ox < out_x; ++ox) off_x[ox + 1] = off_x[ox] + part_x[ox];
#pragma omp parallel for schedule(static)
    for (int s = 0; s < batch; ++s) {
        const double* ins = in + s * in_n;
        double* outs = out + s * out_n;
        int* ams = argmax + s * out_n;
        for (int oy = 0; oy < out_y; ++oy) {
            for (int ox = 0; ox < out_x; ++ox) {
                int best = off_y[oy] * in_x + off_x[ox];
                double best_v = ins[best];
                for (int y = off_y[oy]; y < off_y[oy + 1]; ++y) {
                    const double* row = ins + y * in_x;
                    for (int x = off_x[ox]; x < off_x[ox + 1]; ++x) {
                        if (row[x] > best_v) {
                            best_v = row[x];
                            best = y * in_x + x;
                        }
                    }
                }
                outs[oy * out_x + ox] += best_v * scale;
                ams[oy * out_x + ox] = best;
            }
        }
    }
}

void pool_backward(const double* in, double* d_in, int in_x, int in_y,
                   const double* d_out, int out_x, int out_y,
                   const int* argmax, double scale, int batch,
                   double* d_scale) {
    const std::ptrdiff_t in_n = std::ptrdiff_t{1} * in_y * in_x;
    const std::ptrdiff_t out_n = std::ptrdiff_t{1} * out_y * out_x;
    // Pool windows partition the input, so within one sample every d_in
    // entry is touched at most once; samples are disjoint across threads.
    std::vector<double> partial(static_cast<std::size_t>(std::max(batch, 0)),
                                0.0);
#pragma omp parallel for schedule(static)
    for (int s = 0; s < batch; ++s) {
        const double* ins = in + s * in_n;
        double* ds = d_in + s * in_n;
        const double* gs = d_out + s * out_n;
        const int* ams = argmax + s * out_n;
        double acc = 0.0;
        for (int o = 0; o < out_y * out_x; ++o) {
            const double g = gs[o];
            const int idx = ams[o];
            ds[idx] += g * scale;
            acc += g * ins[idx];
        }
        partial[s] = acc;
    }
    double total = 0.0;
    for (int s = 0; s < batch; ++s) total += partial[s];
    *d_scale = total;
}

std::vector<int> canonical_partition(int n, int m) {
    if (m < 1 || m > n) {
        throw std::invalid_argument("canonical_partition: need 1 <= m <= n, got n=" +
                                    std::to_string(n) + " m=" + std::to_string(m));
    }
    std::vector<int> parts(static_cast<std::size_t>(m), n / m);
    for (int i = 0; i < n % m; ++i) parts[static_cast<std::size_t>(i)] += 1;
    return parts;
}

std::vector<int> pooling_partition(int n, int m, Rng& rng) {
    std::vector<int> parts = canonical_partition(n, m);
    for (int i = static_cast<int>(parts.size()) - 1; i > 0; --i) {
        const int j = rng.uniform_int(i + 1);
        std::swap(parts[static_cast<std::size_t>(i)],
                  parts[static_cast<std::size_t>(j)]);
    }
    return parts;
}

} // namespace nevo::kernels
