#pragma once

#include <cstddef>

// Vectorized inner loops shared by the simulator and the learners.
// Every operation has a scalar reference implementation plus optional
// AVX2 / NEON variants; the active variant is picked once at startup
// from CPU capabilities and can be overridden for equivalence testing.
// Different backends may sum in different orders, so results agree to
// rounding, not bit-for-bit.

namespace gridtopo::kernels {

enum class Backend { scalar, avx2, neon };

const char* backend_name(Backend b);
bool backend_available(Backend b);
Backend active_backend();

// Forces a backend for subsequent calls. Throws std::runtime_error if the
// backend is not available on this machine.
void set_backend(Backend b);

struct DiffStats {
  double sum;     // sum of (x[i] - y[i])
  double sum_sq;  // sum of (x[i] - y[i])^2
};

double sum(const double* x, std::size_t n);
double dot(const double* x, const double* y, std::size_t n);

// y += a * x
void axpy(double a, const double* x, double* y, std::size_t n);

// dst = base + a*x + b*y; base may be nullptr, meaning zeros.
// dst must not alias x or y; dst == base is allowed.
void combine(const double* base, double a, const double* x, double b,
             const double* y, double* dst, std::size_t n);

DiffStats diff_stats(const double* x, const double* y, std::size_t n);

// sum of ra[i]*rb[i]*wp[i] + xa[i]*xb[i]*wq[i] + (ra[i]*xb[i] + xa[i]*rb[i])*wpq[i].
// The weighted quadratic form behind every second-moment computation here.
double quad_weighted(const double* ra, const double* rb, const double* xa,
                     const double* xb, const double* wp, const double* wq,
                     const double* wpq, std::size_t n);

// Function-pointer table a backend fills in. Internal to the dispatch
// machinery but visible so the per-arch translation units can define one.
struct Table {
  double (*sum)(const double*, std::size_t);
  double (*dot)(const double*, const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  void (*combine)(const double*, double, const double*, double, const double*,
                  double*, std::size_t);
  DiffStats (*diff_stats)(const double*, const double*, std::size_t);
  double (*quad_weighted)(const double*, const double*, const double*,
                          const double*, const double*, const double*,
                          const double*, std::size_t);
};

// Defined only in the translation units actually compiled for this arch;
// the dispatcher references them under the matching feature macro.
const Table* scalar_table();
const Table* avx2_table();
const Table* neon_table();

}  // namespace gridtopo::kernels
