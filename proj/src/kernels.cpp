#include "gridtopo/kernels.hpp"

#include <atomic>
#include <stdexcept>
#include <string>

namespace gridtopo::kernels {
namespace {

Backend detect_best() {
#ifdef GRIDTOPO_HAVE_AVX2
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))
    return Backend::avx2;
#endif
#ifdef GRIDTOPO_HAVE_NEON
  return Backend::neon;  // baseline on aarch64
#endif
  return Backend::scalar;
}

const Table* table_for(Backend b) {
  switch (b) {
    case Backend::scalar:
      return scalar_table();
    case Backend::avx2:
#ifdef GRIDTOPO_HAVE_AVX2
      if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))
        return avx2_table();
#endif
      return nullptr;
    case Backend::neon:
#ifdef GRIDTOPO_HAVE_NEON
      return neon_table();
#else
      return nullptr;
#endif
  }
  return nullptr;
}

struct Dispatch {
  std::atomic<const Table*> table;
  std::atomic<Backend> backend;
  Dispatch() {
    const Backend b = detect_best();
    backend.store(b);
    table.store(table_for(b));
  }
};

Dispatch& dispatch() {
  static Dispatch d;
  return d;
}

inline const Table& tab() { return *dispatch().table.load(std::memory_order_relaxed); }

}  // namespace

const char* backend_name(Backend b) {
  switch (b) {
    case Backend::scalar: return "scalar";
    case Backend::avx2: return "avx2";
    case Backend::neon: return "neon";
  }
  return "?";
}

bool backend_available(Backend b) { return table_for(b) != nullptr; }

Backend active_backend() { return dispatch().backend.load(); }

void set_backend(Backend b) {
  const Table* t = table_for(b);
  if (!t)
    throw std::runtime_error(std::string("kernel backend not available: ") +
                             backend_name(b));
  dispatch().backend.store(b);
  dispatch().table.store(t);
}

double sum(const double* x, std::size_t n) { return tab().sum(x, n); }

double dot(const double* x, const double* y, std::size_t n) {
  return tab().dot(x, y, n);
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  tab().axpy(a, x, y, n);
}

void combine(const double* base, double a, const double* x, double b,
             const double* y, double* dst, std::size_t n) {
  tab().combine(base, a, x, b, y, dst, n);
}

DiffStats diff_stats(const double* x, const double* y, std::size_t n) {
  return tab().diff_stats(x, y, n);
}

double quad_weighted(const double* ra, const double* rb, const double* xa,
                     const double* xb, const double* wp, const double* wq,
                     const double* wpq, std::size_t n) {
  return tab().quad_weighted(ra, rb, xa, xb, wp, wq, wpq, n);
}

}  // namespace gridtopo::kernels
