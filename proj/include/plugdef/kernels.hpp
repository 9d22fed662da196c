#pragma once
// Numeric kernels: scalar reference implementations plus AVX2 variants
// selected at runtime. All kernels are deterministic for a fixed backend;
// gemm row partitioning keeps results bitwise identical for any thread count.
#include <cstddef>

namespace plugdef::kern {

enum class Backend { Scalar, Avx2 };

bool avx2_supported();
Backend active_backend();
// Throws if the backend is not supported on this CPU. The PLUGDEF_KERNELS
// environment variable ("scalar" | "avx2") overrides the startup default.
void set_backend(Backend b);
const char* backend_name(Backend b);

int threads();
void set_threads(int n);

// Row-major GEMM family. acc=false overwrites C, acc=true accumulates.
//   nn: C[m,n] = sum_l (alpha*A[i,l]) * B[l,j]      A:[m,k] B:[k,n]
//   nt: C[m,n] = alpha * dot(A[i,:], B[j,:])        A:[m,k] B:[n,k]
//   tn: C[m,n] = sum_l (alpha*A[l,i]) * B[l,j]      A:[k,m] B:[k,n]
void gemm_nn(int m, int n, int k, float alpha, const float* a, const float* b, float* c, bool acc);
void gemm_nt(int m, int n, int k, float alpha, const float* a, const float* b, float* c, bool acc);
void gemm_tn(int m, int n, int k, float alpha, const float* a, const float* b, float* c, bool acc);
void gemm_nn(int m, int n, int k, double alpha, const double* a, const double* b, double* c, bool acc);
void gemm_nt(int m, int n, int k, double alpha, const double* a, const double* b, double* c, bool acc);
void gemm_tn(int m, int n, int k, double alpha, const double* a, const double* b, double* c, bool acc);

// Elementwise; out may alias an input.
void add(std::size_t n, const float* a, const float* b, float* out);
void sub(std::size_t n, const float* a, const float* b, float* out);
void mul(std::size_t n, const float* a, const float* b, float* out);
void scale(std::size_t n, float s, const float* x, float* out);
void axpy(std::size_t n, float s, const float* x, float* y); // y += s*x
void sign(std::size_t n, const float* x, float* out);        // sign(0) = 0
void clamp(std::size_t n, const float* x, float lo, float hi, float* out);
void clamp_box(std::size_t n, const float* x, const float* lo, const float* hi, float* out);
void relu(std::size_t n, const float* x, float* out);
void add(std::size_t n, const double* a, const double* b, double* out);
void sub(std::size_t n, const double* a, const double* b, double* out);
void mul(std::size_t n, const double* a, const double* b, double* out);
void scale(std::size_t n, double s, const double* x, double* out);
void axpy(std::size_t n, double s, const double* x, double* y);
void sign(std::size_t n, const double* x, double* out);
void clamp(std::size_t n, const double* x, double lo, double hi, double* out);
void clamp_box(std::size_t n, const double* x, const double* lo, const double* hi, double* out);
void relu(std::size_t n, const double* x, double* out);

// Reductions.
float sum(std::size_t n, const float* x);
float dot(std::size_t n, const float* a, const float* b);
float sumsq(std::size_t n, const float* x);
float maxval(std::size_t n, const float* x); // n >= 1
float maxabs(std::size_t n, const float* x);
double sum(std::size_t n, const double* x);
double dot(std::size_t n, const double* a, const double* b);
double sumsq(std::size_t n, const double* x);
double maxval(std::size_t n, const double* x);
double maxabs(std::size_t n, const double* x);

} // namespace plugdef::kern
