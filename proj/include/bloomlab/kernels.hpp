#pragma once

// Data-parallel kernels shared by the norm, BMO and experiment code.
//
// Every kernel exists twice: a plain serial loop in kernels::serial, kept as
// the reference, and an OpenMP version in kernels::omp. Both produce
// bitwise-identical results: work items are independent and every reduction
// is done afterwards in index order, so thread scheduling never changes a sum.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace bloomlab::kernels {

struct DenseMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;  // row-major

  DenseMatrix() = default;
  DenseMatrix(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}
  double& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }
};

// Fills column `col` of an n-row matrix into `out`.
using ColumnFn = std::function<void(int col, std::span<double> out)>;
using ScoreFn = std::function<double(std::size_t)>;

struct ArgMax {
  double value = 0.0;
  std::size_t index = 0;  // lowest index among ties
};

namespace serial {
DenseMatrix assemble(int rows, int cols, const ColumnFn& column);
void matvec(const DenseMatrix& m, std::span<const double> x, std::span<double> y);
void matvec_transposed(const DenseMatrix& m, std::span<const double> x, std::span<double> y);
// B^T B
DenseMatrix gram(const DenseMatrix& b);
std::vector<double> evaluate(std::size_t count, const ScoreFn& score);
ArgMax argmax(std::size_t count, const ScoreFn& score);
}  // namespace serial

namespace omp {
DenseMatrix assemble(int rows, int cols, const ColumnFn& column);
void matvec(const DenseMatrix& m, std::span<const double> x, std::span<double> y);
void matvec_transposed(const DenseMatrix& m, std::span<const double> x, std::span<double> y);
DenseMatrix gram(const DenseMatrix& b);
std::vector<double> evaluate(std::size_t count, const ScoreFn& score);
ArgMax argmax(std::size_t count, const ScoreFn& score);
}  // namespace omp

// Dispatch used by the library: OpenMP unless parallelism is switched off.
void set_parallel(bool on);
bool parallel();
// Caps the OpenMP team size; 0 means the runtime default.
void set_thread_cap(int threads);
int thread_cap();

DenseMatrix assemble(int rows, int cols, const ColumnFn& column);
void matvec(const DenseMatrix& m, std::span<const double> x, std::span<double> y);
void matvec_transposed(const DenseMatrix& m, std::span<const double> x, std::span<double> y);
DenseMatrix gram(const DenseMatrix& b);
std::vector<double> evaluate(std::size_t count, const ScoreFn& score);
ArgMax argmax(std::size_t count, const ScoreFn& score);

// Index-ordered max of precomputed scores.
ArgMax reduce_max(std::span<const double> scores);

}  // namespace bloomlab::kernels
