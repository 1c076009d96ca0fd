#include "bloomlab/kernels.hpp"

#include <atomic>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace bloomlab::kernels {

namespace {
std::atomic<bool> g_parallel{true};
std::atomic<int> g_threads{0};

int team_size() {
#ifdef _OPENMP
  const int cap = g_threads.load();
  return cap > 0 ? cap : omp_get_max_threads();
#else
  return 1;
#endif
}
}  // namespace

ArgMax reduce_max(std::span<const double> scores) {
  ArgMax best;
  if (scores.empty()) return best;
  best.value = scores[0];
  for (std::size_t k = 1; k < scores.size(); ++k)
    if (scores[k] > best.value) best = {scores[k], k};
  return best;
}

namespace serial {

DenseMatrix assemble(int rows, int cols, const ColumnFn& column) {
  DenseMatrix m(rows, cols);
  std::vector<double> col(static_cast<std::size_t>(rows));
  for (int c = 0; c < cols; ++c) {
    column(c, col);
    for (int r = 0; r < rows; ++r) m(r, c) = col[static_cast<std::size_t>(r)];
  }
  return m;
}

void matvec(const DenseMatrix& m, std::span<const double> x, std::span<double> y) {
  for (int r = 0; r < m.rows; ++r) {
    double s = 0.0;
    const double* row = &m.a[static_cast<std::size_t>(r) * m.cols];
    for (int c = 0; c < m.cols; ++c) s += row[c] * x[static_cast<std::size_t>(c)];
    y[static_cast<std::size_t>(r)] = s;
  }
}

void matvec_transposed(const DenseMatrix& m, std::span<const double> x, std::span<double> y) {
  for (int c = 0; c < m.cols; ++c) {
    double s = 0.0;
    for (int r = 0; r < m.rows; ++r) s += m(r, c) * x[static_cast<std::size_t>(r)];
    y[static_cast<std::size_t>(c)] = s;
  }
}

DenseMatrix gram(const DenseMatrix& b) {
  DenseMatrix g(b.cols, b.cols);
  for (int i = 0; i < b.cols; ++i)
    for (int j = 0; j < b.cols; ++j) {
      double s = 0.0;
      for (int r = 0; r < b.rows; ++r) s += b(r, i) * b(r, j);
      g(i, j) = s;
    }
  return g;
}

std::vector<double> evaluate(std::size_t count, const ScoreFn& score) {
  std::vector<double> out(count);
  for (std::size_t k = 0; k < count; ++k) out[k] = score(k);
  return out;
}

ArgMax argmax(std::size_t count, const ScoreFn& score) {
  return reduce_max(evaluate(count, score));
}

}  // namespace serial

namespace omp {

DenseMatrix assemble(int rows, int cols, const ColumnFn& column) {
  DenseMatrix m(rows, cols);
#pragma omp parallel num_threads(team_size())
  {
    std::vector<double> col(static_cast<std::size_t>(rows));
#pragma omp for schedule(static)
    for (int c = 0; c < cols; ++c) {
      column(c, col);
      for (int r = 0; r < rows; ++r) m(r, c) = col[static_cast<std::size_t>(r)];
    }
  }
  return m;
}

void matvec(const DenseMatrix& m, std::span<const double> x, std::span<double> y) {
#pragma omp parallel for schedule(static) num_threads(team_size())
  for (int r = 0; r < m.rows; ++r) {
    double s = 0.0;
    const double* row = &m.a[static_cast<std::size_t>(r) * m.cols];
    for (int c = 0; c < m.cols; ++c) s += row[c] * x[static_cast<std::size_t>(c)];
    y[static_cast<std::size_t>(r)] = s;
  }
}

void matvec_transposed(const DenseMatrix& m, std::span<const double> x, std::span<double> y) {
#pragma omp parallel for schedule(static) num_threads(team_size())
  for (int c = 0; c < m.cols; ++c) {
    double s = 0.0;
    for (int r = 0; r < m.rows; ++r) s += m(r, c) * x[static_cast<std::size_t>(r)];
    y[static_cast<std::size_t>(c)] = s;
  }
}

DenseMatrix gram(const DenseMatrix& b) {
  DenseMatrix g(b.cols, b.cols);
#pragma omp parallel for schedule(dynamic) num_threads(team_size())
  for (int i = 0; i < b.cols; ++i)
    for (int j = 0; j < b.cols; ++j) {
      double s = 0.0;
      for (int r = 0; r < b.rows; ++r) s += b(r, i) * b(r, j);
      g(i, j) = s;
    }
  return g;
}

std::vector<double> evaluate(std::size_t count, const ScoreFn& score) {
  std::vector<double> out(count);
  const auto n = static_cast<long long>(count);
#pragma omp parallel for schedule(dynamic, 16) num_threads(team_size())
  for (long long k = 0; k < n; ++k) out[static_cast<std::size_t>(k)] = score(static_cast<std::size_t>(k));
  return out;
}

ArgMax argmax(std::size_t count, const ScoreFn& score) {
  return reduce_max(evaluate(count, score));
}

}  // namespace omp

void set_parallel(bool on) { g_parallel = on; }
bool parallel() { return g_parallel; }
void set_thread_cap(int threads) { g_threads = threads < 0 ? 0 : threads; }
int thread_cap() { return g_threads; }

DenseMatrix assemble(int rows, int cols, const ColumnFn& column) {
  return parallel() ? omp::assemble(rows, cols, column) : serial::assemble(rows, cols, column);
}
void matvec(const DenseMatrix& m, std::span<const double> x, std::span<double> y) {
  parallel() ? omp::matvec(m, x, y) : serial::matvec(m, x, y);
}
void matvec_transposed(const DenseMatrix& m, std::span<const double> x, std::span<double> y) {
  parallel() ? omp::matvec_transposed(m, x, y) : serial::matvec_transposed(m, x, y);
}
DenseMatrix gram(const DenseMatrix& b) { return parallel() ? omp::gram(b) : serial::gram(b); }
std::vector<double> evaluate(std::size_t count, const ScoreFn& score) {
  return parallel() ? omp::evaluate(count, score) : serial::evaluate(count, score);
}
ArgMax argmax(std::size_t count, const ScoreFn& score) {
  return parallel() ? omp::argmax(count, score) : serial::argmax(count, score);
}

}  // namespace bloomlab::kernels
