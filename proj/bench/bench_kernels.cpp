// serial vs OpenMP kernels; prints wall time per call and checks equality
//   bench_kernels [depth]

#include <omp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>

#include "bloomlab/kernels.hpp"
#include "bloomlab/rng.hpp"

using namespace bloomlab;
namespace k = bloomlab::kernels;

namespace {

template <class F>
double time_it(int reps, F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / reps;
}

void report(const char* name, double ts, double tp, bool same) {
  std::printf("%-18s serial %10.3f ms   omp %10.3f ms   x%5.2f   %s\n", name, 1e3 * ts,
              1e3 * tp, ts / tp, same ? "identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  const int L = argc > 1 ? std::atoi(argv[1]) : 5;
  const int n = 1 << (2 * L);
  std::printf("depth %d, n = %d, threads %d\n", L, n, omp_get_max_threads());

  Rng rng(7);
  k::DenseMatrix m(n, n);
  for (auto& v : m.a) v = rng.normal();
  std::vector<double> x(n), ys(n), yp(n);
  for (auto& v : x) v = rng.normal();

  const auto column = [&](int col, std::span<double> out) {
    for (int i = 0; i < n; ++i) out[i] = std::sin(0.37 * i + 1.3 * col);
  };
  k::DenseMatrix as, ap;
  double ts = time_it(3, [&] { as = k::serial::assemble(n, n, column); });
  double tp = time_it(3, [&] { ap = k::omp::assemble(n, n, column); });
  report("assemble", ts, tp, as.a == ap.a);

  ts = time_it(20, [&] { k::serial::matvec(m, x, ys); });
  tp = time_it(20, [&] { k::omp::matvec(m, x, yp); });
  report("matvec", ts, tp, ys == yp);

  ts = time_it(20, [&] { k::serial::matvec_transposed(m, x, ys); });
  tp = time_it(20, [&] { k::omp::matvec_transposed(m, x, yp); });
  report("matvec_transposed", ts, tp, ys == yp);

  const int g = std::min(n, 256);
  k::DenseMatrix b(g, g);
  for (auto& v : b.a) v = rng.normal();
  k::DenseMatrix gs, gp;
  ts = time_it(3, [&] { gs = k::serial::gram(b); });
  tp = time_it(3, [&] { gp = k::omp::gram(b); });
  report("gram", ts, tp, gs.a == gp.a);

  const std::size_t count = 1u << 20;
  const auto score = [](std::size_t i) { return std::cos(1e-3 * static_cast<double>(i)) * std::log1p(i); };
  std::vector<double> es, ep;
  ts = time_it(3, [&] { es = k::serial::evaluate(count, score); });
  tp = time_it(3, [&] { ep = k::omp::evaluate(count, score); });
  report("evaluate", ts, tp, es == ep);

  k::ArgMax as_, ap_;
  ts = time_it(3, [&] { as_ = k::serial::argmax(count, score); });
  tp = time_it(3, [&] { ap_ = k::omp::argmax(count, score); });
  report("argmax", ts, tp, as_.index == ap_.index && as_.value == ap_.value);
  return 0;
}
