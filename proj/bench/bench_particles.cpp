#include <chrono>
#include <cstdio>
#include <cstdlib>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "mfc/lq_mfc.hpp"
#include "mfc/mvsde.hpp"

// Times the OpenMP particle sweep against the serial reference on the
// same workload and confirms the ensembles are bit-identical.
int main(int argc, char** argv) {
  int N = argc > 1 ? std::atoi(argv[1]) : 200000;
  std::size_t M = argc > 2 ? static_cast<std::size_t>(std::atoi(argv[2])) : 200;
  int reps = argc > 3 ? std::atoi(argv[3]) : 3;

  mfc::LqModel model;
  model.b1 = -0.5;
  model.b2 = 0.2;
  model.s1 = 0.2;
  model.m0 = 1.0;
  model.v0 = 0.04;
  mfc::MeanFieldDynamics dyn = model.dynamics();
  mfc::TimeGrid grid(1.0, M);
  mfc::InitialLaw law{model.m0, model.v0};
  mfc::ControlPolicy policy =
      mfc::ControlPolicy::feedback([](double, double x, double mx) { return -0.4 * x - 0.1 * mx; });

  int threads = 1;
#ifdef _OPENMP
  threads = omp_get_max_threads();
#endif
  std::printf("N=%d M=%zu reps=%d threads=%d\n", N, M, reps, threads);

  double best_serial = 1e300, best_parallel = 1e300;
  mfc::ParticleEnsemble serial, parallel;
  for (int r = 0; r < reps; ++r) {
    auto a = std::chrono::steady_clock::now();
    serial = mfc::simulate_forward_serial(dyn, policy, grid, N, 1, law);
    double ts = std::chrono::duration<double>(std::chrono::steady_clock::now() - a).count();
    best_serial = ts < best_serial ? ts : best_serial;

    a = std::chrono::steady_clock::now();
    parallel = mfc::simulate_forward(dyn, policy, grid, N, 1, law);
    double tp = std::chrono::duration<double>(std::chrono::steady_clock::now() - a).count();
    best_parallel = tp < best_parallel ? tp : best_parallel;
  }

  bool identical = serial.states == parallel.states && serial.controls == parallel.controls;
  std::printf("serial   best %.3f s  (%.1f Mparticle-steps/s)\n", best_serial,
              static_cast<double>(N) * static_cast<double>(M) / best_serial / 1e6);
  std::printf("parallel best %.3f s  (%.1f Mparticle-steps/s)\n", best_parallel,
              static_cast<double>(N) * static_cast<double>(M) / best_parallel / 1e6);
  std::printf("speedup %.2fx, bit-identical: %s\n", best_serial / best_parallel,
              identical ? "yes" : "NO");
  return identical ? 0 : 1;
}
