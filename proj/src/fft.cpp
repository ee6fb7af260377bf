#include "qsm/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <mutex>

namespace qsm::fft {

namespace {

std::mutex &plannerMutex()
{
  static std::mutex m;
  return m;
}

int &threadCount()
{
  static int n = 1;
  return n;
}

void run(Dims const &dims, std::span<Cx> data, int sign)
{
  auto *ptr = reinterpret_cast<fftw_complex *>(data.data());
  fftw_plan plan;
  {
    std::scoped_lock lock(plannerMutex());
    static bool const init = fftw_init_threads() != 0;
    if (init) { fftw_plan_with_nthreads(threadCount()); }
    // FFTW is row-major, so the slowest axis (z) comes first.
    plan = fftw_plan_dft_3d(static_cast<int>(dims[2]), static_cast<int>(dims[1]), static_cast<int>(dims[0]), ptr, ptr,
                            sign, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  std::scoped_lock lock(plannerMutex());
  fftw_destroy_plan(plan);
}

} // namespace

void forward(Dims const &dims, std::span<Cx> data) { run(dims, data, FFTW_FORWARD); }

void inverse(Dims const &dims, std::span<Cx> data)
{
  run(dims, data, FFTW_BACKWARD);
  double const scale = 1. / static_cast<double>(data.size());
  for (auto &c : data) { c *= scale; }
}

std::vector<Cx> forward(Dims const &dims, std::span<float const> data)
{
  std::vector<Cx> k(data.begin(), data.end());
  forward(dims, k);
  return k;
}

std::vector<Cx> forward(Dims const &dims, std::span<double const> data)
{
  std::vector<Cx> k(data.begin(), data.end());
  forward(dims, k);
  return k;
}

void setThreads(int n)
{
  std::scoped_lock lock(plannerMutex());
  threadCount() = std::max(1, n);
}

} // namespace qsm::fft
