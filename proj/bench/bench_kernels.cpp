// Parallel kernels against the serial reference implementations.
// Thread count follows OMP_NUM_THREADS / SMARTCPD_THREADS.

#include <benchmark/benchmark.h>

#include <map>
#include <random>

#include "smartcpd/gradient.hpp"
#include "smartcpd/metrics.hpp"
#include "smartcpd/parallel.hpp"
#include "smartcpd/reference.hpp"
#include "smartcpd/sampler.hpp"
#include "smartcpd/synthdata.hpp"

using namespace smartcpd;

namespace {

Matrix uniform(Eigen::Index r, Eigen::Index c, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(0.1, 1.1);
  Matrix m(r, c);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = u(gen);
  return m;
}

struct Problem {
  FactorModel truth;
  DenseTensor x;
};

const Problem& problem(std::size_t dim, std::size_t rank) {
  static std::map<std::pair<std::size_t, std::size_t>, Problem> cache;
  auto it = cache.find({dim, rank});
  if (it == cache.end()) {
    GeneratorSpec g;
    g.shape = {dim, dim, dim};
    g.rank = rank;
    g.observation = Observation::poisson;
    g.seed = 1;
    FactorModel truth = gen_factors(g);
    DenseTensor x = observe(truth, g);
    it = cache.emplace(std::make_pair(dim, rank), Problem{std::move(truth), std::move(x)}).first;
  }
  return it->second;
}

// Sampled gradient on a |F| x I block: fused parallel kernel vs per-entry reference.
void SampledGradient(benchmark::State& state, bool parallel) {
  std::mt19937_64 gen(2);
  const auto fibers = state.range(0), cols = state.range(1), rank = state.range(2);
  const Matrix h = uniform(fibers, rank, gen), a = uniform(cols, rank, gen);
  Matrix x(fibers, cols);
  std::poisson_distribution<int> p(2.0);
  for (Eigen::Index k = 0; k < x.size(); ++k) x.data()[k] = p(gen);
  const LossSpec loss = LossSpec::gen_kl();
  for (auto _ : state) {
    Matrix g = parallel ? sampled_gradient(loss, x, h, a) : reference::sampled_gradient(loss, x, h, a);
    benchmark::DoNotOptimize(g.data());
  }
  state.SetItemsProcessed(state.iterations() * fibers * cols);
}

// One solver iteration's data movement: draw fibers, extract them, build H rows.
void FiberGather(benchmark::State& state, bool parallel) {
  const Problem& pr = problem(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  const std::size_t mode = 1;
  const Unfolding unf(pr.x.shape(), mode);
  Sampler sampler(3);
  const FiberSet fibers = sampler.sample_fibers(unf.num_fibers(), static_cast<std::uint64_t>(state.range(2)));
  const Matrix kr = parallel ? Matrix() : reference::khatri_rao(pr.truth, mode);
  const Matrix unfolded = parallel ? Matrix() : reference::unfold(pr.x, mode);
  for (auto _ : state) {
    if (parallel) {
      Matrix xh = extract_fibers(pr.x, mode, fibers);
      Matrix hh = khatri_rao_rows(pr.truth, mode, fibers);
      benchmark::DoNotOptimize(xh.data());
      benchmark::DoNotOptimize(hh.data());
    } else {
      // Row selection from the precomputed full unfolding and Khatri-Rao product.
      Matrix xh(static_cast<Eigen::Index>(fibers.size()), unfolded.cols());
      Matrix hh(static_cast<Eigen::Index>(fibers.size()), kr.cols());
      for (std::size_t j = 0; j < fibers.size(); ++j) {
        xh.row(static_cast<Eigen::Index>(j)) = unfolded.row(static_cast<Eigen::Index>(fibers[j]));
        hh.row(static_cast<Eigen::Index>(j)) = kr.row(static_cast<Eigen::Index>(fibers[j]));
      }
      benchmark::DoNotOptimize(xh.data());
      benchmark::DoNotOptimize(hh.data());
    }
  }
}

void ObjectiveCost(benchmark::State& state, bool parallel) {
  const Problem& pr = problem(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  const Tensor t(pr.x);
  const LossSpec loss = LossSpec::gen_kl();
  for (auto _ : state) {
    double c = parallel ? objective_cost(t, pr.truth, loss) : reference::objective_cost(pr.x, pr.truth, loss);
    benchmark::DoNotOptimize(c);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(pr.x.size()));
}

void FullGradient(benchmark::State& state, bool parallel) {
  const Problem& pr = problem(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  const Tensor t(pr.x);
  const LossSpec loss = LossSpec::gen_kl();
  for (auto _ : state) {
    Matrix g = parallel ? full_gradient(t, pr.truth, loss, 0) : reference::full_gradient(pr.x, pr.truth, loss, 0);
    benchmark::DoNotOptimize(g.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(pr.x.size()));
}

void FullTensor(benchmark::State& state, bool parallel) {
  const Problem& pr = problem(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  for (auto _ : state) {
    DenseTensor m = parallel ? full_tensor(pr.truth) : reference::full_tensor(pr.truth);
    benchmark::DoNotOptimize(m.values().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(pr.x.size()));
}

}  // namespace

BENCHMARK_CAPTURE(SampledGradient, parallel, true)->Args({20, 100, 10})->Args({2000, 200, 10})->Args({20000, 300, 20});
BENCHMARK_CAPTURE(SampledGradient, reference, false)->Args({20, 100, 10})->Args({2000, 200, 10})->Args({20000, 300, 20});
BENCHMARK_CAPTURE(FiberGather, parallel, true)->Args({100, 10, 20})->Args({100, 10, 2000});
BENCHMARK_CAPTURE(FiberGather, reference, false)->Args({100, 10, 20})->Args({100, 10, 2000});
BENCHMARK_CAPTURE(ObjectiveCost, parallel, true)->Args({100, 10});
BENCHMARK_CAPTURE(ObjectiveCost, reference, false)->Args({100, 10});
BENCHMARK_CAPTURE(FullGradient, parallel, true)->Args({100, 10});
BENCHMARK_CAPTURE(FullGradient, reference, false)->Args({100, 10});
BENCHMARK_CAPTURE(FullTensor, parallel, true)->Args({100, 10});
BENCHMARK_CAPTURE(FullTensor, reference, false)->Args({100, 10});

int main(int argc, char** argv) {
  parallel::configure_threads_from_env();
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
