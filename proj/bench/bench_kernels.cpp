// Parallel kernels against their serial twins. Arg(0) is the serial kernel,
// Arg(k > 0) the parallel kernel on k workers.

#include <benchmark/benchmark.h>

#include <cmath>

#include "israte/kernels.hpp"

using namespace israte;

namespace {

const ImportanceModel& gaussian_model() {
    static const auto model = ImportanceModel::standard_mc(ScalarDistribution::gaussian(0, 1), {});
    return model;
}

void event_hits(benchmark::State& state) {
    const auto& model = gaussian_model();
    const auto g = ScalarDistribution::gaussian(0, 1);
    const EventSpec event{EventSpec::Kind::quantile_exceedance, 0.05, g.upper_quantile(0.03) / g.upper_quantile(0.05) - 1, {}};
    const EventTester tester(model, event);
    const int workers = static_cast<int>(state.range(0));
    if (workers > 0) kernels::set_worker_count(workers);
    for (auto _ : state) {
        const auto hits = workers == 0 ? kernels::count_event_hits_serial(model, tester, 400, 2000, 1)
                                       : kernels::count_event_hits(model, tester, 400, 2000, 1);
        benchmark::DoNotOptimize(hits);
    }
    state.SetItemsProcessed(state.iterations() * 2000 * 400);
}

void integrals(benchmark::State& state) {
    const auto& model = gaussian_model();
    const auto g = [](double x) { return std::cos(x); };
    const int workers = static_cast<int>(state.range(0));
    if (workers > 0) kernels::set_worker_count(workers);
    for (auto _ : state) {
        auto v = workers == 0 ? kernels::replicated_integrals_serial(model, 200, 2000, 2, g)
                              : kernels::replicated_integrals(model, 200, 2000, 2, g);
        benchmark::DoNotOptimize(v.data());
    }
    state.SetItemsProcessed(state.iterations() * 2000 * 200);
}

void gamma_curve(benchmark::State& state) {
    std::vector<double> s(20000);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = (i + 1.0) / (s.size() + 1.0);
    const int workers = static_cast<int>(state.range(0));
    if (workers > 0) kernels::set_worker_count(workers);
    for (auto _ : state) {
        auto v = workers == 0 ? kernels::gamma_grid_serial(0.1, true, s) : kernels::gamma_grid(0.1, true, s);
        benchmark::DoNotOptimize(v.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s.size()));
}

}  // namespace

BENCHMARK(event_hits)->Arg(0)->Arg(1)->Arg(2)->Arg(4)->UseRealTime()->Unit(benchmark::kMillisecond);
BENCHMARK(integrals)->Arg(0)->Arg(1)->Arg(2)->Arg(4)->UseRealTime()->Unit(benchmark::kMillisecond);
BENCHMARK(gamma_curve)->Arg(0)->Arg(1)->Arg(2)->Arg(4)->UseRealTime()->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
