#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "curemc3/model.hpp"
#include "curemc3/promotion.hpp"
#include "curemc3/sampler.hpp"
#include "curemc3/simulate.hpp"

using namespace curemc3;

namespace {

SimulatedData dataset(std::size_t n)
{
    SimulationConfig cfg;
    cfg.n = n;
    cfg.seed = 1;
    cfg.spec = make_promotion_spec(Family::weibull);
    cfg.theta.gamma = 1.0;
    cfg.theta.lambda = 1.0;
    cfg.theta.alpha = {1.0, 1.5};
    cfg.theta.beta = {0.5, 0.7, -0.8};
    cfg.numeric = {NumericCovariateGen{"age", NumericCovariateGen::Kind::normal, 0.0, 1.0}};
    cfg.factors = {FactorCovariateGen{"kids", {"no", "yes"}, {0.5, 0.5}}};
    return simulate(cfg);
}

Theta truth()
{
    Theta th;
    th.gamma = 1.0;
    th.lambda = 1.0;
    th.alpha = {1.0, 1.5};
    th.beta = {0.5, 0.7, -0.8};
    return th;
}

void BM_ObservedLogLikelihood(benchmark::State& state)
{
    const SimulatedData sim = dataset(static_cast<std::size_t>(state.range(0)));
    const PromotionSpec spec = make_promotion_spec(Family::weibull);
    const Theta th = truth();
    for (auto _ : state)
        benchmark::DoNotOptimize(observed_log_likelihood(sim.data, th, spec));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ObservedLogLikelihood)->Arg(500)->Arg(5000);

void BM_EvaluateBatch(benchmark::State& state)
{
    const auto n = static_cast<std::size_t>(state.range(0));
    const SimulatedData sim = dataset(n);
    std::vector<double> log_y(n), log_f(n), log_F(n);
    for (std::size_t i = 0; i < n; ++i)
        log_y[i] = std::log(sim.data.y[i]);
    const PromotionSpec spec = make_promotion_spec(Family::weibull);
    const double a[] = {1.0, 1.5};
    for (auto _ : state) {
        evaluate_batch(spec, sim.data.y, log_y, a, log_f, log_F);
        benchmark::DoNotOptimize(log_f.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EvaluateBatch)->Arg(500)->Arg(5000);

void BM_MwgSweep(benchmark::State& state)
{
    const SimulatedData sim = dataset(static_cast<std::size_t>(state.range(0)));
    Mc3Config cfg;
    cfg.n_chains = 1;
    const Mc3Model model(sim.data, make_promotion_spec(Family::weibull), {}, cfg);
    Rng rng = make_stream(1, 1);
    Chain chain = model.initial_chain(0, rng);
    for (auto _ : state) {
        gibbs_update_latent(chain, model, rng);
        mwg_sweep(chain, model, rng);
    }
}
BENCHMARK(BM_MwgSweep)->Arg(500)->Arg(5000);

void BM_MalaSweep(benchmark::State& state)
{
    const SimulatedData sim = dataset(static_cast<std::size_t>(state.range(0)));
    Mc3Config cfg;
    cfg.n_chains = 1;
    const Mc3Model model(sim.data, make_promotion_spec(Family::weibull), {}, cfg);
    Rng rng = make_stream(1, 1);
    Chain chain = model.initial_chain(0, rng);
    for (auto _ : state)
        benchmark::DoNotOptimize(mala_sweep(chain, model, rng));
}
BENCHMARK(BM_MalaSweep)->Arg(500);

void BM_Mc3Cycles(benchmark::State& state)
{
    const SimulatedData sim = dataset(500);
    Mc3Config cfg;
    cfg.n_chains = 4;
    cfg.mcmc_cycles = 100;
    cfg.sweeps_per_cycle = 5;
    for (auto _ : state)
        benchmark::DoNotOptimize(run_mc3(sim.data, make_promotion_spec(Family::weibull), {}, cfg).bic);
    state.SetItemsProcessed(state.iterations() * 100);
}
BENCHMARK(BM_Mc3Cycles)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
