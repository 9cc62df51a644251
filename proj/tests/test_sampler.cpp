#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "curemc3/errors.hpp"
#include "curemc3/numeric.hpp"
#include "curemc3/sampler.hpp"
#include "curemc3/simulate.hpp"
#include "oracles.hpp"

using namespace curemc3;

namespace {

SurvivalDataset small_dataset(std::size_t n, std::uint64_t seed)
{
    SimulationConfig cfg;
    cfg.n = n;
    cfg.seed = seed;
    cfg.spec = make_promotion_spec(Family::exponential);
    cfg.theta.gamma = 0.5;
    cfg.theta.lambda = 1.0;
    cfg.theta.alpha = {1.0};
    cfg.theta.beta = {0.3, -0.5};
    cfg.numeric = {NumericCovariateGen{"x1", NumericCovariateGen::Kind::normal, 0.0, 1.0}};
    cfg.censoring_rate = 0.2;
    return simulate(cfg).data;
}

Mc3Config quick_config(std::size_t cycles, std::size_t chains)
{
    Mc3Config c;
    c.mcmc_cycles = cycles;
    c.n_chains = chains;
    c.sweeps_per_cycle = 2;
    c.seed = 99;
    return c;
}

}  // namespace

TEST_CASE("default temperature ladder")
{
    CHECK(default_temperatures(1, 0.001) == std::vector<double>{1.0});
    const auto h4 = default_temperatures(4, 0.001);
    const double expect[] = {1.0, std::pow(1.001, -31.0), std::pow(1.001, -242.0),
                             std::pow(1.001, -1023.0)};
    for (int c = 0; c < 4; ++c)
        CHECK(h4[c] == doctest::Approx(expect[c]).epsilon(1e-12));
    CHECK(h4[3] == doctest::Approx(0.35961).epsilon(1e-4));
    const auto h5 = default_temperatures(5, 0.001);
    CHECK(h5[1] == doctest::Approx(std::pow(1.001, -(std::pow(2.0, 3.5) - 1.0))).epsilon(1e-12));
    const auto h9 = default_temperatures(9, 0.001);
    CHECK(h9[1] == doctest::Approx(std::pow(1.001, -7.0)).epsilon(1e-12));
    for (std::size_t c = 1; c < h9.size(); ++c)
        CHECK(h9[c] < h9[c - 1]);
    CHECK_THROWS_AS(default_temperatures(0), ConfigError);
}

TEST_CASE("latent full conditional")
{
    // log p0 and log((1 - p0) S_U).
    CHECK(latent_susceptible_probability(std::log(0.2), kNegInf, 1.0) == 0.0);
    const double p = latent_susceptible_probability(std::log(0.2), std::log(0.8 * 0.5), 1.0);
    CHECK(p == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    CHECK(latent_susceptible_probability(std::log(0.2), std::log(0.4), 0.0) == 0.5);
    // Tempered version normalizes the powered contributions.
    const double h = 0.3;
    const double ref = std::pow(0.4, h) / (std::pow(0.2, h) + std::pow(0.4, h));
    CHECK(latent_susceptible_probability(std::log(0.2), std::log(0.4), h) ==
          doctest::Approx(ref).epsilon(1e-14));
}

TEST_CASE("log-normal proposal Hastings correction")
{
    CHECK(lognormal_hastings_log_ratio(1.0, 2.0) == doctest::Approx(std::log(2.0)));
    // Oracle: ratio of log-normal kernel densities q(old | new) / q(new | old).
    const double s = 0.4;
    auto q = [&](double to, double from) {
        const double z = (std::log(to) - std::log(from)) / s;
        return std::exp(-0.5 * z * z) / (to * s * std::sqrt(2.0 * M_PI));
    };
    CHECK(std::log(q(1.0, 2.0) / q(2.0, 1.0)) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("swap acceptance")
{
    CHECK(swap_log_acceptance(0.7, 0.7, -10.0, -500.0) == 0.0);
    CHECK(swap_log_acceptance(1.0, 0.5, -12.0, -12.0) == 0.0);
    CHECK(std::exp(swap_log_acceptance(1.0, 0.0, 0.0, -2.0)) == doctest::Approx(0.1353352832));
    // Re-proposing the same pair right after an exchange inverts the ratio.
    const double fwd = swap_log_acceptance(1.0, 0.6, -3.0, -7.0);
    const double back = swap_log_acceptance(1.0, 0.6, -7.0, -3.0);
    CHECK(fwd + back == doctest::Approx(0.0));
    CHECK((fwd >= 0.0 || back >= 0.0));
}

TEST_CASE("information criteria")
{
    CHECK(bayesian_information_criterion(-100.0, 8, 1500) ==
          doctest::Approx(200.0 + 8.0 * std::log(1500.0)));
    CHECK(bayesian_information_criterion(-100.0, 8, 1500) == doctest::Approx(258.506).epsilon(1e-5));
    CHECK(akaike_information_criterion(-100.0, 8) == 216.0);
    CHECK(parameter_count(make_promotion_spec(Family::weibull), 3) == 7);
    CHECK(parameter_count(make_promotion_spec(Family::gamma_mixture, 2), 1) == 8);
}

TEST_CASE("numeric gradient")
{
    const double x3[] = {3.0};
    const auto g = numeric_gradient([](std::span<const double> x) { return x[0] * x[0]; }, x3, 1e-6);
    CHECK(g[0] == doctest::Approx(6.0).epsilon(1e-6));
    const double x2[] = {1.0, -4.0};
    const auto z = numeric_gradient([](std::span<const double>) { return 2.5; }, x2, 1e-6);
    CHECK(z[0] == 0.0);
    CHECK(z[1] == 0.0);
    CHECK_THROWS_AS(numeric_gradient([](std::span<const double> x) { return x[0] > 1.0 ? kNegInf : 0.0; },
                                     std::vector<double>{1.0}, 1e-6),
                    GradientUnavailable);
}

TEST_CASE("numeric gradient of an observed log posterior matches a 4th-order stencil")
{
    SurvivalDataset d;
    d.y = {0.3, 0.9, 1.4, 2.2, 0.6};
    d.delta = {1, 0, 1, 0, 1};
    d.X.resize(5, 2);
    d.X << 1, -0.5, 1, 0.2, 1, 1.1, 1, -1.3, 1, 0.4;
    const PromotionSpec spec = make_promotion_spec(Family::weibull);
    const ThetaTransform tr(spec, 2);
    const Prior prior(PriorConfig::defaults(2), spec);
    const LogTargetFn target = [&](std::span<const double> z) {
        const Theta th = tr.from_free(z);
        return observed_log_likelihood(d, th, spec) + prior.log_prior(th) + tr.log_jacobian(z);
    };
    const std::vector<double> z{0.4, std::log(1.3), std::log(0.8), std::log(1.5), 0.2, -0.3};
    const auto g = numeric_gradient(target, z, 1e-6);
    for (std::size_t j = 0; j < z.size(); ++j) {
        const double h = 1e-3;
        std::vector<double> p = z;
        auto at = [&](double off) {
            p[j] = z[j] + off;
            return target(p);
        };
        const double ref = (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
        CHECK(g[j] == doctest::Approx(ref).epsilon(1e-4));
    }
}

TEST_CASE("MALA kernel")
{
    Rng rng(5);
    const LogTargetFn flat = [](std::span<const double>) { return 0.0; };
    SUBCASE("zero gradient always accepts on a flat target")
    {
        std::vector<double> x{0.3, -0.1};
        double lt = 0.0;
        for (int i = 0; i < 100; ++i)
            CHECK(mala_step(flat, x, lt, 0.5, 1e-6, rng).accepted);
    }
    SUBCASE("acceptance tends to one as tau shrinks")
    {
        const LogTargetFn target = [](std::span<const double> x) {
            return -0.5 * x[0] * x[0] - std::pow(x[0], 4) / 4.0;
        };
        double prev = 0.0;
        for (double tau : {0.5, 0.05, 1e-4}) {
            std::vector<double> x{1.0};
            double lt = target(x);
            int acc = 0;
            for (int i = 0; i < 4000; ++i)
                acc += mala_step(target, x, lt, tau, 1e-6, rng).accepted ? 1 : 0;
            const double rate = acc / 4000.0;
            CHECK(rate >= prev - 0.02);
            prev = rate;
        }
        CHECK(prev > 0.99);
    }
    SUBCASE("standard normal moments")
    {
        const LogTargetFn target = [](std::span<const double> x) {
            return -0.5 * (x[0] * x[0] + x[1] * x[1]);
        };
        std::vector<double> x{0.0, 0.0};
        double lt = 0.0;
        const int n = 100000, thin = 5;
        std::vector<double> a, b;
        for (int i = 0; i < n * thin; ++i) {
            mala_step(target, x, lt, 0.5, 1e-6, rng);
            if (i % thin == 0) {
                a.push_back(x[0]);
                b.push_back(x[1] * x[1]);
            }
        }
        const Moments m1 = sample_moments(a);
        const Moments m2 = sample_moments(b);
        // Batch-means style slack for residual autocorrelation.
        CHECK(std::abs(m1.mean) < 3.0 * 2.0 * std::sqrt(1.0 / n));
        CHECK(std::abs(m2.mean - 1.0) < 3.0 * 2.0 * std::sqrt(2.0 / n));
    }
}

TEST_CASE("free-coordinate transform")
{
    const PromotionSpec mix = make_promotion_spec(Family::gamma_mixture, 3);
    const ThetaTransform tr(mix, 2);
    CHECK(tr.size() == 2 + 8 + 2);
    Theta th;
    th.gamma = -0.4;
    th.lambda = 1.7;
    th.alpha = {0.2, 0.5, 0.3, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0};
    th.beta = {0.1, -0.2};
    const Theta back = tr.from_free(tr.to_free(th));
    CHECK(back.gamma == th.gamma);
    CHECK(back.lambda == doctest::Approx(th.lambda).epsilon(1e-15));
    for (std::size_t j = 0; j < th.alpha.size(); ++j)
        CHECK(back.alpha[j] == doctest::Approx(th.alpha[j]).epsilon(1e-14));
    CHECK(back.beta == th.beta);
    CHECK(tr.kind(0) == ThetaTransform::Kind::gamma);
    CHECK(tr.kind(1) == ThetaTransform::Kind::lambda);
    CHECK(tr.kind(2) == ThetaTransform::Kind::alpha);
    CHECK(tr.kind(10) == ThetaTransform::Kind::beta);
    CHECK(tr.beta_index(11) == 1);

    // Weibull: log lambda plus the log promotion coordinates.
    const ThetaTransform w(make_promotion_spec(Family::weibull), 1);
    const std::vector<double> z{0.2, 0.3, -0.4, 0.7, 1.0};
    CHECK(w.log_jacobian(z) == doctest::Approx(0.3 - 0.4 + 0.7));

    const auto names = sample_column_names(make_promotion_spec(Family::weibull), 3);
    const std::vector<std::string> expect{"g_mcmc", "lambda_mcmc", "a1_mcmc", "a2_mcmc",
                                          "b0_mcmc", "b1_mcmc", "b2_mcmc"};
    CHECK(names == expect);
    const auto row = theta_to_row(th);
    CHECK(theta_from_row(row, mix, 2) == th);
}

TEST_CASE("mixture simplex Jacobian matches finite differences")
{
    const PromotionSpec mix = make_promotion_spec(Family::gamma_mixture, 2);
    const ThetaTransform tr(mix, 1);
    // Free: (g, log lambda, log w2, log a..., b). Proportion p2 = e^z / (1 + e^z).
    const double z2 = 0.6;
    const double p2 = std::exp(z2) / (1.0 + std::exp(z2));
    const double dp = p2 * (1.0 - p2);
    std::vector<double> z{0.1, 0.0, z2, 0.0, 0.0, 0.0, 0.0, 0.3};
    CHECK(tr.log_jacobian(z) == doctest::Approx(std::log(dp)).epsilon(1e-12));
}

TEST_CASE("sampler settings are validated")
{
    const SurvivalDataset d = small_dataset(20, 1);
    Mc3Config c = quick_config(5, 2);
    c.temperatures = {0.9, 0.5};
    CHECK_THROWS_AS(run_mc3(d, make_promotion_spec(Family::exponential), {}, c), ConfigError);
    c.temperatures = {1.0, 1.2};
    CHECK_THROWS_AS(run_mc3(d, make_promotion_spec(Family::exponential), {}, c), ConfigError);
    c = quick_config(5, 2);
    c.prop_scale_theta = {0.1};
    CHECK_THROWS_AS(run_mc3(d, make_promotion_spec(Family::exponential), {}, c), ConfigError);
    c = quick_config(0, 2);
    CHECK_THROWS_AS(run_mc3(d, make_promotion_spec(Family::exponential), {}, c), ConfigError);
}

TEST_CASE("zero heat leaves only the Jacobian in the tempered target")
{
    const SurvivalDataset d = small_dataset(30, 2);
    Mc3Config c = quick_config(1, 2);
    c.temperatures = {1.0, 0.0};
    const Mc3Model model(d, make_promotion_spec(Family::weibull), PriorConfig::defaults(2), c);
    Rng rng(1);
    const Chain cold = model.initial_chain(1, rng);
    const std::vector<double> z{0.3, 0.1, -0.2, 0.4, 0.5, -0.6};
    CHECK(model.tempered_target(cold, z) == doctest::Approx(model.transform().log_jacobian(z)));
}

TEST_CASE("a single chain runs without swaps")
{
    const SurvivalDataset d = small_dataset(40, 3);
    const FitResult r = run_mc3(d, make_promotion_spec(Family::exponential), {}, quick_config(50, 1));
    CHECK(r.cycles() == 50);
    CHECK(r.swap_stats.attempts.empty());
    CHECK(r.temperatures == std::vector<double>{1.0});
    CHECK(r.column_names.front() == "g_mcmc");
    CHECK(r.n_parameters == 5);
    CHECK(std::isfinite(r.bic));
}

TEST_CASE("cached likelihoods stay coherent")
{
    const SurvivalDataset d = small_dataset(60, 4);
    for (double mala : {0.0, 0.2, 1.0}) {
        Mc3Config c = quick_config(150, 3);
        c.mala_probability = mala;
        c.check_caches = true;
        CHECK_NOTHROW(run_mc3(d, make_promotion_spec(Family::weibull), {}, c));
        CHECK_NOTHROW(run_mc3(d, make_promotion_spec(Family::gamma_mixture, 2), {}, c));
    }
}

TEST_CASE("equal heats accept every swap")
{
    const SurvivalDataset d = small_dataset(40, 5);
    Mc3Config c = quick_config(300, 3);
    c.temperatures = {1.0, 1.0, 1.0};
    const FitResult r = run_mc3(d, make_promotion_spec(Family::exponential), {}, c);
    for (std::size_t p = 0; p < 2; ++p) {
        CHECK(r.swap_stats.attempts[p] > 0);
        CHECK(r.swap_stats.accepts[p] == r.swap_stats.attempts[p]);
    }
}

TEST_CASE("samples do not depend on the number of threads")
{
    const SurvivalDataset d = small_dataset(50, 6);
    Mc3Config c = quick_config(100, 4);
    c.threads = 1;
    const FitResult a = run_mc3(d, make_promotion_spec(Family::weibull), {}, c);
    c.threads = 4;
    const FitResult b = run_mc3(d, make_promotion_spec(Family::weibull), {}, c);
    CHECK(a.samples == b.samples);
    CHECK(a.latent_draws == b.latent_draws);
    CHECK(a.swap_stats.accepts == b.swap_stats.accepts);
}

TEST_CASE("two chains at unit heat sample the same target as one chain")
{
    // Autocorrelated draws: compare posterior means against batch-means errors.
    const SurvivalDataset d = small_dataset(30, 7);
    const std::size_t cycles = 100000, burn = cycles / 10, batches = 50;
    Mc3Config one = quick_config(cycles, 1);
    one.sweeps_per_cycle = 1;
    Mc3Config two = one;
    two.n_chains = 2;
    two.temperatures = {1.0, 1.0};
    two.seed = 1234;
    const FitResult a = run_mc3(d, make_promotion_spec(Family::exponential), {}, one);
    const FitResult b = run_mc3(d, make_promotion_spec(Family::exponential), {}, two);
    const auto mean_and_se = [&](const FitResult& f, Eigen::Index col) {
        const std::size_t len = (cycles - burn) / batches;
        std::vector<double> means(batches, 0.0);
        for (std::size_t i = 0; i < batches; ++i)
            for (std::size_t t = 0; t < len; ++t)
                means[i] += f.samples(static_cast<Eigen::Index>(burn + i * len + t), col) / len;
        const Moments m = sample_moments(means);
        return std::pair{m.mean, std::sqrt(m.variance / batches)};
    };
    for (Eigen::Index col = 0; col < a.samples.cols(); ++col) {
        const auto [ma, sa] = mean_and_se(a, col);
        const auto [mb, sb] = mean_and_se(b, col);
        CAPTURE(a.column_names[static_cast<std::size_t>(col)]);
        CHECK(std::abs(ma - mb) <= 4.0 * std::hypot(sa, sb));
    }
}
