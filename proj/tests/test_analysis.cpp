#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "curemc3/analysis.hpp"
#include "curemc3/errors.hpp"
#include "curemc3/simulate.hpp"
#include "oracles.hpp"

using namespace curemc3;

namespace {

FitResult short_fit()
{
    SimulationConfig cfg;
    cfg.n = 80;
    cfg.seed = 8;
    cfg.spec = make_promotion_spec(Family::weibull);
    cfg.theta.gamma = 0.5;
    cfg.theta.lambda = 1.0;
    cfg.theta.alpha = {1.0, 1.2};
    cfg.theta.beta = {0.2, -0.4};
    cfg.numeric = {NumericCovariateGen{"x", NumericCovariateGen::Kind::normal, 0.0, 1.0}};
    const SimulatedData sim = simulate(cfg);
    Mc3Config mc;
    mc.mcmc_cycles = 300;
    mc.n_chains = 2;
    mc.sweeps_per_cycle = 2;
    mc.seed = 3;
    return run_mc3(sim.data, cfg.spec, {}, mc);
}

const FitResult& cached_fit()
{
    static const FitResult fit = short_fit();
    return fit;
}

}  // namespace

TEST_CASE("HPD interval documented cases")
{
    std::vector<double> s(10);
    std::iota(s.begin(), s.end(), 1.0);
    const Interval i = hpd_interval(s, 0.2);
    CHECK(i.low == 1.0);
    CHECK(i.high == 8.0);
    const std::vector<double> same(20, 5.0);
    CHECK(hpd_interval(same, 0.1).low == 5.0);
    CHECK(hpd_interval(same, 0.1).high == 5.0);
    const Interval full = hpd_interval(s, 1e-9);
    CHECK(full.low == 1.0);
    CHECK(full.high == 10.0);
    CHECK_THROWS_AS(hpd_interval(std::vector<double>(9, 1.0), 0.1), InsufficientSamples);
}

TEST_CASE("HPD interval is the shortest window holding enough draws")
{
    std::mt19937_64 rng(51);
    std::gamma_distribution<double> g(2.0, 1.0);
    for (int rep = 0; rep < 30; ++rep) {
        std::vector<double> s(37 + rep);
        for (double& v : s)
            v = g(rng);
        const double alpha = 0.05 + 0.01 * rep;
        const Interval iv = hpd_interval(s, alpha);
        std::vector<double> sorted = s;
        std::sort(sorted.begin(), sorted.end());
        const auto need = static_cast<std::size_t>(std::ceil((1.0 - alpha) * sorted.size() - 1e-9));
        const auto inside = std::count_if(s.begin(), s.end(),
                                          [&](double v) { return v >= iv.low && v <= iv.high; });
        CHECK(static_cast<std::size_t>(inside) >= need);
        for (std::size_t a = 0; a + need <= sorted.size(); ++a)
            CHECK(sorted[a + need - 1] - sorted[a] >= iv.high - iv.low);
    }
}

TEST_CASE("type-7 quantiles")
{
    const std::vector<double> s{4.0, 1.0, 3.0, 2.0};
    CHECK(sample_quantile(s, 0.0) == 1.0);
    CHECK(sample_quantile(s, 1.0) == 4.0);
    CHECK(sample_quantile(s, 0.5) == doctest::Approx(2.5));
    CHECK(sample_quantile(s, 0.25) == doctest::Approx(1.75));
}

TEST_CASE("FDR prefix rule")
{
    const std::vector<double> p{0.95, 0.90, 0.60};
    const auto d = fdr_discoveries(p, 0.1);
    CHECK(d == std::vector<std::size_t>{0, 1});
    CHECK(fdr_discoveries(std::vector<double>(5, 1.0), 0.0).size() == 5);
    CHECK(fdr_discoveries(std::vector<double>(5, 0.0), 0.5).empty());

    const std::vector<std::uint8_t> truth{1, 1, 0};
    const double q[] = {0.1};
    const auto e = evaluate_discoveries(truth, p, q);
    CHECK(e[0].declared == 2);
    CHECK(e[0].achieved_fdr == 0.0);
    CHECK(e[0].tpr == 1.0);

    const std::vector<double> perfect{1.0, 0.0, 1.0, 0.0};
    const std::vector<std::uint8_t> pt{1, 0, 1, 0};
    // Perfect probabilities stay error-free while q < 1/3; beyond that the
    // prefix rule admits zero-probability subjects.
    const double levels[] = {0.01, 0.2, 0.33};
    for (const auto& r : evaluate_discoveries(pt, perfect, levels)) {
        CHECK(r.achieved_fdr == 0.0);
        CHECK(r.tpr == 1.0);
    }
    const double loose[] = {0.5};
    CHECK(evaluate_discoveries(pt, perfect, loose)[0].achieved_fdr == 0.5);
    const double none[] = {0.1};
    const auto z = evaluate_discoveries(pt, std::vector<double>(4, 0.0), none);
    CHECK(z[0].declared == 0);
    CHECK(z[0].achieved_fdr == 0.0);
    CHECK(z[0].tpr == 0.0);
}

TEST_CASE("FDR discoveries are nested in q")
{
    std::mt19937_64 rng(53);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> p(40);
        for (double& v : p)
            v = u(rng);
        std::vector<std::size_t> prev;
        for (double q = 0.0; q <= 1.0; q += 0.05) {
            auto cur = fdr_discoveries(p, q);
            std::sort(cur.begin(), cur.end());
            CHECK(std::includes(cur.begin(), cur.end(), prev.begin(), prev.end()));
            prev = cur;
        }
    }
}

TEST_CASE("Kaplan-Meier documented values")
{
    const std::vector<double> t{1.0, 2.0, 3.0};
    const auto a = kaplan_meier(t, std::vector<std::uint8_t>{1, 1, 1});
    CHECK(a.survival[0] == doctest::Approx(2.0 / 3.0));
    CHECK(a.survival[1] == doctest::Approx(1.0 / 3.0));
    CHECK(a.survival[2] == 0.0);
    const auto b = kaplan_meier(t, std::vector<std::uint8_t>{1, 1, 0});
    CHECK(b.survival[2] == doctest::Approx(1.0 / 3.0));
    const auto c = kaplan_meier(t, std::vector<std::uint8_t>{0, 0, 0});
    for (double s : c.survival)
        CHECK(s == 1.0);
    CHECK(b.at(0.5) == 1.0);
    CHECK(b.at(2.5) == doctest::Approx(1.0 / 3.0));
    CHECK(b.cumulative_hazard(1.0) == doctest::Approx(std::log(1.5)));
}

TEST_CASE("Cox-Snell residuals")
{
    // gamma -> 0, vartheta = 4, exponential F = 0.5: S_P = e^-2.
    SurvivalDataset d;
    d.y = {std::log(2.0), 1e-12};
    d.delta = {1, 0};
    d.X = Eigen::MatrixXd::Ones(2, 1);
    Theta th;
    th.gamma = 0.0;
    th.lambda = 1.0;
    th.alpha = {1.0};
    th.beta = {std::log(4.0)};
    const auto r = cox_snell_residuals(d, th, make_promotion_spec(Family::exponential));
    CHECK(r[0] == doctest::Approx(2.0));
    CHECK(r[1] == doctest::Approx(0.0).scale(1.0));
    CHECK(r[1] < 1e-10);
    // Residuals stay below -log p0.
    CHECK(r[0] < -std::log(cure_rate(th, std::vector<double>{1.0}, make_promotion_spec(Family::exponential))));

    const auto diag = residual_diagnostic(r, d.delta);
    CHECK(diag.residual == r);
    CHECK(diag.km_cumulative_hazard.size() == 2);
}

TEST_CASE("cured posterior probabilities average the latent draws")
{
    const FitResult& fit = cached_fit();
    const std::size_t burn = default_burn(fit.cycles());
    CHECK(burn == 100);
    const auto p = cured_posterior_probabilities(fit, burn);
    REQUIRE(p.size() == fit.n_censored());
    for (std::size_t j = 0; j < p.size(); ++j) {
        double cured = 0.0;
        for (std::size_t t = burn; t < fit.cycles(); ++t)
            cured += 1.0 - fit.latent_draws[t * fit.n_censored() + j];
        CHECK(p[j] == doctest::Approx(cured / (fit.cycles() - burn)).epsilon(1e-15));
    }
}

TEST_CASE("summary report")
{
    const FitResult& fit = cached_fit();
    const SummaryReport rep = summarize(fit, 100, 0.1, 0.1, {0.05, 0.5, 0.95});
    CHECK(rep.retained == 200);
    CHECK(rep.parameters.size() == static_cast<std::size_t>(fit.samples.cols()));
    for (const auto& p : rep.parameters) {
        CHECK(p.hpd.low <= p.hpd.high);
        CHECK(p.quantiles.size() == 3);
        CHECK(p.quantiles[0] <= p.quantiles[1]);
        CHECK(p.quantiles[1] <= p.quantiles[2]);
    }
    CHECK(std::is_sorted(rep.discoveries.begin(), rep.discoveries.end()));
    CHECK_THROWS_AS(summarize(fit, 295, 0.1, 0.1, {}), InsufficientSamples);
}

TEST_CASE("predictions")
{
    const FitResult& fit = cached_fit();
    Eigen::MatrixXd rows(2, 2);
    rows << 1.0, -0.5, 1.0, 1.2;
    const double taus[] = {0.0, 0.5, 2.0};
    const PredictionTable tab = predict(fit, rows, taus, 0.1, 100);
    REQUIRE(tab.rows.size() == 6);
    for (const auto& r : tab.rows) {
        if (r.t == 0.0) {
            CHECK(r.survival.band.low == 1.0);
            CHECK(r.survival.band.high == 1.0);
            CHECK(r.cumulative_hazard.map == 0.0);
        }
        CHECK(r.survival.band.low <= r.survival.band.high);
        CHECK(r.cured_probability.map <= 1.0);
    }
    // Draw-wise identity H = -log S.
    for (std::size_t t = 100; t < fit.cycles(); ++t) {
        const Theta th = fit.draw(t);
        for (double tau : {0.3, 1.7}) {
            const auto p = predict_point(tau, th, std::vector<double>{1.0, 0.4}, fit.spec);
            CHECK(p.cumulative_hazard == doctest::Approx(-std::log(p.survival)).epsilon(1e-12));
        }
    }
    const auto far = predict_point(1e300, fit.map_estimate, std::vector<double>{1.0, 0.0}, fit.spec);
    CHECK(far.cured_probability == doctest::Approx(1.0).epsilon(1e-9));
    Eigen::MatrixXd wrong(1, 3);
    wrong.setOnes();
    CHECK_THROWS_AS(predict(fit, wrong, taus, 0.1, 100), SchemaMismatch);
}

TEST_CASE("predicting the training rows reproduces in-sample survival")
{
    SimulationConfig cfg;
    cfg.n = 80;
    cfg.seed = 8;
    cfg.spec = make_promotion_spec(Family::weibull);
    cfg.theta.gamma = 0.5;
    cfg.theta.lambda = 1.0;
    cfg.theta.alpha = {1.0, 1.2};
    cfg.theta.beta = {0.2, -0.4};
    cfg.numeric = {NumericCovariateGen{"x", NumericCovariateGen::Kind::normal, 0.0, 1.0}};
    const SimulatedData sim = simulate(cfg);
    const FitResult& fit = cached_fit();
    for (std::size_t i = 0; i < sim.data.n(); ++i) {
        const Eigen::MatrixXd row = sim.data.X.row(static_cast<Eigen::Index>(i));
        const double t[] = {sim.data.y[i]};
        const PredictionTable tab = predict(fit, row, t, 0.1, 100);
        CHECK(tab.rows[0].survival.map ==
              doctest::Approx(std::exp(-fit.residuals[i])).epsilon(1e-12));
    }
}
