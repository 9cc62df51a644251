#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "curemc3/errors.hpp"
#include "curemc3/model.hpp"
#include "curemc3/numeric.hpp"
#include "oracles.hpp"

using namespace curemc3;

namespace {

Theta make_theta(double gamma, double lambda, std::vector<double> beta, std::vector<double> alpha)
{
    Theta t;
    t.gamma = gamma;
    t.lambda = lambda;
    t.beta = std::move(beta);
    t.alpha = std::move(alpha);
    return t;
}

SurvivalDataset one_column(std::vector<double> y, std::vector<std::uint8_t> delta,
                           std::vector<double> x)
{
    SurvivalDataset d;
    d.y = std::move(y);
    d.delta = std::move(delta);
    d.X = Eigen::Map<Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    return d;
}

const PromotionSpec kExp = make_promotion_spec(Family::exponential);
const PromotionSpec kWeib = make_promotion_spec(Family::weibull);

}  // namespace

TEST_CASE("population survival documented values")
{
    // gamma = -1, lambda = 1, vartheta = e at F = 1: the cure rate vanishes.
    const Theta zero = make_theta(-1.0, 1.0, {1.0}, {1.0});
    const double x1[] = {1.0};
    CHECK(cure_rate(zero, x1, kExp) <= 1e-12);

    // F = 0 gives S_P = 1 for any theta.
    const Theta any = make_theta(0.7, 2.0, {0.3}, {1.2});
    CHECK(pop_survival(0.0, any, x1, kExp) == 1.0);

    // gamma = 1, lambda = 1, vartheta = 1 at F = 1: 1 / (1 + c).
    const Theta one = make_theta(1.0, 1.0, {0.0}, {1.0});
    const double ref = 1.0 / (1.0 + oracle::kC);
    CHECK(ref == doctest::Approx(0.4090537).epsilon(1e-6));
    CHECK(cure_rate(one, x1, kExp) == doctest::Approx(ref).epsilon(1e-14));
    CHECK(pop_survival(std::numeric_limits<double>::infinity(), one, x1, kExp) ==
          doctest::Approx(ref).epsilon(1e-14));

    // gamma -> 0 limit, vartheta = 1: p0 = e^-1.
    const Theta lim = make_theta(0.0, 1.0, {0.0}, {1.0});
    CHECK(cure_rate(lim, x1, kExp) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
}

TEST_CASE("population density documented value and finite differences")
{
    const Theta lim = make_theta(0.0, 1.0, {0.0}, {1.0});
    const double x1[] = {1.0};
    const double expected = std::exp(-1.0) * std::exp(-(1.0 - std::exp(-1.0)));
    CHECK(expected == doctest::Approx(0.1955150).epsilon(1e-6));
    CHECK(pop_density(1.0, lim, x1, kExp) == doctest::Approx(expected).epsilon(1e-13));

    // F = 0 with lambda > 1: the F^(lambda - 1) factor vanishes.
    const PointLogTerms t0 = point_log_terms(0.0, kNegInf, 0.0, 0.5, 2.0);
    CHECK(t0.log_dens == kNegInf);

    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> ug(-1.5, 1.5), ul(0.5, 2.0), ut(0.2, 3.0);
    int checked = 0;
    while (checked < 200) {
        const Theta th = make_theta(ug(rng), ul(rng), {ug(rng) * 0.5}, {ul(rng), ul(rng)});
        const double x[] = {1.0};
        const double t = ut(rng);
        double s_hi, s_lo, f;
        try {
            const double h = 1e-5 * std::max(1.0, t);
            s_hi = pop_survival(t + h, th, x, kWeib);
            s_lo = pop_survival(t - h, th, x, kWeib);
            f = pop_density(t, th, x, kWeib);
            if (f < 1e-8)
                continue;
            CHECK(f == doctest::Approx(-(s_hi - s_lo) / (2 * h)).epsilon(1e-5));
        } catch (const InvalidBase&) {
            continue;
        }
        ++checked;
    }
}

TEST_CASE("closed forms agree with the natural-scale oracle")
{
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> ug(-2.0, 2.0), ul(0.3, 3.0), ub(-1.0, 1.0),
        ut(0.05, 5.0);
    int checked = 0;
    while (checked < 500) {
        const Theta th = make_theta(ug(rng), ul(rng), {ub(rng), ub(rng)}, {ul(rng), ul(rng)});
        const double x[] = {1.0, ub(rng)};
        const double t = ut(rng);
        const double vt = std::exp(th.beta[0] + th.beta[1] * x[1]);
        const double a[] = {th.alpha[0], th.alpha[1]};
        const auto pf = oracle::promotion("weibull", t, a);
        const double base = 1.0 + th.gamma * vt * std::pow(oracle::kC, th.gamma * vt);
        if (th.gamma < 0.0 && base <= 1e-6)
            continue;
        CHECK(pop_survival(t, th, x, kWeib) ==
              doctest::Approx(oracle::pop_survival(th.gamma, th.lambda, vt, pf.F)).epsilon(1e-10));
        CHECK(cure_rate(th, x, kWeib) ==
              doctest::Approx(oracle::cure_rate(th.gamma, vt)).epsilon(1e-10));
        CHECK(pop_density(t, th, x, kWeib) ==
              doctest::Approx(oracle::pop_density(th.gamma, th.lambda, vt, pf.F, pf.f))
                  .epsilon(1e-9));
        ++checked;
    }
}

TEST_CASE("survival is monotone and bounded below by the cure rate")
{
    std::mt19937_64 rng(25);
    std::uniform_real_distribution<double> ug(-1.0, 2.0), ul(0.5, 2.0);
    for (int rep = 0; rep < 100; ++rep) {
        const Theta th = make_theta(ug(rng), ul(rng), {0.2 * ug(rng)}, {ul(rng), ul(rng)});
        const double x[] = {1.0};
        double p0;
        try {
            p0 = cure_rate(th, x, kWeib);
        } catch (const InvalidBase&) {
            continue;
        }
        double prev = 1.0;
        for (double t = 0.01; t < 100.0; t *= 1.5) {
            const double s = pop_survival(t, th, x, kWeib);
            CHECK(s <= prev);
            CHECK(s >= p0 * (1.0 - 1e-12));
            prev = s;
        }
    }
}

TEST_CASE("special-case reductions")
{
    std::mt19937_64 rng(27);
    std::uniform_real_distribution<double> ub(-0.3, 0.5), ut(0.05, 4.0), ua(0.5, 2.0);
    for (int rep = 0; rep < 200; ++rep) {
        const double b = ub(rng);
        const double x[] = {1.0};
        const double t = ut(rng);
        const double a[] = {ua(rng)};
        const double F = oracle::promotion("exponential", t, a).F;
        const double vt = std::exp(b);

        const Theta mix = make_theta(-1.0, 1.0, {b}, {a[0]});
        CHECK(pop_survival(t, mix, x, kExp) ==
              doctest::Approx(1.0 - vt * std::pow(oracle::kC, -vt) * F).epsilon(1e-13));

        const Theta ptm = make_theta(1e-11, 1.0, {b}, {a[0]});
        CHECK(std::abs(pop_survival(t, ptm, x, kExp) - std::exp(-vt * F)) <= 1e-8);
    }
}

TEST_CASE("susceptible survival and density")
{
    const Theta th = make_theta(0.5, 1.0, {0.2}, {1.3});
    const double x[] = {1.0};
    CHECK(susceptible_survival(0.0, th, x, kExp) == doctest::Approx(1.0));
    CHECK(susceptible_survival(std::numeric_limits<double>::infinity(), th, x, kExp) ==
          doctest::Approx(0.0).scale(1.0));
    for (double t : {0.1, 0.7, 2.0}) {
        const double p0 = cure_rate(th, x, kExp);
        const double sp = pop_survival(t, th, x, kExp);
        CHECK(susceptible_survival(t, th, x, kExp) == doctest::Approx((sp - p0) / (1 - p0)));
        CHECK(susceptible_density(t, th, x, kExp) ==
              doctest::Approx(pop_density(t, th, x, kExp) / (1 - p0)));
    }
    // vartheta -> 0 drives p0 to one.
    const Theta none = make_theta(0.0, 1.0, {-40.0}, {1.0});
    CHECK_THROWS_AS(susceptible_survival(1.0, none, x, kExp), DegenerateSusceptibles);
}

TEST_CASE("observed log-likelihood sums documented contributions")
{
    // Exponential promotion with gamma -> 0: log S_P = -vartheta F.
    const Theta th = make_theta(0.0, 1.0, {std::log(2.0)}, {1.0});
    // vartheta = 2 and F = 0.5 give log S_P = -1.
    const double y_half = std::log(2.0);
    const auto one = one_column({y_half}, {0}, {1.0});
    CHECK(observed_log_likelihood(one, th, kExp) == doctest::Approx(-1.0));

    const Theta th2 = make_theta(0.0, 1.0, {std::log(4.0)}, {1.0});
    const double y_quarter = -std::log(0.75);  // F = 0.25: log S = -1
    const double y_three_quarter = std::log(4.0);  // F = 0.75: log S = -3
    const auto two = one_column({y_quarter, y_three_quarter}, {0, 0}, {1.0, 1.0});
    CHECK(observed_log_likelihood(two, th2, kExp) == doctest::Approx(-4.0));

    // Log-space evaluation keeps far-tail events finite.
    const auto far_event = one_column({1e300}, {1}, {1.0});
    CHECK(std::isfinite(observed_log_likelihood(far_event, th, kExp)));
}

TEST_CASE("complete-data contributions and the marginalization identity")
{
    PointLogTerms t;
    t.log_cure = std::log(0.25);
    t.log_surv = std::log(0.6);
    CHECK(censored_contribution(t, 0) == doctest::Approx(std::log(0.25)));
    CHECK(std::exp(censored_contribution(t, 0)) + std::exp(censored_contribution(t, 1)) ==
          doctest::Approx(0.6).epsilon(1e-15));

    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> ug(-2.0, 2.0), ul(0.3, 3.0), ub(-1.0, 1.0);
    const auto ds = one_column({0.4, 1.1, 2.5, 0.9}, {1, 0, 0, 1}, {1.0, 1.0, 1.0, 1.0});
    int checked = 0;
    while (checked < 200) {
        const Theta th = make_theta(ug(rng), ul(rng), {ub(rng)}, {ul(rng), ul(rng)});
        const double ll = observed_log_likelihood(ds, th, kWeib);
        if (ll == kNegInf)
            continue;
        // Sum over the four latent configurations of the two censored subjects.
        double total = kNegInf;
        for (int a = 0; a < 2; ++a) {
            for (int b = 0; b < 2; ++b) {
                LatentStatus ls;
                ls.indices = {1, 2};
                ls.susceptible = {static_cast<std::uint8_t>(a), static_cast<std::uint8_t>(b)};
                total = log_add_exp(total, complete_log_likelihood(ds, th, ls, kWeib));
            }
        }
        CHECK(total == doctest::Approx(ll).epsilon(1e-12));
        // Event contributions equal log f_P.
        const double x[] = {1.0};
        LatentStatus all = LatentStatus::all_susceptible(ds);
        all.susceptible = {0, 0};
        const double expect = std::log(pop_density(0.4, th, x, kWeib)) +
                              std::log(pop_density(0.9, th, x, kWeib)) +
                              2.0 * std::log(cure_rate(th, x, kWeib));
        CHECK(complete_log_likelihood(ds, th, all, kWeib) == doctest::Approx(expect).epsilon(1e-12));
        ++checked;
    }
}

TEST_CASE("hazard, cumulative hazard and conditional cure probability")
{
    const Theta th = make_theta(0.8, 1.5, {0.1}, {1.0, 1.4});
    const double x[] = {1.0};
    CHECK(cumulative_hazard(0.0, th, x, kWeib) == 0.0);
    CHECK(conditional_cured_prob(0.0, th, x, kWeib) == doctest::Approx(cure_rate(th, x, kWeib)));
    CHECK(conditional_cured_prob(std::numeric_limits<double>::infinity(), th, x, kWeib) ==
          doctest::Approx(1.0));
    double prev = 0.0;
    for (double t : {0.2, 0.5, 1.0, 2.0, 4.0}) {
        const double s = pop_survival(t, th, x, kWeib);
        CHECK(cumulative_hazard(t, th, x, kWeib) == doctest::Approx(-std::log(s)));
        CHECK(hazard(t, th, x, kWeib) == doctest::Approx(pop_density(t, th, x, kWeib) / s));
        const double c = conditional_cured_prob(t, th, x, kWeib);
        CHECK(c >= prev);
        prev = c;
    }
    // S_P = e^-2 gives H_P = 2: gamma -> 0, vartheta = 4, F = 0.5.
    const Theta h2 = make_theta(0.0, 1.0, {std::log(4.0)}, {1.0});
    CHECK(cumulative_hazard(std::log(2.0), h2, x, kExp) == doctest::Approx(2.0));
}

TEST_CASE("the base stays inside the support for negative gamma")
{
    // |gamma| vartheta c^(gamma vartheta) F^lambda peaks at 1 when |gamma| vartheta = e.
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> ug(-3.0, -1e-3), ueta(-4.0, 6.0), ulf(-5.0, 0.0);
    for (int i = 0; i < 2000; ++i) {
        const double g = ug(rng);
        const PointLogTerms t = point_log_terms(ueta(rng), ulf(rng), -1.0, g, 1.5);
        CHECK(t.valid);
        CHECK(t.log_cure <= 0.0);
    }
    const double x[] = {1.0};
    for (double g : {-0.5, -1.0, -2.0}) {
        const Theta peak = make_theta(g, 1.0, {std::log(std::exp(1.0) / -g)}, {1.0});
        CHECK(cure_rate(peak, x, kExp) <= 1e-12);
        CHECK(pop_survival(1.0, peak, x, kExp) > 0.0);
    }
}

TEST_CASE("rescaling time leaves the exponential-family likelihood invariant")
{
    std::mt19937_64 rng(31);
    std::exponential_distribution<double> ey(0.7);
    std::bernoulli_distribution bd(0.6);
    SurvivalDataset d;
    for (int i = 0; i < 40; ++i) {
        d.y.push_back(ey(rng));
        d.delta.push_back(bd(rng) ? 1 : 0);
    }
    d.X = Eigen::MatrixXd::Ones(40, 1);
    const double s = 3.5;
    SurvivalDataset scaled = d;
    for (double& v : scaled.y)
        v *= s;
    const Theta th = make_theta(0.6, 1.2, {0.1}, {0.9});
    const Theta ths = make_theta(0.6, 1.2, {0.1}, {0.9 / s});
    const double a = observed_log_likelihood(d, th, kExp);
    const double b = observed_log_likelihood(scaled, ths, kExp) +
                     static_cast<double>(d.n_events()) * std::log(s);
    CHECK(b == doctest::Approx(a).epsilon(1e-12));
}

TEST_CASE("theta and dataset validation")
{
    const Theta ok = make_theta(0.1, 1.0, {0.0}, {1.0, 1.0});
    CHECK_NOTHROW(validate_theta(ok, kWeib, 1));
    CHECK_THROWS_AS(validate_theta(ok, kWeib, 2), DomainError);
    Theta neg = ok;
    neg.lambda = 0.0;
    CHECK_THROWS_AS(validate_theta(neg, kWeib, 1), DomainError);

    auto d = one_column({1.0, 2.0}, {1, 0}, {1.0, 1.0});
    CHECK_NOTHROW(d.validate());
    d.delta[1] = 2;
    CHECK_THROWS_AS(d.validate(), DataError);
    SurvivalDataset empty;
    empty.X = Eigen::MatrixXd(0, 1);
    CHECK_THROWS_AS(empty.validate(), EmptyDataset);
    CHECK_NOTHROW(empty.validate(true));
    CHECK_FALSE(has_varying_covariate(one_column({1.0, 2.0}, {1, 1}, {1.0, 1.0})));
}
