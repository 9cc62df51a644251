#include "curemc3/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "curemc3/errors.hpp"
#include "curemc3/numeric.hpp"

namespace curemc3 {

Interval hpd_interval(std::span<const double> samples, double alpha)
{
    if (samples.size() < 10)
        throw InsufficientSamples("HPD interval needs at least 10 draws, got " +
                                  std::to_string(samples.size()));
    if (!(alpha > 0.0 && alpha < 1.0))
        throw DomainError("HPD level alpha must lie in (0, 1)");
    std::vector<double> s(samples.begin(), samples.end());
    std::sort(s.begin(), s.end());
    const std::size_t m = s.size();
    // Guard against (1 - alpha) * m landing a hair above an integer.
    auto w = static_cast<std::size_t>(std::ceil((1.0 - alpha) * static_cast<double>(m) - 1e-9));
    w = std::clamp<std::size_t>(w, 1, m);
    std::size_t best = 0;
    double best_width = s[w - 1] - s[0];
    for (std::size_t i = 1; i + w <= m; ++i) {
        const double width = s[i + w - 1] - s[i];
        if (width < best_width) {
            best_width = width;
            best = i;
        }
    }
    return {s[best], s[best + w - 1]};
}

double sample_quantile(std::span<const double> samples, double p)
{
    if (samples.empty())
        throw InsufficientSamples("quantile of an empty sample");
    if (!(p >= 0.0 && p <= 1.0))
        throw DomainError("quantile level must lie in [0, 1]");
    std::vector<double> s(samples.begin(), samples.end());
    std::sort(s.begin(), s.end());
    const double h = (static_cast<double>(s.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, s.size() - 1);
    return s[lo] + (h - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

std::vector<std::size_t> fdr_discoveries(std::span<const double> cured_probs, double q)
{
    std::vector<std::size_t> order(cured_probs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return cured_probs[a] > cured_probs[b]; });
    double running = 0.0;
    std::size_t declared = 0;
    for (std::size_t k = 0; k < order.size(); ++k) {
        running += 1.0 - cured_probs[order[k]];
        if (running / static_cast<double>(k + 1) <= q)
            declared = k + 1;
    }
    order.resize(declared);
    return order;
}

std::vector<FdrTpr> evaluate_discoveries(std::span<const std::uint8_t> true_cured,
                                         std::span<const double> cured_probs,
                                         std::span<const double> levels)
{
    if (true_cured.size() != cured_probs.size())
        throw DomainError("evaluate_discoveries: status and probability vectors differ in length");
    const auto positives =
        static_cast<std::size_t>(std::count(true_cured.begin(), true_cured.end(), std::uint8_t{1}));
    std::vector<FdrTpr> out;
    for (double q : levels) {
        const std::vector<std::size_t> found = fdr_discoveries(cured_probs, q);
        std::size_t tp = 0;
        for (std::size_t i : found)
            tp += true_cured[i] ? 1 : 0;
        FdrTpr r;
        r.level = q;
        r.declared = found.size();
        r.achieved_fdr = static_cast<double>(found.size() - tp) /
                         static_cast<double>(std::max<std::size_t>(1, found.size()));
        r.tpr = positives == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(positives);
        out.push_back(r);
    }
    return out;
}

namespace {

std::vector<double> row_of(const Eigen::MatrixXd& X, std::size_t i)
{
    std::vector<double> x(static_cast<std::size_t>(X.cols()));
    for (std::size_t j = 0; j < x.size(); ++j)
        x[j] = X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    return x;
}

}  // namespace

std::vector<double> cox_snell_residuals(const SurvivalDataset& data, const Theta& theta,
                                        const PromotionSpec& spec)
{
    std::vector<double> r(data.n());
    for (std::size_t i = 0; i < data.n(); ++i) {
        const double s = pop_survival(data.y[i], theta, row_of(data.X, i), spec);
        if (s < 1e-300)
            throw DegenerateSurvival("population survival is zero at observation " +
                                     std::to_string(i + 1));
        r[i] = -std::log(s);
    }
    return r;
}

double KaplanMeier::at(double t) const
{
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin())
        return 1.0;
    return survival[static_cast<std::size_t>(it - times.begin()) - 1];
}

double KaplanMeier::cumulative_hazard(double t) const
{
    const double s = at(t);
    return s > 0.0 ? -std::log(s) : std::numeric_limits<double>::infinity();
}

KaplanMeier kaplan_meier(std::span<const double> times, std::span<const std::uint8_t> status)
{
    if (times.size() != status.size())
        throw DomainError("kaplan_meier: times and status differ in length");
    std::vector<std::size_t> order(times.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });
    KaplanMeier km;
    double s = 1.0;
    std::size_t at_risk = times.size();
    std::size_t pos = 0;
    while (pos < order.size()) {
        const double t = times[order[pos]];
        std::size_t events = 0;
        std::size_t ties = 0;
        while (pos < order.size() && times[order[pos]] == t) {
            events += status[order[pos]] ? 1 : 0;
            ++ties;
            ++pos;
        }
        s *= 1.0 - static_cast<double>(events) / static_cast<double>(at_risk);
        at_risk -= ties;
        km.times.push_back(t);
        km.survival.push_back(s);
    }
    return km;
}

ResidualDiagnostic residual_diagnostic(std::span<const double> residuals,
                                       std::span<const std::uint8_t> status)
{
    const KaplanMeier km = kaplan_meier(residuals, status);
    ResidualDiagnostic d;
    d.residual.assign(residuals.begin(), residuals.end());
    d.status.assign(status.begin(), status.end());
    d.km_cumulative_hazard.reserve(residuals.size());
    for (double r : residuals)
        d.km_cumulative_hazard.push_back(km.cumulative_hazard(r));
    return d;
}

std::size_t default_burn(std::size_t cycles) noexcept
{
    return cycles / 3;
}

std::vector<double> cured_posterior_probabilities(const FitResult& fit, std::size_t burn)
{
    const std::size_t cycles = fit.cycles();
    if (burn >= cycles)
        throw InsufficientSamples("burn-in leaves no retained draws");
    const std::size_t m = fit.n_censored();
    std::vector<double> cured(m, 0.0);
    for (std::size_t t = burn; t < cycles; ++t) {
        for (std::size_t j = 0; j < m; ++j)
            cured[j] += fit.latent(t, j) ? 0.0 : 1.0;
    }
    const auto retained = static_cast<double>(cycles - burn);
    for (double& c : cured)
        c /= retained;
    return cured;
}

SummaryReport summarize(const FitResult& fit, std::size_t burn, double alpha, double fdr_level,
                        std::vector<double> quantile_levels)
{
    const std::size_t cycles = fit.cycles();
    if (burn >= cycles || cycles - burn < 10)
        throw InsufficientSamples("need at least 10 draws after burn-in, have " +
                                  std::to_string(cycles > burn ? cycles - burn : 0));
    SummaryReport rep;
    rep.burn = burn;
    rep.retained = cycles - burn;
    rep.alpha = alpha;
    rep.fdr_level = fdr_level;
    rep.quantile_levels = std::move(quantile_levels);
    const std::vector<double> map_row = theta_to_row(fit.map_estimate);
    std::vector<double> column(rep.retained);
    for (Eigen::Index c = 0; c < fit.samples.cols(); ++c) {
        for (std::size_t t = 0; t < rep.retained; ++t)
            column[t] = fit.samples(static_cast<Eigen::Index>(burn + t), c);
        ParameterSummary p;
        p.name = fit.column_names[static_cast<std::size_t>(c)];
        p.map = map_row[static_cast<std::size_t>(c)];
        p.mean = sample_moments(column).mean;
        p.hpd = hpd_interval(column, alpha);
        for (double q : rep.quantile_levels)
            p.quantiles.push_back(sample_quantile(column, q));
        rep.parameters.push_back(std::move(p));
    }
    rep.censored_indices = fit.censored_indices;
    rep.cured_posterior_prob = cured_posterior_probabilities(fit, burn);
    for (std::size_t j : fdr_discoveries(rep.cured_posterior_prob, fdr_level))
        rep.discoveries.push_back(fit.censored_indices[j]);
    std::sort(rep.discoveries.begin(), rep.discoveries.end());
    return rep;
}

PointPrediction predict_point(double t, const Theta& theta, std::span<const double> x,
                              const PromotionSpec& spec)
{
    if (!(t >= 0.0))
        throw DomainError("prediction time must be >= 0");
    const double eta = linear_predictor(theta, x);
    // Right limit at t = 0: F = 0 and the density taken at the smallest positive time.
    const double y = t > 0.0 ? t : std::numeric_limits<double>::min();
    LogDensityCdf pt = evaluate(spec, y, theta.alpha);
    if (t == 0.0)
        pt.log_F = kNegInf;
    const PointLogTerms terms = point_log_terms(eta, pt.log_F, pt.log_f, theta.gamma, theta.lambda);
    if (!terms.valid)
        throw InvalidBase("prediction draw lies outside the model support");
    PointPrediction p;
    p.survival = std::exp(terms.log_surv);
    p.cumulative_hazard = -terms.log_surv;
    p.hazard = std::exp(terms.log_dens - terms.log_surv);
    p.cured_probability = std::min(1.0, std::exp(terms.log_cure - terms.log_surv));
    return p;
}

PredictionTable predict(const FitResult& fit, const Eigen::MatrixXd& newdata,
                        std::span<const double> tau_values, double alpha, std::size_t burn)
{
    const std::size_t k = static_cast<std::size_t>(fit.samples.cols()) - 2 - fit.spec.alpha_size();
    if (static_cast<std::size_t>(newdata.cols()) != k)
        throw SchemaMismatch("prediction rows have " + std::to_string(newdata.cols()) +
                             " design columns, the fit has " + std::to_string(k));
    const std::size_t cycles = fit.cycles();
    if (burn >= cycles || cycles - burn < 10)
        throw InsufficientSamples("need at least 10 draws after burn-in for prediction bands");
    const std::size_t m = cycles - burn;
    std::vector<Theta> draws;
    draws.reserve(m);
    for (std::size_t t = burn; t < cycles; ++t)
        draws.push_back(fit.draw(t));

    PredictionTable table;
    table.alpha = alpha;
    std::vector<double> s(m), H(m), h(m), cp(m);
    auto fill = [&](PredictedValue& v, double map_value, const std::vector<double>& values) {
        v.map = map_value;
        v.mean = sample_moments(values).mean;
        v.band = hpd_interval(values, alpha);
    };
    for (Eigen::Index r = 0; r < newdata.rows(); ++r) {
        const std::vector<double> x = row_of(newdata, static_cast<std::size_t>(r));
        for (double t : tau_values) {
            for (std::size_t d = 0; d < m; ++d) {
                const PointPrediction p = predict_point(t, draws[d], x, fit.spec);
                s[d] = p.survival;
                H[d] = p.cumulative_hazard;
                h[d] = p.hazard;
                cp[d] = p.cured_probability;
            }
            const PointPrediction at_map = predict_point(t, fit.map_estimate, x, fit.spec);
            PredictionRow row;
            row.row = static_cast<std::size_t>(r);
            row.t = t;
            fill(row.survival, at_map.survival, s);
            fill(row.cumulative_hazard, at_map.cumulative_hazard, H);
            fill(row.hazard, at_map.hazard, h);
            fill(row.cured_probability, at_map.cured_probability, cp);
            table.rows.push_back(row);
        }
    }
    return table;
}

}  // namespace curemc3
