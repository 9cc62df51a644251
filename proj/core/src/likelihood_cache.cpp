#include "likelihood_cache.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "curemc3/numeric.hpp"
#include "vmath.hpp"

namespace curemc3::detail {

namespace {

struct RowConsts
{
    bool limit = false;
    double gamma = 0.0;
    double inv_gamma = 0.0;
    double log_abs_gamma = 0.0;
    double lambda = 1.0;
    double log_lambda = 0.0;
    double dens_coef = 1.0;  // (1 + gamma) multiplies log S_P in log f_P
};

RowConsts make_consts(double gamma, double lambda)
{
    RowConsts c;
    c.limit = std::abs(gamma) <= kGammaLimitTol;
    c.gamma = gamma;
    c.lambda = lambda;
    c.log_lambda = std::log(lambda);
    if (!c.limit) {
        c.inv_gamma = 1.0 / gamma;
        c.log_abs_gamma = std::log(std::abs(gamma));
        c.dens_coef = 1.0 + gamma;
    }
    return c;
}

/// Row-aligned views of the arrays one kernel pass reads and writes.
struct Block
{
    std::size_t n = 0;
    double* eta = nullptr;
    double* vartheta = nullptr;
    double* log_A = nullptr;
    double* log_cure = nullptr;
    const double* log_F = nullptr;
    const double* log_f = nullptr;
    double* log_surv = nullptr;
    double* log_sus = nullptr;
    const std::uint8_t* event = nullptr;
};

Block whole(LikelihoodCache::Arrays& arr, const CacheContext& ctx)
{
    return {ctx.n,
            arr.eta.data(),
            arr.vartheta.data(),
            arr.log_A.data(),
            arr.log_cure.data(),
            arr.log_F.data(),
            arr.log_f.data(),
            arr.log_surv.data(),
            arr.log_sus.data(),
            ctx.event.data()};
}

/// log|A| and log p0. Returns false when the base leaves the support.
bool base_block(const RowConsts& c, const Block& b, LikelihoodCache::Work& w)
{
    const std::size_t n = b.n;
    if (c.limit) {
        for (std::size_t i = 0; i < n; ++i) {
            b.log_A[i] = b.eta[i];
            b.log_cure[i] = -b.vartheta[i];
        }
        return true;
    }
    const double scale = c.gamma * kLogC;
    for (std::size_t i = 0; i < n; ++i)
        b.log_A[i] = c.log_abs_gamma + b.eta[i] + scale * b.vartheta[i];
    const std::span<double> s(w.s.data(), n);
    const std::span<double> t(w.t.data(), n);
    bool ok = true;
    if (c.gamma > 0.0) {
        vlog1pexp(std::span<const double>(b.log_A, n), t);
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            ok = ok && !(b.log_A[i] > 0.0);
            s[i] = std::min(b.log_A[i], 0.0);
        }
        vlog1mexp(s, t);
    }
    for (std::size_t i = 0; i < n; ++i)
        b.log_cure[i] = -t[i] * c.inv_gamma;
    return ok;
}

/// log S_P and log_sus from log|A|, log p0 and the promotion terms.
void surv_block(const RowConsts& c, const Block& b, LikelihoodCache::Work& w)
{
    const std::size_t n = b.n;
    const bool unit_lambda = c.lambda == 1.0;
    const double lm1 = c.lambda - 1.0;
    const double scale = c.limit ? 0.0 : c.gamma * kLogC;
    const std::span<double> s(w.s.data(), n);
    const std::span<double> t(w.t.data(), n);
    for (std::size_t i = 0; i < n; ++i)
        s[i] = b.log_A[i] + (unit_lambda ? b.log_F[i] : c.lambda * b.log_F[i]);
    if (c.limit) {
        vexp(s, t);
        for (std::size_t i = 0; i < n; ++i)
            b.log_surv[i] = -t[i];
    } else {
        if (c.gamma > 0.0) {
            vlog1pexp(s, t);
        } else {
            for (std::size_t i = 0; i < n; ++i)
                s[i] = std::min(s[i], 0.0);
            vlog1mexp(s, t);
        }
        for (std::size_t i = 0; i < n; ++i)
            b.log_surv[i] = -t[i] * c.inv_gamma;
    }
    // Censored rows need log(S_P - p0) = log S_P + log(1 - p0 / S_P); compact
    // them so the transcendental pass skips event rows.
    std::size_t m = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (std::isnan(b.log_surv[i]))
            b.log_surv[i] = kNegInf;
        if (!b.event[i])
            s[m++] = b.log_cure[i] - b.log_surv[i];
    }
    vlog1mexp(s.first(m), t.first(m));
    std::size_t r = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double ls = b.log_surv[i];
        double sus;
        if (b.event[i]) {
            sus = b.eta[i] + scale * b.vartheta[i] + c.log_lambda + b.log_f[i];
            if (!unit_lambda)
                sus += lm1 * b.log_F[i];
            if (c.dens_coef != 0.0)
                sus += c.dens_coef * ls;
            if (std::isnan(sus))
                sus = kNegInf;
        } else {
            const double d = s[r];
            const double tail = t[r];
            ++r;
            if (b.log_cure[i] == kNegInf)
                sus = ls;
            else if (!(d < 0.0))
                sus = kNegInf;
            else
                sus = ls + tail;
        }
        b.log_sus[i] = sus;
    }
}

void copy_rows(std::vector<double>& to, const std::vector<double>& from, bool all_rows,
               std::span<const std::size_t> rows)
{
    if (all_rows) {
        if (!to.empty())
            std::memcpy(to.data(), from.data(), to.size() * sizeof(double));
    } else {
        for (std::size_t i : rows)
            to[i] = from[i];
    }
}

double full_compute(const CacheContext& ctx, const LikelihoodCache::Params& p,
                    LikelihoodCache::Arrays& arr, LikelihoodCache::Work& work)
{
    const std::size_t n = ctx.n;
    if (n == 0)
        return 0.0;
    evaluate_batch(ctx.spec, ctx.data->y, ctx.log_y, p.alpha, arr.log_f, arr.log_F);
    Eigen::Map<Eigen::VectorXd> eta(arr.eta.data(), static_cast<Eigen::Index>(n));
    const Eigen::Map<const Eigen::VectorXd> beta(p.beta.data(),
                                                 static_cast<Eigen::Index>(p.beta.size()));
    eta.noalias() = ctx.data->X * beta;
    vexp(arr.eta, arr.vartheta);
    const RowConsts c = make_consts(p.gamma, p.lambda);
    const Block b = whole(arr, ctx);
    if (!base_block(c, b, work))
        return kNegInf;
    surv_block(c, b, work);
    return 0.0;
}

double sum_with(const CacheContext& ctx, const std::vector<std::uint8_t>& indicator,
                const LikelihoodCache::Arrays& arr) noexcept
{
    double total = 0.0;
    for (std::size_t i = 0; i < ctx.n; ++i)
        total += indicator[i] ? arr.log_sus[i] : arr.log_cure[i];
    return std::isnan(total) ? kNegInf : total;
}

}  // namespace

CacheContext::CacheContext(const SurvivalDataset& d, PromotionSpec s)
    : data(&d), spec(std::move(s)), n(d.n()), k(d.k())
{
    log_y.resize(n);
    event.assign(d.delta.begin(), d.delta.end());
    for (std::size_t i = 0; i < n; ++i)
        log_y[i] = std::log(d.y[i]);
    censored = d.censored_indices();
    nonzero.resize(k);
    dense_column.resize(k);
    for (std::size_t j = 0; j < k; ++j) {
        for (std::size_t i = 0; i < n; ++i) {
            if (d.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) != 0.0)
                nonzero[j].push_back(i);
        }
        dense_column[j] = nonzero[j].size() * 10 >= n * 9;
    }
}

void LikelihoodCache::Arrays::resize(std::size_t n)
{
    for (auto* v : {&eta, &vartheta, &log_A, &log_F, &log_f, &log_cure, &log_surv, &log_sus})
        v->assign(n, 0.0);
}

void LikelihoodCache::Work::resize(std::size_t n)
{
    s.assign(n, 0.0);
    t.assign(n, 0.0);
    gathered.resize(n);
    event.assign(n, 0);
}

LikelihoodCache::LikelihoodCache(const CacheContext& ctx) : ctx_(&ctx)
{
    a_.resize(ctx.n);
    t_.resize(ctx.n);
    work_.resize(ctx.n);
    indicator_.assign(ctx.n, 1);
}

double LikelihoodCache::sum_terms(const Arrays& arr) const noexcept
{
    return sum_with(*ctx_, indicator_, arr);
}

void LikelihoodCache::reset(const Theta& theta, const LatentStatus& latent)
{
    pending_ = 0;
    cur_ = Params{theta.alpha, theta.beta, theta.gamma, theta.lambda};
    std::fill(indicator_.begin(), indicator_.end(), std::uint8_t{1});
    for (std::size_t j = 0; j < latent.indices.size(); ++j)
        indicator_[latent.indices[j]] = latent.susceptible[j];
    const double status = full_compute(*ctx_, cur_, a_, work_);
    total_ = status == kNegInf ? kNegInf : sum_terms(a_);
    t_ = a_;
}

double LikelihoodCache::observed() const noexcept
{
    double total = 0.0;
    for (std::size_t i = 0; i < ctx_->n; ++i)
        total += ctx_->event[i] ? a_.log_sus[i] : a_.log_surv[i];
    return std::isnan(total) ? kNegInf : total;
}

void LikelihoodCache::sync(Arrays& to, const Arrays& from, unsigned touched, bool all_rows) const
{
    const std::span<const std::size_t> rows =
        all_rows ? std::span<const std::size_t>()
                 : std::span<const std::size_t>(ctx_->nonzero[pending_column_]);
    if (touched & touch_eta) {
        copy_rows(to.eta, from.eta, all_rows, rows);
        copy_rows(to.vartheta, from.vartheta, all_rows, rows);
    }
    if (touched & touch_base) {
        copy_rows(to.log_A, from.log_A, all_rows, rows);
        copy_rows(to.log_cure, from.log_cure, all_rows, rows);
    }
    if (touched & touch_promotion) {
        copy_rows(to.log_F, from.log_F, all_rows, rows);
        copy_rows(to.log_f, from.log_f, all_rows, rows);
    }
    if (touched & touch_surv) {
        copy_rows(to.log_surv, from.log_surv, all_rows, rows);
        copy_rows(to.log_sus, from.log_sus, all_rows, rows);
    }
}

void LikelihoodCache::discard()
{
    if (pending_ != 0)
        sync(t_, a_, pending_, pending_all_rows_);
    pending_ = 0;
}

void LikelihoodCache::accept()
{
    if (pending_ == 0)
        return;
    sync(a_, t_, pending_, pending_all_rows_);
    cur_ = trial_;
    total_ = trial_total_;
    pending_ = 0;
}

void LikelihoodCache::checkpoint()
{
    discard();
    saved_ = a_;
    saved_params_ = cur_;
    saved_total_ = total_;
}

void LikelihoodCache::rollback()
{
    pending_ = 0;
    a_ = saved_;
    t_ = saved_;
    cur_ = saved_params_;
    total_ = saved_total_;
}

double LikelihoodCache::trial_gamma(double gamma)
{
    discard();
    trial_ = cur_;
    trial_.gamma = gamma;
    pending_ = touch_base | touch_surv;
    pending_all_rows_ = true;
    const RowConsts c = make_consts(gamma, trial_.lambda);
    const Block b = whole(t_, *ctx_);
    if (!base_block(c, b, work_))
        return trial_total_ = kNegInf;
    surv_block(c, b, work_);
    return trial_total_ = sum_terms(t_);
}

double LikelihoodCache::trial_lambda(double lambda)
{
    discard();
    trial_ = cur_;
    trial_.lambda = lambda;
    pending_ = touch_surv;
    pending_all_rows_ = true;
    surv_block(make_consts(trial_.gamma, lambda), whole(t_, *ctx_), work_);
    return trial_total_ = sum_terms(t_);
}

double LikelihoodCache::trial_alpha(std::span<const double> alpha)
{
    discard();
    trial_ = cur_;
    trial_.alpha.assign(alpha.begin(), alpha.end());
    pending_ = touch_promotion | touch_surv;
    pending_all_rows_ = true;
    if (ctx_->n == 0)
        return trial_total_ = 0.0;
    evaluate_batch(ctx_->spec, ctx_->data->y, ctx_->log_y, trial_.alpha, t_.log_f, t_.log_F);
    surv_block(make_consts(trial_.gamma, trial_.lambda), whole(t_, *ctx_), work_);
    return trial_total_ = sum_terms(t_);
}

double LikelihoodCache::trial_beta(std::size_t j, double value)
{
    discard();
    trial_ = cur_;
    const double delta = value - cur_.beta[j];
    trial_.beta[j] = value;
    pending_ = touch_eta | touch_base | touch_surv;
    pending_column_ = j;
    pending_all_rows_ = ctx_->dense_column[j];
    const auto col = ctx_->data->X.col(static_cast<Eigen::Index>(j));
    const RowConsts c = make_consts(trial_.gamma, trial_.lambda);

    if (pending_all_rows_) {
        for (std::size_t i = 0; i < ctx_->n; ++i)
            t_.eta[i] = a_.eta[i] + delta * col(static_cast<Eigen::Index>(i));
        vexp(t_.eta, t_.vartheta);
        const Block b = whole(t_, *ctx_);
        if (!base_block(c, b, work_))
            return trial_total_ = kNegInf;
        surv_block(c, b, work_);
        return trial_total_ = sum_terms(t_);
    }

    // Sparse column: gather the touched rows, run the same kernels, scatter back.
    const std::vector<std::size_t>& rows = ctx_->nonzero[j];
    const std::size_t m = rows.size();
    Arrays& g = work_.gathered;
    for (std::size_t r = 0; r < m; ++r) {
        const std::size_t i = rows[r];
        g.eta[r] = a_.eta[i] + delta * col(static_cast<Eigen::Index>(i));
        g.log_F[r] = a_.log_F[i];
        g.log_f[r] = a_.log_f[i];
        work_.event[r] = ctx_->event[i];
    }
    vexp(std::span<const double>(g.eta.data(), m), std::span<double>(g.vartheta.data(), m));
    const Block b{m,
                  g.eta.data(),
                  g.vartheta.data(),
                  g.log_A.data(),
                  g.log_cure.data(),
                  g.log_F.data(),
                  g.log_f.data(),
                  g.log_surv.data(),
                  g.log_sus.data(),
                  work_.event.data()};
    const bool ok = base_block(c, b, work_);
    if (ok)
        surv_block(c, b, work_);
    for (std::size_t r = 0; r < m; ++r) {
        const std::size_t i = rows[r];
        t_.eta[i] = g.eta[r];
        t_.vartheta[i] = g.vartheta[r];
        t_.log_A[i] = g.log_A[r];
        t_.log_cure[i] = g.log_cure[r];
        t_.log_surv[i] = g.log_surv[r];
        t_.log_sus[i] = g.log_sus[r];
    }
    if (!ok)
        return trial_total_ = kNegInf;
    return trial_total_ = sum_terms(t_);
}

double LikelihoodCache::trial_full(const Theta& theta)
{
    discard();
    trial_ = Params{theta.alpha, theta.beta, theta.gamma, theta.lambda};
    pending_ = touch_eta | touch_base | touch_promotion | touch_surv;
    pending_all_rows_ = true;
    const double status = full_compute(*ctx_, trial_, t_, work_);
    return trial_total_ = status == kNegInf ? kNegInf : sum_terms(t_);
}

double LikelihoodCache::evaluate(const Theta& theta) const
{
    Arrays scratch;
    scratch.resize(ctx_->n);
    Work work;
    work.resize(ctx_->n);
    const Params p{theta.alpha, theta.beta, theta.gamma, theta.lambda};
    if (full_compute(*ctx_, p, scratch, work) == kNegInf)
        return kNegInf;
    return sum_terms(scratch);
}

void LikelihoodCache::refresh_total() noexcept
{
    total_ = sum_terms(a_);
}

}  // namespace curemc3::detail
