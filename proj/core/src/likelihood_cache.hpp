#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "curemc3/model.hpp"
#include "curemc3/promotion.hpp"

namespace curemc3::detail {

/// Per-dataset constants shared by every chain of a fit.
struct CacheContext
{
    CacheContext(const SurvivalDataset& data, PromotionSpec spec);

    const SurvivalDataset* data;
    PromotionSpec spec;
    std::size_t n = 0;
    std::size_t k = 0;
    std::vector<double> log_y;
    std::vector<std::uint8_t> event;                // delta
    std::vector<std::size_t> censored;              // indices with delta = 0
    std::vector<std::vector<std::size_t>> nonzero;  // rows with X(i, j) != 0, per column
    std::vector<bool> dense_column;                 // column is worth a full pass
};

/// Complete-data log-likelihood with per-subject terms kept in structure-of-
/// arrays form, so that a single-coordinate move only recomputes what the
/// coordinate touches.
///
/// Per subject i the cache holds eta, vartheta = e^eta, log|A| (eta itself in
/// the gamma -> 0 limit), log F, log f, log p0, log S_P and log_sus, which is
/// log f_P for events and log(S_P - p0) for censored subjects. The complete
/// log-likelihood is sum_i (I_i ? log_sus_i : log p0_i).
///
/// Trials write into a shadow copy; accept() commits the most recent trial and
/// any later trial (or Gibbs update) discards it.
class LikelihoodCache
{
public:
    explicit LikelihoodCache(const CacheContext& ctx);

    /// Recomputes everything for theta and the indicators of `latent`.
    void reset(const Theta& theta, const LatentStatus& latent);

    double total() const noexcept { return total_; }
    /// Observed-data log-likelihood of the committed state.
    double observed() const noexcept;

    double trial_gamma(double gamma);
    double trial_lambda(double lambda);
    double trial_alpha(std::span<const double> alpha);
    double trial_beta(std::size_t j, double value);
    double trial_full(const Theta& theta);
    void accept();
    void discard();
    /// Saves the committed state; rollback() returns to it.
    void checkpoint();
    void rollback();

    /// Complete log-likelihood at theta with the committed indicators; leaves
    /// the cache untouched.
    double evaluate(const Theta& theta) const;

    std::size_t n_censored() const noexcept { return ctx_->censored.size(); }
    /// log p0 and log(S_P - p0) of the j-th censored subject.
    double censored_log_cure(std::size_t j) const noexcept { return a_.log_cure[ctx_->censored[j]]; }
    double censored_log_sus(std::size_t j) const noexcept { return a_.log_sus[ctx_->censored[j]]; }
    /// Sets the indicator of the j-th censored subject; call refresh_total() after a batch.
    void set_indicator(std::size_t j, std::uint8_t value) noexcept
    {
        indicator_[ctx_->censored[j]] = value;
    }
    void refresh_total() noexcept;

    struct Arrays
    {
        std::vector<double> eta, vartheta, log_A, log_F, log_f, log_cure, log_surv, log_sus;
        void resize(std::size_t n);
    };

    /// Scratch buffers for the kernel passes.
    struct Work
    {
        std::vector<double> s, t;
        Arrays gathered;
        std::vector<std::uint8_t> event;
        void resize(std::size_t n);
    };

    struct Params
    {
        std::vector<double> alpha;
        std::vector<double> beta;
        double gamma = 0.0;
        double lambda = 1.0;
    };

private:
    enum Touched : unsigned
    {
        touch_eta = 1u << 0,
        touch_base = 1u << 1,  // log_A and log_cure
        touch_promotion = 1u << 2,
        touch_surv = 1u << 3,  // log_surv and log_sus
    };

    void sync(Arrays& to, const Arrays& from, unsigned touched, bool all_rows) const;
    double sum_terms(const Arrays& arr) const noexcept;

    const CacheContext* ctx_;
    Params cur_;
    Params trial_;
    Arrays a_;  // committed
    Arrays t_;  // shadow, equal to a_ outside a pending trial
    Work work_;
    Arrays saved_;
    Params saved_params_;
    double saved_total_ = 0.0;
    std::vector<std::uint8_t> indicator_;
    double total_ = 0.0;
    double trial_total_ = 0.0;
    unsigned pending_ = 0;
    bool pending_all_rows_ = true;
    std::size_t pending_column_ = 0;
};

}  // namespace curemc3::detail
