#pragma once

#include <functional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "utad/core/rng.hpp"
#include "utad/model/networks.hpp"

namespace utad::losses {

/// Anything that maps an N×1×H×W batch to a critic output. Tests plug analytic
/// critics in here; training passes the network's forward.
using CriticFn = std::function<model::CriticOutput(const torch::Tensor&)>;

inline CriticFn as_critic(model::Critic& c) {
    return [&c](const torch::Tensor& x) { return c->forward(x); };
}

/// Floor applied to class probabilities before the log.
inline constexpr double kProbabilityFloor = 1e-12;

struct AdversarialTerms {
    torch::Tensor l_adv;  // mean D(real) - mean D(fake) - gp
    torch::Tensor gp;     // lambda_gp * mean((||grad||_2 - 1)^2)
};

/// One interpolation coefficient per sample, uniform on [0, 1], drawn from `rng`.
torch::Tensor interpolation_weights(std::int64_t n, core::Rng& rng);

/// Gradient penalty on x̂ = a·real + (1-a)·fake with per-sample a. The gradient is
/// taken of the per-sample critic score; the graph is kept so the penalty trains the critic.
torch::Tensor gradient_penalty(const CriticFn& critic, const torch::Tensor& real, const torch::Tensor& fake,
                               const torch::Tensor& alpha, double lambda_gp);

AdversarialTerms adversarial_critic_objective(const CriticFn& critic, const torch::Tensor& real,
                                              const torch::Tensor& fake, double lambda_gp, core::Rng& rng);
AdversarialTerms adversarial_critic_objective(const CriticFn& critic, const torch::Tensor& real,
                                              const torch::Tensor& fake, double lambda_gp, const torch::Tensor& alpha);

/// -mean D(fake).
torch::Tensor adversarial_generator_term(const CriticFn& critic, const torch::Tensor& fake);

/// Batch mean of -log max(softmax(logits)[label], floor). `labels` is a long N vector.
torch::Tensor classification_loss(const torch::Tensor& logits, const torch::Tensor& labels);

torch::Tensor cls_loss_real(const CriticFn& critic, const torch::Tensor& x, const torch::Tensor& source);

struct FakeClassification {
    torch::Tensor global;
    torch::Tensor local;
    torch::Tensor total;  // global + local
};

/// `tumor` and `local_critic` may be absent (undefined / empty) for generators
/// without a tumor output; the local term is then zero.
FakeClassification cls_loss_fake(const CriticFn& global_critic, const CriticFn& local_critic,
                                 const torch::Tensor& whole, const torch::Tensor& tumor, const torch::Tensor& target);

/// Mean absolute difference. Throws ShapeMismatch when shapes differ.
torch::Tensor l1(const torch::Tensor& a, const torch::Tensor& b);

torch::Tensor local_consistency_loss(const torch::Tensor& tumor_tgt, const torch::Tensor& masked_tgt,
                                     const torch::Tensor& tumor_src, const torch::Tensor& reconstructed_tumor_src);
torch::Tensor reconstruct_loss(const torch::Tensor& image_src, const torch::Tensor& reconstructed_src);
torch::Tensor distillation_loss(const torch::Tensor& feature_teacher, const torch::Tensor& feature_student,
                                const torch::Tensor& target_teacher, const torch::Tensor& target_student);

/// Critic total for one branch: -L_adv + L_cls_real.
template <class T>
T critic_total(const T& adv, const T& cls_real) {
    return -adv + cls_real;
}

/// Generator total. The adversarial terms are the generator-side values
/// -mean D(fake); `dis` enters only for the student role.
template <class T>
T generator_total(const T& gen_adv_g, const T& gen_adv_l, const T& cls_fake, const T& rec, const T& local,
                  const T& dis, double lambda_1, double lambda_2, model::Role role) {
    T total = gen_adv_g + gen_adv_l + cls_fake + lambda_1 * (rec + local);
    if (role == model::Role::Student) total = total + lambda_2 * dis;
    return total;
}

/// Scalar values of one training step.
struct LossBreakdown {
    double adv_g = 0, adv_l = 0;
    double gp_g = 0, gp_l = 0;
    double cls_real_g = 0, cls_real_l = 0;
    double cls_fake = 0;
    double local = 0, rec = 0, dis = 0;
    double gen_adv_g = 0, gen_adv_l = 0;
    double total_D_g = 0, total_D_l = 0, total_G = 0;

    /// Column names in CSV order.
    static const std::vector<std::string>& columns();
    std::vector<double> values() const;
    LossBreakdown& operator+=(const LossBreakdown& o);
    LossBreakdown scaled(double f) const;
    /// Name of the first non-finite field, or empty.
    std::string first_non_finite() const;
};

/// Recomputes the three totals from the component fields.
LossBreakdown total_losses(LossBreakdown components, double lambda_1, double lambda_2, model::Role role);

/// Header line of losses.csv (without newline).
std::string csv_header();
/// One row: epoch, step, then columns() in order, shortest round-trip formatting.
std::string csv_row(int epoch, long step, const LossBreakdown& b);
std::string format_double(double v);

}  // namespace utad::losses
