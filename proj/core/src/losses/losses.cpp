#include "utad/losses/losses.hpp"

#include <charconv>
#include <cmath>

#include "utad/error.hpp"

namespace utad::losses {

namespace {

void require_batch(const torch::Tensor& t, const char* what) {
    if (!t.defined() || t.dim() < 1 || t.size(0) == 0) throw InvalidInput(std::string(what) + ": empty batch");
}

void require_same(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
    if (!a.defined() || !b.defined() || !a.sizes().equals(b.sizes())) {
        throw ShapeMismatch(std::string(what) + ": operands differ in shape");
    }
}

torch::Tensor zero_like_scalar(const torch::Tensor& ref) { return torch::zeros({}, ref.options()); }

}  // namespace

torch::Tensor interpolation_weights(std::int64_t n, core::Rng& rng) {
    auto a = torch::empty({n}, torch::kFloat64);
    auto* p = a.data_ptr<double>();
    for (std::int64_t i = 0; i < n; ++i) p[i] = rng.uniform();
    return a;
}

torch::Tensor gradient_penalty(const CriticFn& critic, const torch::Tensor& real, const torch::Tensor& fake,
                               const torch::Tensor& alpha, double lambda_gp) {
    require_same(real, fake, "gradient penalty");
    require_batch(real, "gradient penalty");
    std::vector<std::int64_t> shape(static_cast<std::size_t>(real.dim()), 1);
    shape[0] = real.size(0);
    const torch::Tensor a = alpha.to(real.options()).view(shape);
    const torch::Tensor x_hat = (a * real.detach() + (1 - a) * fake.detach()).requires_grad_(true);
    const torch::Tensor score = critic(x_hat).score();

    torch::Tensor grad;
    if (score.requires_grad()) {
        grad = torch::autograd::grad({score.sum()}, {x_hat}, {}, /*retain_graph=*/true, /*create_graph=*/true,
                                     /*allow_unused=*/true)[0];
    }
    if (!grad.defined()) grad = torch::zeros_like(x_hat);  // critic independent of its input
    const torch::Tensor norm = grad.flatten(1).norm(2, 1);
    return lambda_gp * (norm - 1).pow(2).mean();
}

AdversarialTerms adversarial_critic_objective(const CriticFn& critic, const torch::Tensor& real,
                                              const torch::Tensor& fake, double lambda_gp, const torch::Tensor& alpha) {
    require_same(real, fake, "adversarial objective");
    require_batch(real, "adversarial objective");
    const torch::Tensor fake_d = fake.detach();
    AdversarialTerms t;
    t.gp = gradient_penalty(critic, real, fake_d, alpha, lambda_gp);
    t.l_adv = critic(real).score().mean() - critic(fake_d).score().mean() - t.gp;
    return t;
}

AdversarialTerms adversarial_critic_objective(const CriticFn& critic, const torch::Tensor& real,
                                              const torch::Tensor& fake, double lambda_gp, core::Rng& rng) {
    require_batch(real, "adversarial objective");
    return adversarial_critic_objective(critic, real, fake, lambda_gp, interpolation_weights(real.size(0), rng));
}

torch::Tensor adversarial_generator_term(const CriticFn& critic, const torch::Tensor& fake) {
    require_batch(fake, "adversarial generator term");
    return -critic(fake).score().mean();
}

torch::Tensor classification_loss(const torch::Tensor& logits, const torch::Tensor& labels) {
    require_batch(logits, "classification loss");
    if (logits.dim() != 2 || labels.dim() != 1 || labels.size(0) != logits.size(0)) {
        throw ShapeMismatch("classification loss: logits must be N×K and labels N");
    }
    const torch::Tensor p = torch::softmax(logits, 1).gather(1, labels.to(torch::kLong).view({-1, 1})).squeeze(1);
    return -torch::log(p.clamp_min(kProbabilityFloor)).mean();
}

torch::Tensor cls_loss_real(const CriticFn& critic, const torch::Tensor& x, const torch::Tensor& source) {
    return classification_loss(critic(x).cls_logits, source);
}

FakeClassification cls_loss_fake(const CriticFn& global_critic, const CriticFn& local_critic,
                                 const torch::Tensor& whole, const torch::Tensor& tumor, const torch::Tensor& target) {
    FakeClassification f;
    f.global = classification_loss(global_critic(whole).cls_logits, target);
    f.local = tumor.defined() && local_critic ? classification_loss(local_critic(tumor).cls_logits, target)
                                              : zero_like_scalar(f.global);
    f.total = f.global + f.local;
    return f;
}

torch::Tensor l1(const torch::Tensor& a, const torch::Tensor& b) {
    require_same(a, b, "L1 loss");
    return (a - b).abs().mean();
}

torch::Tensor local_consistency_loss(const torch::Tensor& tumor_tgt, const torch::Tensor& masked_tgt,
                                     const torch::Tensor& tumor_src, const torch::Tensor& reconstructed_tumor_src) {
    return l1(tumor_tgt, masked_tgt) + l1(tumor_src, reconstructed_tumor_src);
}

torch::Tensor reconstruct_loss(const torch::Tensor& image_src, const torch::Tensor& reconstructed_src) {
    return l1(image_src, reconstructed_src);
}

torch::Tensor distillation_loss(const torch::Tensor& feature_teacher, const torch::Tensor& feature_student,
                                const torch::Tensor& target_teacher, const torch::Tensor& target_student) {
    return l1(feature_teacher.detach(), feature_student) + l1(target_teacher.detach(), target_student);
}

const std::vector<std::string>& LossBreakdown::columns() {
    static const std::vector<std::string> c = {"adv_g",     "adv_l",     "gp_g",      "gp_l",      "cls_real_g",
                                               "cls_real_l", "cls_fake", "local",     "rec",       "dis",
                                               "gen_adv_g", "gen_adv_l", "total_D_g", "total_D_l", "total_G"};
    return c;
}

namespace {

using Field = double LossBreakdown::*;
constexpr Field kFields[] = {&LossBreakdown::adv_g,      &LossBreakdown::adv_l,     &LossBreakdown::gp_g,
                             &LossBreakdown::gp_l,       &LossBreakdown::cls_real_g, &LossBreakdown::cls_real_l,
                             &LossBreakdown::cls_fake,   &LossBreakdown::local,     &LossBreakdown::rec,
                             &LossBreakdown::dis,        &LossBreakdown::gen_adv_g, &LossBreakdown::gen_adv_l,
                             &LossBreakdown::total_D_g,  &LossBreakdown::total_D_l, &LossBreakdown::total_G};

}  // namespace

std::vector<double> LossBreakdown::values() const {
    std::vector<double> v;
    for (Field f : kFields) v.push_back(this->*f);
    return v;
}

LossBreakdown& LossBreakdown::operator+=(const LossBreakdown& o) {
    for (Field f : kFields) this->*f += o.*f;
    return *this;
}

LossBreakdown LossBreakdown::scaled(double k) const {
    LossBreakdown r = *this;
    for (Field f : kFields) r.*f *= k;
    return r;
}

std::string LossBreakdown::first_non_finite() const {
    const auto v = values();
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i])) return columns()[i];
    }
    return {};
}

LossBreakdown total_losses(LossBreakdown c, double lambda_1, double lambda_2, model::Role role) {
    c.total_D_g = critic_total(c.adv_g, c.cls_real_g);
    c.total_D_l = critic_total(c.adv_l, c.cls_real_l);
    c.total_G = generator_total(c.gen_adv_g, c.gen_adv_l, c.cls_fake, c.rec, c.local, c.dis, lambda_1, lambda_2, role);
    return c;
}

std::string format_double(double v) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

std::string csv_header() {
    std::string h = "epoch,step";
    for (const auto& c : LossBreakdown::columns()) h += "," + c;
    return h;
}

std::string csv_row(int epoch, long step, const LossBreakdown& b) {
    std::string row = std::to_string(epoch) + "," + std::to_string(step);
    for (double v : b.values()) row += "," + format_double(v);
    return row;
}

}  // namespace utad::losses
