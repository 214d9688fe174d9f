#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "utad/error.hpp"
#include "utad/losses/losses.hpp"

using namespace utad;
using losses::CriticFn;

namespace {

const auto kF64 = torch::TensorOptions().dtype(torch::kFloat64);

model::CriticOutput constant_critic_output(const torch::Tensor& x, double c) {
    model::CriticOutput o;
    o.src_map = torch::full({x.size(0), 1, 2, 2}, c, kF64);
    o.cls_logits = torch::zeros({x.size(0), 4}, kF64);
    return o;
}

CriticFn constant_critic(double c) {
    return [c](const torch::Tensor& x) { return constant_critic_output(x, c); };
}

CriticFn linear_critic(const torch::Tensor& w) {
    return [w](const torch::Tensor& x) {
        model::CriticOutput o;
        o.src_map = (x * w).sum({1, 2, 3}).view({-1, 1, 1, 1});
        o.cls_logits = torch::zeros({x.size(0), 4}, kF64);
        return o;
    };
}

CriticFn logits_critic(const torch::Tensor& logits) {
    return [logits](const torch::Tensor& x) {
        model::CriticOutput o;
        o.src_map = torch::zeros({x.size(0), 1, 1, 1}, kF64);
        o.cls_logits = logits;
        return o;
    };
}

/// Two convolutions; channel 0 of the second is the realness map, channels 1..4
/// are pooled into class logits, and tanh(channel 0) doubles as a generator output.
struct ToyNet : torch::nn::Module {
    torch::nn::Conv2d c1{nullptr}, c2{nullptr};
    ToyNet() {
        c1 = register_module("c1", torch::nn::Conv2d(torch::nn::Conv2dOptions(1, 3, 3).padding(1)));
        c2 = register_module("c2", torch::nn::Conv2d(torch::nn::Conv2dOptions(3, 5, 3).padding(1)));
        to(torch::kFloat64);
    }
    torch::Tensor raw(const torch::Tensor& x) { return c2(torch::tanh(c1(x))); }
    model::CriticOutput critic(const torch::Tensor& x) {
        const auto h = raw(x);
        return {h.narrow(1, 0, 1), h.narrow(1, 1, 4).mean({2, 3})};
    }
    torch::Tensor generate(const torch::Tensor& x) { return torch::tanh(raw(x).narrow(1, 0, 1)); }
};

/// Central differences of `loss` with respect to every parameter entry, compared
/// elementwise against autograd.
void expect_gradients_match(ToyNet& net, const std::function<torch::Tensor()>& loss, const std::string& what) {
    for (auto& p : net.parameters()) p.mutable_grad() = torch::Tensor();
    loss().backward();
    const double h = 1e-4;
    int checked = 0;
    for (auto& p : net.parameters()) {
        const auto analytic = p.grad().defined() ? p.grad().clone() : torch::zeros_like(p);
        auto flat = p.data().view(-1);
        for (int64_t i = 0; i < flat.numel(); ++i) {
            const double orig = flat[i].item<double>();
            double plus, minus;
            // no NoGradGuard: the penalty differentiates the critic internally
            flat[i] = orig + h;
            plus = loss().item<double>();
            flat[i] = orig - h;
            minus = loss().item<double>();
            flat[i] = orig;
            const double numeric = (plus - minus) / (2 * h);
            const double a = analytic.view(-1)[i].item<double>();
            const double scale = std::max(std::abs(a), std::abs(numeric));
            EXPECT_LE(std::abs(a - numeric), 1e-3 * scale + 1e-8) << what << " entry " << i << ": " << a << " vs " << numeric;
            ++checked;
        }
    }
    EXPECT_GT(checked, 100);
}

double brute_l1(const torch::Tensor& a, const torch::Tensor& b) {
    auto fa = a.contiguous().view(-1), fb = b.contiguous().view(-1);
    long double s = 0;
    for (int64_t i = 0; i < fa.numel(); ++i) s += std::abs(fa[i].item<double>() - fb[i].item<double>());
    return static_cast<double>(s / fa.numel());
}

}  // namespace

TEST(Classification, UniformPerfectAndNonnegative) {
    const auto labels = torch::tensor({0, 3, 2}, torch::kLong);
    EXPECT_NEAR(losses::classification_loss(torch::zeros({3, 4}, kF64), labels).item<double>(), -std::log(0.25), 1e-9);
    auto perfect = torch::full({3, 4}, -1000.0, kF64);
    for (int i = 0; i < 3; ++i) perfect[i][labels[i].item<int64_t>()] = 1000.0;
    EXPECT_EQ(losses::classification_loss(perfect, labels).item<double>(), 0.0);
    // a certain but wrong classifier is clamped instead of infinite
    auto wrong = torch::full({3, 4}, 1000.0, kF64);
    for (int i = 0; i < 3; ++i) wrong[i][labels[i].item<int64_t>()] = -1000.0;
    EXPECT_NEAR(losses::classification_loss(wrong, labels).item<double>(), -std::log(losses::kProbabilityFloor), 1e-9);
    torch::manual_seed(1);
    for (int t = 0; t < 50; ++t) {
        const auto logits = torch::randn({5, 4}, kF64) * 5;
        const auto y = torch::randint(0, 4, {5}, torch::kLong);
        const double v = losses::classification_loss(logits, y).item<double>();
        EXPECT_GE(v, 0.0);
        long double ref = 0;
        for (int i = 0; i < 5; ++i) {
            long double z = 0;
            for (int k = 0; k < 4; ++k) z += std::exp(static_cast<long double>(logits[i][k].item<double>()));
            ref -= std::log(std::exp(static_cast<long double>(logits[i][y[i].item<int64_t>()].item<double>())) / z);
        }
        EXPECT_NEAR(v, static_cast<double>(ref / 5), 1e-9);
    }
}

TEST(Classification, RealAndFakeTerms) {
    const auto x = torch::zeros({2, 1, 4, 4}, kF64);
    const auto target = torch::tensor({1, 1}, torch::kLong);
    EXPECT_NEAR(losses::cls_loss_real(constant_critic(0.3), x, target).item<double>(), std::log(4.0), 1e-9);
    auto perfect = torch::full({2, 4}, -1000.0, kF64);
    perfect.select(1, 1).fill_(1000.0);
    const auto uniform = torch::zeros({2, 4}, kF64);

    const auto both = losses::cls_loss_fake(logits_critic(perfect), logits_critic(perfect), x, x, target);
    EXPECT_EQ(both.total.item<double>(), 0.0);
    const auto mixed = losses::cls_loss_fake(logits_critic(uniform), logits_critic(perfect), x, x, target);
    EXPECT_NEAR(mixed.total.item<double>(), 1.386294, 1e-6);
    EXPECT_EQ(mixed.total.item<double>(), mixed.global.item<double>() + mixed.local.item<double>());
    const auto no_local = losses::cls_loss_fake(logits_critic(uniform), CriticFn{}, x, torch::Tensor(), target);
    EXPECT_EQ(no_local.local.item<double>(), 0.0);
    EXPECT_EQ(no_local.total.item<double>(), no_local.global.item<double>());
}

TEST(GradientPenalty, ConstantCriticGivesLambda) {
    core::Rng rng(3);
    const auto real = torch::rand({4, 1, 6, 6}, kF64), fake = torch::rand({4, 1, 6, 6}, kF64);
    const auto t = losses::adversarial_critic_objective(constant_critic(2.5), real, fake, 10.0, rng);
    EXPECT_NEAR(t.gp.item<double>(), 10.0, 1e-12);
    EXPECT_NEAR(t.l_adv.item<double>(), -10.0, 1e-12);  // mean terms cancel
}

TEST(GradientPenalty, LinearCriticMatchesClosedFormAndFiniteDifferences) {
    torch::manual_seed(4);
    for (int trial = 0; trial < 10; ++trial) {
        const auto w = torch::randn({1, 1, 5, 5}, kF64) * 0.3;
        const auto real = torch::rand({3, 1, 5, 5}, kF64), fake = torch::rand({3, 1, 5, 5}, kF64);
        const auto alpha = torch::rand({3}, kF64);
        const double gp = losses::gradient_penalty(linear_critic(w), real, fake, alpha, 10.0).item<double>();
        const double norm = w.norm().item<double>();
        EXPECT_NEAR(gp, 10.0 * (norm - 1) * (norm - 1), 1e-9);

        // gradient-norm oracle by finite differences of the critic at one x̂
        const auto critic = linear_critic(w);
        auto x = (alpha[0] * real[0] + (1 - alpha[0]) * fake[0]).unsqueeze(0).clone();
        auto flat = x.view(-1);
        long double sq = 0;
        for (int64_t i = 0; i < flat.numel(); ++i) {
            const double orig = flat[i].item<double>();
            flat[i] = orig + 1e-4;
            const double up = critic(x).score().item<double>();
            flat[i] = orig - 1e-4;
            const double down = critic(x).score().item<double>();
            flat[i] = orig;
            const long double g = (up - down) / 2e-4;
            sq += g * g;
        }
        const double fd_norm = std::sqrt(static_cast<double>(sq));
        EXPECT_NEAR(gp, 10.0 * (fd_norm - 1) * (fd_norm - 1), 1e-4);
    }
}

TEST(GradientPenalty, SwappingRealAndFakeWithMirroredCoefficients) {
    torch::manual_seed(5);
    ToyNet net;
    const CriticFn critic = [&](const torch::Tensor& x) { return net.critic(x); };
    const auto real = torch::rand({4, 1, 6, 6}, kF64) * 2 - 1, fake = torch::rand({4, 1, 6, 6}, kF64) * 2 - 1;
    const auto alpha = torch::rand({4}, kF64);
    const double a = losses::gradient_penalty(critic, real, fake, alpha, 10.0).item<double>();
    const double b = losses::gradient_penalty(critic, fake, real, 1 - alpha, 10.0).item<double>();
    EXPECT_NEAR(a, b, 1e-12);

    // and in distribution: mean over many uniform draws agrees for both orders
    core::Rng r1(8), r2(8);
    double sa = 0, sb = 0;
    const int draws = 400;
    for (int i = 0; i < draws; ++i) {
        sa += losses::gradient_penalty(critic, real, fake, losses::interpolation_weights(4, r1), 10.0).item<double>();
        sb += losses::gradient_penalty(critic, fake, real, losses::interpolation_weights(4, r2), 10.0).item<double>();
    }
    EXPECT_NEAR(sa / draws, sb / draws, 0.05 * std::abs(sa / draws) + 1e-9);
}

TEST(GradientPenalty, InterpolationWeightsAreUniform) {
    core::Rng rng(6);
    const auto a = losses::interpolation_weights(20000, rng);
    EXPECT_GE(a.min().item<double>(), 0.0);
    EXPECT_LT(a.max().item<double>(), 1.0);
    EXPECT_NEAR(a.mean().item<double>(), 0.5, 3 * std::sqrt(1.0 / 12 / 20000));
}

TEST(AdversarialGenerator, ConstantAndMonotone) {
    const auto fake = torch::rand({3, 1, 4, 4}, kF64).requires_grad_(true);
    const auto v = losses::adversarial_generator_term(constant_critic(1.75), fake);
    EXPECT_EQ(v.item<double>(), -1.75);
    const auto w = torch::ones({1, 1, 4, 4}, kF64);
    double prev = std::numeric_limits<double>::infinity();
    for (double shift : {-1.0, 0.0, 0.5, 2.0}) {
        const double t = losses::adversarial_generator_term(linear_critic(w), (fake + shift).detach()).item<double>();
        EXPECT_LT(t, prev);
        prev = t;
    }
    EXPECT_THROW(losses::adversarial_generator_term(constant_critic(1), torch::zeros({0, 1, 4, 4}, kF64)), InvalidInput);
}

TEST(L1Losses, ExamplesAndBruteForce) {
    const auto z = torch::zeros({1, 1, 2, 2}, kF64);
    const auto gaps = torch::tensor({0.1, 0.2, 0.3, 0.4}, kF64).view({1, 1, 2, 2});
    EXPECT_NEAR(losses::local_consistency_loss(gaps, z, z, z).item<double>(), 0.25, 1e-12);
    EXPECT_EQ(losses::local_consistency_loss(gaps, gaps, z, z).item<double>(), 0.0);

    torch::manual_seed(7);
    for (int t = 0; t < 20; ++t) {
        const auto a = torch::randn({2, 1, 5, 5}, kF64), b = torch::randn({2, 1, 5, 5}, kF64);
        const auto c = torch::randn({2, 1, 5, 5}, kF64), d = torch::randn({2, 1, 5, 5}, kF64);
        const auto e = torch::randn({2, 8, 3, 3}, kF64), f = torch::randn({2, 8, 3, 3}, kF64);
        EXPECT_NEAR(losses::reconstruct_loss(a, b).item<double>(), brute_l1(a, b), 1e-9);
        EXPECT_EQ(losses::reconstruct_loss(a, b).item<double>(), losses::reconstruct_loss(b, a).item<double>());
        EXPECT_NEAR(losses::local_consistency_loss(a, b, c, d).item<double>(), brute_l1(a, b) + brute_l1(c, d), 1e-9);
        EXPECT_NEAR(losses::local_consistency_loss(a + 3.5, b + 3.5, c - 1, d - 1).item<double>(),
                    losses::local_consistency_loss(a, b, c, d).item<double>(), 1e-9);
        EXPECT_NEAR(losses::distillation_loss(e, f, a, b).item<double>(), brute_l1(e, f) + brute_l1(a, b), 1e-9);
        EXPECT_EQ(losses::distillation_loss(e, e, a, a).item<double>(), 0.0);
        const double delta = 0.37;
        EXPECT_NEAR(losses::reconstruct_loss(a, a + delta).item<double>(), delta, 1e-9);
    }
    EXPECT_THROW(losses::reconstruct_loss(z, torch::zeros({1, 1, 2, 3}, kF64)), ShapeMismatch);
}

TEST(Distillation, NoGradientReachesTheTeacher) {
    const auto ft = torch::randn({1, 2, 2, 2}, kF64).requires_grad_(true);
    const auto fs = torch::randn({1, 2, 2, 2}, kF64).requires_grad_(true);
    const auto it = torch::randn({1, 1, 2, 2}, kF64).requires_grad_(true);
    const auto is = torch::randn({1, 1, 2, 2}, kF64).requires_grad_(true);
    losses::distillation_loss(ft, fs, it, is).backward();
    EXPECT_FALSE(ft.grad().defined());
    EXPECT_FALSE(it.grad().defined());
    EXPECT_TRUE(fs.grad().defined());
    EXPECT_TRUE(is.grad().defined());
}

TEST(Totals, CompositionsAndAffinity) {
    losses::LossBreakdown b;
    b.rec = 0.5;
    EXPECT_EQ(losses::total_losses(b, 10, 10, model::Role::Teacher).total_G, 5.0);

    std::mt19937_64 gen(9);
    std::normal_distribution<double> n;
    for (int t = 0; t < 100; ++t) {
        losses::LossBreakdown c;
        c.adv_g = n(gen), c.adv_l = n(gen), c.cls_real_g = std::abs(n(gen)), c.cls_real_l = std::abs(n(gen));
        c.gen_adv_g = n(gen), c.gen_adv_l = n(gen), c.cls_fake = std::abs(n(gen));
        c.rec = std::abs(n(gen)), c.local = std::abs(n(gen)), c.dis = std::abs(n(gen));
        const double l1 = 10, l2 = 10;
        const auto teacher = losses::total_losses(c, l1, l2, model::Role::Teacher);
        const auto student = losses::total_losses(c, l1, l2, model::Role::Student);
        EXPECT_NEAR(teacher.total_D_g, -c.adv_g + c.cls_real_g, 1e-12);
        EXPECT_NEAR(teacher.total_D_l, -c.adv_l + c.cls_real_l, 1e-12);
        EXPECT_NEAR(teacher.total_G, c.gen_adv_g + c.gen_adv_l + c.cls_fake + l1 * (c.rec + c.local), 1e-12);
        EXPECT_NEAR(student.total_G - teacher.total_G, l2 * c.dis, 1e-12);

        // one component at a time: the change is its coefficient times the step
        const double step = 0.125;
        struct Probe {
            double losses::LossBreakdown::*field;
            double d_g, d_dg;
        };
        const Probe probes[] = {{&losses::LossBreakdown::gen_adv_g, 1, 0}, {&losses::LossBreakdown::cls_fake, 1, 0},
                                {&losses::LossBreakdown::rec, l1, 0},      {&losses::LossBreakdown::local, l1, 0},
                                {&losses::LossBreakdown::dis, l2, 0},      {&losses::LossBreakdown::adv_g, 0, -1},
                                {&losses::LossBreakdown::cls_real_g, 0, 1}};
        for (const auto& p : probes) {
            auto moved = c;
            moved.*p.field += step;
            const auto s2 = losses::total_losses(moved, l1, l2, model::Role::Student);
            EXPECT_NEAR(s2.total_G - student.total_G, p.d_g * step, 1e-12);
            EXPECT_NEAR(s2.total_D_g - student.total_D_g, p.d_dg * step, 1e-12);
        }
    }
}

TEST(Totals, TensorCompositionOnRandomBatches) {
    torch::manual_seed(10);
    ToyNet gen_net, critic_g, critic_l;
    const CriticFn dg = [&](const torch::Tensor& x) { return critic_g.critic(x); };
    const CriticFn dl = [&](const torch::Tensor& x) { return critic_l.critic(x); };
    core::Rng rng(10);
    for (int t = 0; t < 10; ++t) {
        const auto real = torch::rand({3, 1, 8, 8}, kF64) * 2 - 1;
        const auto fake = gen_net.generate(real);
        const auto src = torch::randint(0, 4, {3}, torch::kLong), tgt = torch::randint(0, 4, {3}, torch::kLong);
        const auto adv = losses::adversarial_critic_objective(dg, real, fake, 10, rng);
        const auto cls = losses::cls_loss_real(dg, real, src);
        const auto d = losses::critic_total(adv.l_adv, cls);
        const auto manual = -(critic_g.critic(real).score().mean() - critic_g.critic(fake.detach()).score().mean() - adv.gp) +
                            cls;
        EXPECT_NEAR(d.item<double>(), manual.item<double>(), 1e-6);

        const auto ga = losses::adversarial_generator_term(dg, fake), gl = losses::adversarial_generator_term(dl, fake);
        const auto cf = losses::cls_loss_fake(dg, dl, fake, fake, tgt).total;
        const auto rec = losses::reconstruct_loss(real, fake), local = losses::local_consistency_loss(fake, real, real, fake);
        const auto dis = losses::distillation_loss(real, fake, real, fake);
        const auto gt = losses::generator_total(ga, gl, cf, rec, local, dis, 10, 10, model::Role::Teacher);
        const auto gs = losses::generator_total(ga, gl, cf, rec, local, dis, 10, 10, model::Role::Student);
        EXPECT_NEAR((gs - gt).item<double>(), 10 * dis.item<double>(), 1e-6);
    }
}

TEST(Gradients, FiniteDifferencesOnToyNetwork) {
    torch::manual_seed(11);
    ToyNet net;
    const CriticFn critic = [&](const torch::Tensor& x) { return net.critic(x); };
    const auto real = torch::rand({2, 1, 6, 6}, kF64) * 2 - 1, fake = torch::rand({2, 1, 6, 6}, kF64) * 2 - 1;
    const auto alpha = torch::tensor({0.3, 0.8}, kF64);
    const auto labels = torch::tensor({1, 3}, torch::kLong);
    const auto other = torch::rand({2, 1, 6, 6}, kF64) * 2 - 1;
    const auto feat = torch::randn({2, 1, 6, 6}, kF64);

    expect_gradients_match(net, [&] { return losses::adversarial_critic_objective(critic, real, fake, 10, alpha).l_adv; }, "adv");
    expect_gradients_match(net, [&] { return losses::gradient_penalty(critic, real, fake, alpha, 10); }, "gp");
    expect_gradients_match(net, [&] { return losses::adversarial_generator_term(critic, net.generate(real)); }, "gen_adv");
    expect_gradients_match(net, [&] { return losses::cls_loss_real(critic, real, labels); }, "cls_real");
    expect_gradients_match(net, [&] { return losses::cls_loss_fake(critic, critic, net.generate(real), net.generate(fake), labels).total; }, "cls_fake");
    expect_gradients_match(net, [&] { return losses::reconstruct_loss(other, net.generate(real)); }, "rec");
    expect_gradients_match(net, [&] {
        const auto y = net.generate(real);
        return losses::local_consistency_loss(y, other, fake, net.generate(other));
    }, "local");
    expect_gradients_match(net, [&] { return losses::distillation_loss(feat, net.raw(real).narrow(1, 2, 1), other, net.generate(real)); }, "dis");
}

TEST(Breakdown, CsvAndNonFiniteNames) {
    losses::LossBreakdown b;
    b.adv_g = 0.1;
    b.total_G = -2;
    EXPECT_EQ(losses::csv_header().rfind("epoch,step,adv_g,", 0), 0u);
    const auto row = losses::csv_row(3, 17, b);
    EXPECT_EQ(row.rfind("3,17,0.1,", 0), 0u);
    const auto header = losses::csv_header();
    EXPECT_EQ(std::count(row.begin(), row.end(), ','), std::count(header.begin(), header.end(), ','));
    EXPECT_EQ(b.first_non_finite(), "");
    b.local = std::nan("");
    EXPECT_EQ(b.first_non_finite(), "local");
    EXPECT_EQ(std::stod(losses::format_double(0.1 + 0.2)), 0.1 + 0.2);
}
