#include <cmath>
#include <fstream>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "utad/error.hpp"
#include "utad/model/checkpoint.hpp"
#include "utad/model/networks.hpp"
#include "utad/model/tensors.hpp"

using namespace utad;
using model::NetworkSet;
using model::Role;

namespace {

torch::Tensor cond(core::Modality m, int n) { return model::one_hot_condition(model::modality_indices(m, n)); }

torch::Tensor random_input(int n, int side) { return torch::rand({n, 1, side, side}) * 2 - 1; }

core::ExperimentConfig small() {
    auto c = fixture::tiny_config();
    c.resolution = 32;
    c.depth = 3;
    return c;
}

bool bitwise_equal(const torch::Tensor& a, const torch::Tensor& b) {
    return a.sizes() == b.sizes() && a.dtype() == b.dtype() && torch::equal(a, b);
}

}  // namespace

TEST(Generator, ShapesAndBoundsAtDefaultResolution) {
    torch::manual_seed(0);
    core::ExperimentConfig cfg;
    cfg.base_channels = 8;
    auto nets = NetworkSet::create(cfg, Role::Teacher, 0);
    torch::NoGradGuard ng;
    const auto x = random_input(2, 128);
    const auto out = model::teacher_forward(nets.generator, x, model::mask_network(x, torch::ones_like(x)), cond(core::Modality::T2, 2));
    EXPECT_EQ(out.whole.sizes(), x.sizes());
    EXPECT_EQ(out.tumor.sizes(), x.sizes());
    EXPECT_LE(out.whole.abs().max().item<float>(), 1.0f);
    EXPECT_LE(out.tumor.abs().max().item<float>(), 1.0f);
    EXPECT_TRUE(torch::isfinite(out.fused_feature).all().item<bool>());
    EXPECT_EQ(out.fused_feature.size(2), 8);  // four stages on 128
    EXPECT_EQ(out.fused_feature.size(1), nets.generator_spec.bottleneck_channels());
}

TEST(Generator, TargetModalityChangesTheOutput) {
    auto nets = NetworkSet::create(small(), Role::Teacher, 1);
    torch::NoGradGuard ng;
    const auto x = random_input(1, 32);
    const auto t = model::mask_network(x, torch::ones_like(x));
    const auto a = model::teacher_forward(nets.generator, x, t, cond(core::Modality::T1, 1));
    const auto b = model::teacher_forward(nets.generator, x, t, cond(core::Modality::T2, 1));
    EXPECT_FALSE(torch::equal(a.whole, b.whole));
}

TEST(Generator, BadInputsThrow) {
    auto nets = NetworkSet::create(small(), Role::Teacher, 1);
    const auto x = random_input(1, 32);
    EXPECT_THROW(model::teacher_forward(nets.generator, x, random_input(1, 16), cond(core::Modality::T1, 1)), ShapeMismatch);
    auto bad = x.clone();
    bad[0][0][3][3] = std::nanf("");
    EXPECT_THROW(model::teacher_forward(nets.generator, bad, x, cond(core::Modality::T1, 1)), InvalidInput);
}

TEST(Student, SchemeLayouts) {
    const auto cfg = small();
    auto teacher = NetworkSet::create(cfg, Role::Teacher, 2);
    auto with_scheme = [&](core::StudentScheme s) {
        auto c = cfg;
        c.student_scheme = s;
        return NetworkSet::create(c, Role::Student, 2);
    };
    auto a = with_scheme(core::StudentScheme::A), b = with_scheme(core::StudentScheme::B);
    auto c = with_scheme(core::StudentScheme::C), d = with_scheme(core::StudentScheme::D);
    EXPECT_EQ(model::parameter_count(*a.generator), model::parameter_count(*teacher.generator));
    EXPECT_LT(model::parameter_count(*b.generator), model::parameter_count(*c.generator));
    EXPECT_TRUE(a.has_local());
    EXPECT_FALSE(b.has_local());
    EXPECT_TRUE(c.has_local());
    EXPECT_FALSE(d.has_local());

    torch::NoGradGuard ng;
    const auto x = random_input(2, 32);
    const auto t = cond(core::Modality::Flair, 2);
    const auto oa = model::student_forward(a.generator, x, t);
    const auto ob = model::student_forward(b.generator, x, t);
    const auto oc = model::student_forward(c.generator, x, t);
    const auto od = model::student_forward(d.generator, x, t);
    EXPECT_TRUE(oa.has_tumor());
    EXPECT_FALSE(ob.has_tumor());
    EXPECT_TRUE(oc.has_tumor());
    EXPECT_FALSE(od.has_tumor());
    // taps: fused feature for A and D, encoder output for B and C; all bottleneck shaped
    EXPECT_TRUE(torch::equal(oa.feature_tap, oa.fused_feature));
    EXPECT_TRUE(torch::equal(od.feature_tap, od.fused_feature));
    EXPECT_FALSE(torch::equal(oc.feature_tap, oc.fused_feature));
    for (const auto* o : {&oa, &ob, &oc, &od}) EXPECT_EQ(o->feature_tap.sizes(), oa.fused_feature.sizes());
}

TEST(Student, SchemeAMatchesTeacherWithAllOnesMask) {
    const auto cfg = small();
    auto teacher = NetworkSet::create(cfg, Role::Teacher, 3);
    auto student = NetworkSet::create(cfg, Role::Student, 4);
    const auto contents = model::snapshot(teacher, cfg, 0);
    model::restore_networks(student, contents);
    torch::NoGradGuard ng;
    const auto x = random_input(3, 32);
    const auto t = cond(core::Modality::T1ce, 3);
    const auto ot = model::teacher_forward(teacher.generator, x, model::mask_network(x, torch::ones_like(x)), t);
    const auto os = model::student_forward(student.generator, x, t);
    EXPECT_TRUE(torch::equal(ot.whole, os.whole));
    EXPECT_TRUE(torch::equal(ot.tumor, os.tumor));
    EXPECT_TRUE(torch::equal(ot.fused_feature, os.fused_feature));
}

TEST(Fusion, ShapeSelectionAndGradients) {
    torch::manual_seed(5);
    const int C = 6;
    model::ConcatMixFusion f(C, 2);
    const auto g = torch::rand({2, C, 4, 4});  // nonnegative like an encoder bottleneck
    const auto l = torch::rand({2, C, 4, 4});
    EXPECT_EQ(f.forward({g, l}).sizes(), g.sizes());
    {
        torch::NoGradGuard ng;
        auto w_in = torch::zeros({C, 2 * C, 1, 1});
        for (int i = 0; i < C; ++i) w_in[i][i][0][0] = 1;
        f.mix_in()->weight.copy_(w_in);
        f.mix_in()->bias.zero_();
        f.mix_out()->weight.copy_(torch::eye(C).view({C, C, 1, 1}));
        f.mix_out()->bias.zero_();
    }
    EXPECT_TRUE(torch::allclose(f.forward({g, l}), g, 0, 1e-7));

    model::ConcatMixFusion generic(C, 2);
    auto gg = g.clone().requires_grad_(true), ll = l.clone().requires_grad_(true);
    generic.forward({gg, ll}).pow(2).sum().backward();
    EXPECT_GT(gg.grad().abs().sum().item<double>(), 0);
    EXPECT_GT(ll.grad().abs().sum().item<double>(), 0);
    EXPECT_THROW(generic.forward({g, torch::rand({2, C, 2, 2})}), ShapeMismatch);
    EXPECT_THROW(generic.forward({g}), InvalidInput);
    EXPECT_THROW(model::make_fusion("attention-v9", C, 2), InvalidInput);
}

TEST(Critic, SoftmaxAndMapSize) {
    const auto cfg = small();
    auto nets = NetworkSet::create(cfg, Role::Teacher, 6);
    torch::NoGradGuard ng;
    const auto a = nets.global_critic->forward(random_input(3, 32));
    const auto b = nets.global_critic->forward(torch::zeros({3, 1, 32, 32}));
    EXPECT_EQ(a.src_map.sizes(), b.src_map.sizes());
    EXPECT_EQ(a.src_map.size(2), nets.critic_spec.map_size());
    EXPECT_EQ(a.cls_logits.sizes(), (std::vector<int64_t>{3, 4}));
    EXPECT_FALSE(torch::equal(a.src_map, b.src_map));
    const auto p = torch::softmax(a.cls_logits.to(torch::kFloat64), 1).sum(1);
    EXPECT_LT((p - 1).abs().max().item<double>(), 1e-6);
    EXPECT_TRUE(torch::isfinite(a.cls_logits).all().item<bool>());
}

TEST(Checkpoint, RoundTripIsBitwiseAndPreservesForward) {
    fixture::TempDir tmp("ckpt");
    auto cfg = small();
    cfg.student_scheme = core::StudentScheme::C;
    auto nets = NetworkSet::create(cfg, Role::Student, 7);
    auto contents = model::snapshot(nets, cfg, 12);
    contents.metadata["note"] = "x y";
    model::write_checkpoint(tmp / "a.utad", contents);
    const auto back = model::read_checkpoint(tmp / "a.utad");
    EXPECT_EQ(back.config, cfg);
    EXPECT_EQ(back.role, Role::Student);
    EXPECT_EQ(back.scheme, core::StudentScheme::C);
    EXPECT_EQ(back.epoch, 12);
    EXPECT_EQ(back.metadata.at("note"), "x y");
    ASSERT_EQ(back.tensors.size(), contents.tensors.size());
    for (std::size_t i = 0; i < back.tensors.size(); ++i) {
        EXPECT_EQ(back.tensors[i].first, contents.tensors[i].first);
        EXPECT_TRUE(bitwise_equal(back.tensors[i].second, contents.tensors[i].second)) << back.tensors[i].first;
    }
    auto loaded = model::networks_from(back);
    nets.eval();
    loaded.eval();
    torch::NoGradGuard ng;
    const auto x = random_input(2, 32);
    const auto t = cond(core::Modality::T1, 2);
    EXPECT_TRUE(torch::equal(model::student_forward(nets.generator, x, t).whole,
                             model::student_forward(loaded.generator, x, t).whole));
}

TEST(Checkpoint, MismatchedArchitectureNamesTheParameter) {
    auto cfg = small();
    auto nets = NetworkSet::create(cfg, Role::Teacher, 8);
    const auto contents = model::snapshot(nets, cfg, 0);
    auto wider = cfg;
    wider.base_channels = 8;
    auto other = NetworkSet::create(wider, Role::Teacher, 8);
    try {
        model::restore_networks(other, contents);
        FAIL() << "expected CheckpointError";
    } catch (const CheckpointError& e) {
        EXPECT_NE(std::string(e.what()).find("generator."), std::string::npos) << e.what();
    }
}

TEST(Checkpoint, RejectsForeignFiles) {
    fixture::TempDir tmp("ckbad");
    auto cfg = small();
    auto nets = NetworkSet::create(cfg, Role::Teacher, 9);
    model::write_checkpoint(tmp / "good.utad", model::snapshot(nets, cfg, 0));
    std::ifstream in(tmp / "good.utad", std::ios::binary);
    std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};

    auto write = [&](const std::string& name, const std::string& b) {
        std::ofstream(tmp / name, std::ios::binary) << b;
        return tmp / name;
    };
    auto magic = bytes;
    magic[0] = 'X';
    EXPECT_THROW(model::read_checkpoint(write("magic.utad", magic)), CheckpointError);
    auto version = bytes;
    version[8] = 2;
    try {
        model::read_checkpoint(write("version.utad", version));
        FAIL();
    } catch (const CheckpointError& e) {
        EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
    }
    EXPECT_THROW(model::read_checkpoint(write("short.utad", bytes.substr(0, bytes.size() - 5))), CheckpointError);
    EXPECT_THROW(model::read_checkpoint(tmp / "none.utad"), CheckpointError);
}

TEST(Networks, ParametersStayFiniteUnderSgd) {
    auto nets = NetworkSet::create(small(), Role::Teacher, 10);
    torch::optim::SGD opt(nets.generator->parameters(), 0.1);
    for (int i = 0; i < 5; ++i) {
        const auto x = random_input(2, 32);
        const auto out = model::teacher_forward(nets.generator, x, x, cond(core::Modality::T2, 2));
        opt.zero_grad();
        (out.whole.mean() + out.tumor.pow(2).mean()).backward();
        opt.step();
    }
    for (const auto& p : nets.generator->parameters()) EXPECT_TRUE(torch::isfinite(p).all().item<bool>());
}
