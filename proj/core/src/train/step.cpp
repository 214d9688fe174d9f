#include <cmath>

#include "utad/error.hpp"
#include "utad/model/tensors.hpp"
#include "utad/train/trainer.hpp"

namespace utad::train {

double lr_at_epoch(int e, const core::ExperimentConfig& cfg) {
    if (e < 0 || e >= cfg.epochs) {
        throw InvalidInput("lr_at_epoch: epoch " + std::to_string(e) + " outside [0, " + std::to_string(cfg.epochs) + ")");
    }
    if (e < cfg.lr_constant_epochs) return cfg.lr_initial;
    if (e == cfg.epochs - 1) return cfg.lr_final;
    const double frac = static_cast<double>(e - cfg.lr_constant_epochs) / static_cast<double>(cfg.epochs - 1 - cfg.lr_constant_epochs);
    return cfg.lr_initial + frac * (cfg.lr_final - cfg.lr_initial);
}

Batch Batch::from_items(const std::vector<data::SamplerItem>& items) {
    if (items.empty()) throw InvalidInput("batch: no samples");
    std::vector<core::ImageSlice> images;
    std::vector<core::TumorMask> masks;
    std::vector<core::Modality> sources, targets;
    for (const auto& it : items) {
        if (it.sample.image.space != core::IntensitySpace::Unit) throw InvalidInput("batch: samples must be in [0,1] space");
        images.push_back(it.sample.image);
        masks.push_back(it.sample.mask);
        sources.push_back(it.sample.modality);
        targets.push_back(it.target);
    }
    Batch b;
    b.image = model::stack_images(images) * 2 - 1;
    b.mask = model::stack_masks(masks);
    b.source = model::modality_indices(sources);
    b.target = model::modality_indices(targets);
    return b;
}

namespace {

torch::optim::AdamOptions adam_options(const core::ExperimentConfig& cfg) {
    return torch::optim::AdamOptions(cfg.lr_initial).betas(std::make_tuple(cfg.moment_1, cfg.moment_2));
}

void set_requires_grad(model::Critic& c, bool on) {
    if (!c) return;
    for (auto& p : c->parameters()) p.set_requires_grad(on);
}

double value_of(const torch::Tensor& t) { return t.item<double>(); }

void check_finite(const losses::LossBreakdown& b) {
    const std::string bad = b.first_non_finite();
    if (bad.empty()) return;
    const auto cols = losses::LossBreakdown::columns();
    const auto vals = b.values();
    for (std::size_t i = 0; i < cols.size(); ++i) {
        if (cols[i] == bad) throw NonFiniteLoss(bad, vals[i]);
    }
}

losses::LossBreakdown train_step(const Batch& batch, model::NetworkSet& nets, model::NetworkSet* teacher,
                                 Optimizers& opt, const core::ExperimentConfig& cfg, core::Rng& rng,
                                 bool update_generator) {
    const bool student = nets.role == model::Role::Student;
    if (student && !teacher) throw InvalidInput("student step without a teacher");
    const torch::Tensor& image = batch.image;
    const torch::Tensor tumor_src = model::mask_network(image, batch.mask);
    const torch::Tensor to_target = model::one_hot_condition(batch.target);
    const torch::Tensor to_source = model::one_hot_condition(batch.source);
    model::Generator& g = nets.generator;
    auto forward = [&](const torch::Tensor& x, const torch::Tensor& tumor, const torch::Tensor& cond) {
        return student ? model::student_forward(g, x, cond) : model::teacher_forward(g, x, tumor, cond);
    };
    const auto critic_g = losses::as_critic(nets.global_critic);
    const losses::CriticFn critic_l = nets.has_local() ? losses::as_critic(nets.local_critic) : losses::CriticFn{};

    losses::LossBreakdown b;

    // Critics: Wasserstein objective with gradient penalty plus real-image classification.
    {
        model::TranslationOutput fake;
        {
            torch::NoGradGuard no_grad;
            fake = forward(image, tumor_src, to_target);
        }
        const auto adv_g = losses::adversarial_critic_objective(critic_g, image, fake.whole, cfg.lambda_gp, rng);
        const auto cls_g = losses::cls_loss_real(critic_g, image, batch.source);
        torch::Tensor loss_d = losses::critic_total(adv_g.l_adv, cls_g);
        b.adv_g = value_of(adv_g.l_adv);
        b.gp_g = value_of(adv_g.gp);
        b.cls_real_g = value_of(cls_g);
        if (nets.has_local()) {
            const auto adv_l = losses::adversarial_critic_objective(critic_l, tumor_src, fake.tumor, cfg.lambda_gp, rng);
            const auto cls_l = losses::cls_loss_real(critic_l, tumor_src, batch.source);
            loss_d = loss_d + losses::critic_total(adv_l.l_adv, cls_l);
            b.adv_l = value_of(adv_l.l_adv);
            b.gp_l = value_of(adv_l.gp);
            b.cls_real_l = value_of(cls_l);
        }
        check_finite(b);
        opt.global_critic->zero_grad();
        if (opt.local_critic) opt.local_critic->zero_grad();
        loss_d.backward();
        opt.global_critic->step();
        if (opt.local_critic) opt.local_critic->step();
    }

    if (update_generator) {
        set_requires_grad(nets.global_critic, false);
        set_requires_grad(nets.local_critic, false);
        const auto out = forward(image, tumor_src, to_target);
        const torch::Tensor zero = torch::zeros({}, image.options());
        const torch::Tensor gen_adv_g = losses::adversarial_generator_term(critic_g, out.whole);
        const torch::Tensor gen_adv_l = out.has_tumor() ? losses::adversarial_generator_term(critic_l, out.tumor) : zero;
        const auto cls_fake = losses::cls_loss_fake(critic_g, critic_l, out.whole, out.tumor, batch.target);

        // Cycle back to the source modality. The teacher's tumor input is the
        // generated image under the source mask; the student sees only the image.
        const torch::Tensor masked_tgt = model::mask_network(out.whole, batch.mask);
        const auto cycle = forward(out.whole, masked_tgt, to_source);
        const torch::Tensor rec = losses::reconstruct_loss(image, cycle.whole);
        const torch::Tensor local =
            out.has_tumor() ? losses::local_consistency_loss(out.tumor, masked_tgt, tumor_src, cycle.tumor) : zero;

        torch::Tensor dis = zero;
        if (student) {
            model::TranslationOutput t;
            {
                torch::NoGradGuard no_grad;
                t = model::teacher_forward(teacher->generator, image, tumor_src, to_target);
            }
            if (!t.fused_feature.sizes().equals(out.feature_tap.sizes())) {
                throw ShapeMismatch("teacher fused feature and student tap differ in shape");
            }
            dis = losses::distillation_loss(t.fused_feature, out.feature_tap, t.whole, out.whole);
        }
        const torch::Tensor total = losses::generator_total(gen_adv_g, gen_adv_l, cls_fake.total, rec, local, dis,
                                                            cfg.lambda_1, cfg.lambda_2, nets.role);
        b.gen_adv_g = value_of(gen_adv_g);
        b.gen_adv_l = value_of(gen_adv_l);
        b.cls_fake = value_of(cls_fake.total);
        b.rec = value_of(rec);
        b.local = value_of(local);
        b.dis = value_of(dis);
        check_finite(b);
        opt.generator->zero_grad();
        total.backward();
        opt.generator->step();
        set_requires_grad(nets.global_critic, true);
        set_requires_grad(nets.local_critic, true);
    }
    b = losses::total_losses(b, cfg.lambda_1, cfg.lambda_2, nets.role);
    check_finite(b);
    return b;
}

template <class Fn>
void for_each_param(const torch::nn::Module& m, Fn fn) {
    for (const auto& p : m.named_parameters()) fn(p.key(), p.value());
}

void save_adam(const torch::optim::Adam& opt, const std::string& which, const torch::nn::Module& module,
               model::NamedTensors& tensors, std::map<std::string, std::string>& metadata) {
    const auto& state = opt.state();
    for_each_param(module, [&](const std::string& name, const torch::Tensor& p) {
        auto it = state.find(p.unsafeGetTensorImpl());
        if (it == state.end()) return;
        const auto& s = static_cast<const torch::optim::AdamParamState&>(*it->second);
        const std::string key = "optim." + which + "." + name;
        tensors.emplace_back(key + ".exp_avg", s.exp_avg().detach().clone());
        tensors.emplace_back(key + ".exp_avg_sq", s.exp_avg_sq().detach().clone());
        metadata[key + ".step"] = std::to_string(s.step());
    });
}

void load_adam(torch::optim::Adam& opt, const std::string& which, const torch::nn::Module& module,
               const model::CheckpointContents& c) {
    auto& state = opt.state();
    for_each_param(module, [&](const std::string& name, const torch::Tensor& p) {
        const std::string key = "optim." + which + "." + name;
        const auto step = c.metadata.find(key + ".step");
        if (step == c.metadata.end()) return;
        const torch::Tensor m1 = model::find_tensor(c, key + ".exp_avg");
        const torch::Tensor m2 = model::find_tensor(c, key + ".exp_avg_sq");
        if (!m1.defined() || !m2.defined() || !m1.sizes().equals(p.sizes()) || !m2.sizes().equals(p.sizes())) {
            throw CheckpointError("optimizer state for '" + name + "' is missing or has the wrong shape");
        }
        auto s = std::make_unique<torch::optim::AdamParamState>();
        s->step(std::stoll(step->second));
        s->exp_avg(m1.clone());
        s->exp_avg_sq(m2.clone());
        state[p.unsafeGetTensorImpl()] = std::move(s);
    });
}

}  // namespace

Optimizers Optimizers::create(model::NetworkSet& nets, const core::ExperimentConfig& cfg) {
    Optimizers o;
    o.generator = std::make_unique<torch::optim::Adam>(nets.generator->parameters(), adam_options(cfg));
    o.global_critic = std::make_unique<torch::optim::Adam>(nets.global_critic->parameters(), adam_options(cfg));
    if (nets.local_critic) {
        o.local_critic = std::make_unique<torch::optim::Adam>(nets.local_critic->parameters(), adam_options(cfg));
    }
    return o;
}

void Optimizers::set_lr(double lr) {
    for (auto* opt : {generator.get(), global_critic.get(), local_critic.get()}) {
        if (!opt) continue;
        for (auto& group : opt->param_groups()) static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
    }
}

void Optimizers::save_state(const model::NetworkSet& nets, model::NamedTensors& tensors,
                            std::map<std::string, std::string>& metadata) const {
    save_adam(*generator, "generator", *nets.generator, tensors, metadata);
    save_adam(*global_critic, "critic_g", *nets.global_critic, tensors, metadata);
    if (local_critic) save_adam(*local_critic, "critic_l", *nets.local_critic, tensors, metadata);
}

void Optimizers::load_state(const model::NetworkSet& nets, const model::CheckpointContents& contents) {
    load_adam(*generator, "generator", *nets.generator, contents);
    load_adam(*global_critic, "critic_g", *nets.global_critic, contents);
    if (local_critic) load_adam(*local_critic, "critic_l", *nets.local_critic, contents);
}

void freeze(model::NetworkSet& nets) {
    for (const auto& [name, t] : nets.named_tensors()) t.set_requires_grad(false);
    nets.eval();
}

losses::LossBreakdown teacher_step(const Batch& batch, model::NetworkSet& nets, Optimizers& opt,
                                   const core::ExperimentConfig& cfg, core::Rng& rng, bool update_generator) {
    if (nets.role != model::Role::Teacher) throw InvalidInput("teacher_step: networks are not a teacher");
    return train_step(batch, nets, nullptr, opt, cfg, rng, update_generator);
}

losses::LossBreakdown student_step(const Batch& batch, model::NetworkSet& student, model::NetworkSet& teacher,
                                   Optimizers& opt, const core::ExperimentConfig& cfg, core::Rng& rng,
                                   bool update_generator) {
    if (student.role != model::Role::Student) throw InvalidInput("student_step: networks are not a student");
    if (teacher.role != model::Role::Teacher) throw InvalidInput("student_step: distillation source is not a teacher");
    return train_step(batch, student, &teacher, opt, cfg, rng, update_generator);
}

}  // namespace utad::train
