#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "utad/error.hpp"
#include "utad/model/checkpoint.hpp"
#include "utad/train/trainer.hpp"

using namespace utad;

namespace {

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Data rows of a losses.csv as (epoch, step, values...).
std::vector<std::vector<double>> csv_rows(const std::filesystem::path& p) {
    std::vector<std::vector<double>> rows;
    std::ifstream in(p);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("epoch", 0) == 0) continue;
        std::vector<double> r;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) r.push_back(std::stod(cell));
        rows.push_back(r);
    }
    return rows;
}

bool same_tensors(const model::NetworkSet& a, const model::NetworkSet& b) {
    const auto ta = a.named_tensors(), tb = b.named_tensors();
    if (ta.size() != tb.size()) return false;
    for (std::size_t i = 0; i < ta.size(); ++i) {
        if (ta[i].first != tb[i].first || !torch::equal(ta[i].second, tb[i].second)) return false;
    }
    return true;
}

model::NetworkSet clone_nets(const model::NetworkSet& src, const core::ExperimentConfig& cfg) {
    return model::networks_from(model::snapshot(src, cfg, 0));
}

class TrainFixture : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        tmp_ = new fixture::TempDir("train");
        manifest_ = new data::DatasetManifest(fixture::make_phantom(tmp_->path() / "data", 4, 6, 24, 3, 1, 1));
    }
    static void TearDownTestSuite() {
        delete manifest_;
        delete tmp_;
    }
    static std::vector<train::Batch> batches(const core::ExperimentConfig& cfg, int n, core::MaskMode mode = core::MaskMode::WT) {
        const auto ds = data::SliceDataset::load(*manifest_, data::Split::Train, data::LoadOptions::from_config(cfg));
        data::UnpairedSampler sampler(ds, mode, cfg.seed, false);
        std::vector<train::Batch> out;
        while (static_cast<int>(out.size()) < n) {
            sampler.begin_epoch();
            while (sampler.remaining() >= static_cast<std::size_t>(cfg.batch_size) && static_cast<int>(out.size()) < n) {
                out.push_back(train::Batch::from_items(sampler.next_batch(cfg.batch_size)));
            }
        }
        return out;
    }
    static fixture::TempDir* tmp_;
    static data::DatasetManifest* manifest_;
};
fixture::TempDir* TrainFixture::tmp_ = nullptr;
data::DatasetManifest* TrainFixture::manifest_ = nullptr;

}  // namespace

TEST(Schedule, DefaultExamples) {
    core::ExperimentConfig cfg;
    for (int e = 0; e < 50; ++e) EXPECT_EQ(train::lr_at_epoch(e, cfg), 1e-4);
    EXPECT_EQ(train::lr_at_epoch(99, cfg), 1e-6);
    EXPECT_NEAR(train::lr_at_epoch(75, cfg), 1e-4 + (75.0 - 50) / (99 - 50) * (1e-6 - 1e-4), 1e-18);
    EXPECT_NEAR(train::lr_at_epoch(75, cfg), 4.949e-5, 1e-8);
    for (int e = 1; e < 100; ++e) EXPECT_LE(train::lr_at_epoch(e, cfg), train::lr_at_epoch(e - 1, cfg));
    // piecewise linear: equal steps after the plateau
    const double d1 = train::lr_at_epoch(60, cfg) - train::lr_at_epoch(61, cfg);
    const double d2 = train::lr_at_epoch(90, cfg) - train::lr_at_epoch(91, cfg);
    EXPECT_NEAR(d1, d2, 1e-15);
    EXPECT_THROW(train::lr_at_epoch(100, cfg), InvalidInput);
    EXPECT_THROW(train::lr_at_epoch(-1, cfg), InvalidInput);
}

TEST(Schedule, ShortRuns) {
    core::ExperimentConfig cfg;
    cfg.epochs = 3;
    cfg.lr_constant_epochs = 3;
    EXPECT_EQ(train::lr_at_epoch(2, cfg), cfg.lr_initial);
    cfg.lr_constant_epochs = 0;
    EXPECT_EQ(train::lr_at_epoch(0, cfg), cfg.lr_initial);
    EXPECT_EQ(train::lr_at_epoch(2, cfg), cfg.lr_final);
}

TEST(Optim, AdamMomentsComeFromConfig) {
    auto cfg = fixture::tiny_config();
    auto nets = model::NetworkSet::create(cfg, model::Role::Teacher, 1);
    auto opt = train::Optimizers::create(nets, cfg);
    for (auto* o : {opt.generator.get(), opt.global_critic.get(), opt.local_critic.get()}) {
        ASSERT_NE(o, nullptr);
        const auto& a = static_cast<const torch::optim::AdamOptions&>(o->param_groups()[0].options());
        EXPECT_EQ(std::get<0>(a.betas()), 0.9);
        EXPECT_EQ(std::get<1>(a.betas()), 0.999);
    }
    opt.set_lr(3e-5);
    EXPECT_EQ(static_cast<torch::optim::AdamOptions&>(opt.local_critic->param_groups()[0].options()).lr(), 3e-5);
}

TEST_F(TrainFixture, TeacherStepsStayFiniteAndCriticOnlyStepsLeaveTheGenerator) {
    auto cfg = fixture::tiny_config();
    cfg.batch_size = 2;
    torch::manual_seed(cfg.seed);
    auto nets = model::NetworkSet::create(cfg, model::Role::Teacher, cfg.seed);
    auto opt = train::Optimizers::create(nets, cfg);
    core::Rng rng(1);
    const auto bs = batches(cfg, 50);
    for (const auto& b : bs) {
        const auto l = train::teacher_step(b, nets, opt, cfg, rng);
        EXPECT_EQ(l.first_non_finite(), "");
        EXPECT_GE(l.cls_fake, 0);
        EXPECT_GE(l.rec, 0);
        EXPECT_GE(l.local, 0);
        EXPECT_EQ(l.dis, 0);
    }
    for (const auto& [n, t] : nets.named_tensors()) EXPECT_TRUE(torch::isfinite(t).all().item<bool>()) << n;

    const auto before = model::snapshot(nets, cfg, 0);
    train::teacher_step(bs[0], nets, opt, cfg, rng, /*update_generator=*/false);
    const auto after = model::snapshot(nets, cfg, 0);
    for (std::size_t i = 0; i < before.tensors.size(); ++i) {
        const bool generator = before.tensors[i].first.rfind("generator.", 0) == 0;
        if (generator) EXPECT_TRUE(torch::equal(before.tensors[i].second, after.tensors[i].second)) << before.tensors[i].first;
    }
    EXPECT_FALSE(torch::equal(model::find_tensor(before, "critic_g.src_head.weight"), model::find_tensor(after, "critic_g.src_head.weight")));
}

TEST_F(TrainFixture, NonFiniteLossNamesTheTerm) {
    auto cfg = fixture::tiny_config();
    cfg.lambda_gp = std::numeric_limits<double>::infinity();
    auto nets = model::NetworkSet::create(cfg, model::Role::Teacher, 2);
    auto opt = train::Optimizers::create(nets, cfg);
    core::Rng rng(2);
    try {
        train::teacher_step(batches(cfg, 1)[0], nets, opt, cfg, rng);
        FAIL();
    } catch (const NonFiniteLoss& e) {
        EXPECT_EQ(e.term(), "adv_g");
    }
}

TEST_F(TrainFixture, StudentNeverTouchesTheFrozenTeacher) {
    auto cfg = fixture::tiny_config();
    cfg.batch_size = 2;
    auto teacher = model::NetworkSet::create(cfg, model::Role::Teacher, 3);
    train::freeze(teacher);
    const auto reference = clone_nets(teacher, cfg);
    auto student = model::NetworkSet::create(cfg, model::Role::Student, 4);
    auto opt = train::Optimizers::create(student, cfg);
    core::Rng rng(3);
    const auto bs = batches(cfg, 100);
    for (const auto& b : bs) {
        const auto l = train::student_step(b, student, teacher, opt, cfg, rng);
        EXPECT_GT(l.dis, 0);
    }
    EXPECT_TRUE(same_tensors(teacher, reference));
    EXPECT_THROW(train::student_step(bs[0], teacher, teacher, opt, cfg, rng), InvalidInput);
    EXPECT_THROW(train::teacher_step(bs[0], student, opt, cfg, rng), InvalidInput);
}

TEST_F(TrainFixture, WithoutDistillationWeightTheTeacherIsIrrelevant) {
    auto cfg = fixture::tiny_config();
    cfg.batch_size = 2;
    const auto bs = batches(cfg, 3);
    auto run = [&](double lambda_2, std::uint64_t teacher_seed) {
        auto c = cfg;
        c.lambda_2 = lambda_2;
        auto teacher = model::NetworkSet::create(c, model::Role::Teacher, teacher_seed);
        train::freeze(teacher);
        auto student = model::NetworkSet::create(c, model::Role::Student, 9);
        auto opt = train::Optimizers::create(student, c);
        core::Rng rng(4);
        losses::LossBreakdown last;
        for (const auto& b : bs) last = train::student_step(b, student, teacher, opt, c, rng);
        return std::make_pair(std::move(student), last);
    };
    auto [a, la] = run(0.0, 11);
    auto [b, lb] = run(0.0, 12);
    EXPECT_TRUE(same_tensors(a, b));
    EXPECT_EQ(la.total_G, lb.total_G);
    EXPECT_NE(la.dis, lb.dis);  // measured, but weighted out
    EXPECT_NEAR(la.total_G, la.gen_adv_g + la.gen_adv_l + la.cls_fake + cfg.lambda_1 * (la.rec + la.local), 1e-6);
    auto [c, lc] = run(10.0, 11);
    auto [d, ld] = run(10.0, 12);
    EXPECT_FALSE(same_tensors(c, d));
    EXPECT_NEAR(lc.total_G - (lc.gen_adv_g + lc.gen_adv_l + lc.cls_fake + cfg.lambda_1 * (lc.rec + lc.local)),
                10.0 * lc.dis, 1e-6);
}

TEST_F(TrainFixture, FixedSeedRunsReproduceTheLossLogBitwise) {
    auto cfg = fixture::tiny_config();
    train::RunOptions o;
    o.validation_slices = 4;
    o.write_samples = false;
    o.out_dir = tmp_->path() / "det_a";
    const auto ra = train::run_training(*manifest_, cfg, o);
    o.out_dir = tmp_->path() / "det_b";
    train::run_training(*manifest_, cfg, o);
    const auto a = read_file(tmp_->path() / "det_a" / "losses.csv");
    EXPECT_EQ(a, read_file(tmp_->path() / "det_b" / "losses.csv"));
    EXPECT_EQ(a.rfind("# config_hash=" + cfg.hash(), 0), 0u);
    EXPECT_EQ(csv_rows(tmp_->path() / "det_a" / "losses.csv").size(), 6u);  // 2 epochs × 3 steps
    EXPECT_TRUE(std::filesystem::exists(tmp_->path() / "det_a" / "final.utad"));
    EXPECT_TRUE(std::filesystem::exists(tmp_->path() / "det_a" / train::checkpoint_name(1)));
    EXPECT_TRUE(std::filesystem::exists(tmp_->path() / "det_a" / "validation.csv"));
    EXPECT_EQ(core::ExperimentConfig::load(tmp_->path() / "det_a" / "config.resolved"), cfg);
    EXPECT_EQ(ra.epochs.size(), 2u);
    EXPECT_EQ(ra.state.step, 6);
}

TEST_F(TrainFixture, ResumedRunMatchesUninterrupted) {
    auto cfg = fixture::tiny_config();
    cfg.epochs = 3;
    train::RunOptions o;
    o.validation_slices = 0;
    o.write_samples = false;
    o.out_dir = tmp_->path() / "full";
    train::run_training(*manifest_, cfg, o);

    o.out_dir = tmp_->path() / "split";
    o.stop_after_epoch = 1;
    train::run_training(*manifest_, cfg, o);
    o.stop_after_epoch = -1;
    o.resume_from = tmp_->path() / "split" / train::checkpoint_name(1);
    train::run_training(*manifest_, cfg, o);

    const auto full = csv_rows(tmp_->path() / "full" / "losses.csv");
    const auto split = csv_rows(tmp_->path() / "split" / "losses.csv");
    ASSERT_EQ(full.size(), split.size());
    for (std::size_t r = 0; r < full.size(); ++r) {
        for (std::size_t c = 0; c < full[r].size(); ++c) EXPECT_NEAR(full[r][c], split[r][c], 1e-6) << r << "," << c;
    }
    const auto a = model::read_checkpoint(tmp_->path() / "full" / "final.utad");
    const auto b = model::read_checkpoint(tmp_->path() / "split" / "final.utad");
    for (std::size_t i = 0; i < a.tensors.size(); ++i) {
        EXPECT_TRUE(torch::allclose(a.tensors[i].second, b.tensors[i].second, 0, 1e-6)) << a.tensors[i].first;
    }

    auto other = cfg;
    other.lambda_1 = 5;
    EXPECT_THROW(train::run_training(*manifest_, other, o), InvalidInput);
}

TEST_F(TrainFixture, StudentRunNeedsACompatibleTeacher) {
    auto cfg = fixture::tiny_config();
    cfg.epochs = 1;
    cfg.lr_constant_epochs = 1;
    train::RunOptions o;
    o.validation_slices = 0;
    o.write_samples = false;
    o.out_dir = tmp_->path() / "t1";
    const auto teacher = train::run_training(*manifest_, cfg, o);

    o.role = model::Role::Student;
    o.out_dir = tmp_->path() / "s_missing";
    EXPECT_THROW(train::run_training(*manifest_, cfg, o), InvalidInput);
    auto wider = cfg;
    wider.base_channels = 8;
    o.teacher_checkpoint = teacher.final_checkpoint;
    o.out_dir = tmp_->path() / "s_wide";
    EXPECT_THROW(train::run_training(*manifest_, wider, o), ShapeMismatch);
    o.out_dir = tmp_->path() / "s_ok";
    const auto s = train::run_training(*manifest_, cfg, o);
    EXPECT_EQ(model::read_checkpoint(s.final_checkpoint).role, model::Role::Student);
    o.teacher_checkpoint = s.final_checkpoint;
    o.out_dir = tmp_->path() / "s_of_s";
    EXPECT_THROW(train::run_training(*manifest_, cfg, o), InvalidInput);
}

TEST_F(TrainFixture, DistillationDecreasesOverTheFirstEpochs) {
    auto cfg = fixture::tiny_config();
    cfg.epochs = 4;
    cfg.lr_constant_epochs = 4;
    cfg.max_steps_per_epoch = 0;
    cfg.lr_initial = 1e-3;
    cfg.batch_size = 2;
    train::RunOptions o;
    o.validation_slices = 0;
    o.write_samples = false;
    o.out_dir = tmp_->path() / "dt";
    const auto teacher = train::run_training(*manifest_, cfg, o);

    std::vector<std::vector<double>> dis;  // [seed][epoch]
    for (std::uint64_t seed : {1, 2, 3}) {
        auto c = cfg;
        c.seed = seed;
        train::RunOptions so = o;
        so.role = model::Role::Student;
        so.teacher_checkpoint = teacher.final_checkpoint;
        so.out_dir = tmp_->path() / ("ds" + std::to_string(seed));
        const auto r = train::run_training(*manifest_, c, so);
        dis.emplace_back();
        for (const auto& e : r.epochs) dis.back().push_back(e.mean.dis);
    }
    auto median_at = [&](std::size_t e) {
        std::vector<double> v{dis[0][e], dis[1][e], dis[2][e]};
        std::sort(v.begin(), v.end());
        return v[1];
    };
    for (std::size_t e = 1; e < dis[0].size(); ++e) EXPECT_LT(median_at(e), median_at(e - 1)) << "epoch " << e;
}
