#include <doctest.h>

#include <cmath>
#include <string>

#include "rlstruct/config.hpp"
#include "rlstruct/errors.hpp"
#include "rlstruct/optimizer.hpp"

using namespace rlstruct;

TEST_SUITE("config") {
  TEST_CASE("dotted keys set nested fields") {
    const TrainConfig cfg = parse_config(
        "# toy\n"
        "grpo.group_size = 4\n"
        "reward.w_valid=0.25\n"
        "\n"
        "optimizer.schedule = constant   # inline comment\n"
        "task.schema = recipe\n"
        "grpo.ratio_level = token\n");
    CHECK(cfg.grpo.group_size == 4);
    CHECK(cfg.reward.w_valid == 0.25);
    CHECK(cfg.optimizer.schedule == Schedule::Constant);
    CHECK(cfg.task.schema == "recipe");
    CHECK(cfg.grpo.ratio_level == RatioLevel::Token);
  }

  TEST_CASE("rendered configs parse back to the same rendering") {
    TrainConfig cfg;
    apply_override(cfg, "reward.l_max=300");
    apply_override(cfg, "optimizer.learning_rate=0.0007");
    apply_override(cfg, "curriculum.baseline=zero");
    const std::string text = render_config(cfg);
    CHECK(render_config(parse_config(text)) == text);
    for (const auto& f : config_fields()) CHECK(text.find(f.key + " = ") != std::string::npos);
  }

  TEST_CASE("bad input is rejected") {
    TrainConfig cfg;
    CHECK_THROWS_AS(apply_override(cfg, "grpo.bogus=1"), ConfigError);
    CHECK_THROWS_AS(apply_override(cfg, "grpo.group_size=eight"), ConfigError);
    CHECK_THROWS_AS(apply_override(cfg, "grpo.group_size"), ConfigError);
    CHECK_THROWS_AS(apply_override(cfg, "optimizer.schedule=linear"), ConfigError);
    CHECK_THROWS_AS(parse_config("grpo.group_size = 1\n").validate(), ConfigError);
    CHECK_THROWS_AS(parse_config("optimizer.total_steps = 0\n").validate(), ConfigError);
    CHECK_THROWS_AS(parse_config("reward.w_struct = -1\n").validate(), ConfigError);
    CHECK_NOTHROW(parse_config("optimizer.learning_rate = 0\n").validate());
  }

  TEST_CASE("the shipped toy config is the default config") {
    const TrainConfig cfg = load_config_file(std::string(RLSTRUCT_SOURCE_DIR) + "/cfg/toy.cfg");
    CHECK(render_config(cfg) == render_config(TrainConfig{}));
  }

  TEST_CASE("defaults") {
    const TrainConfig cfg;
    CHECK(cfg.grpo.group_size == 8);
    CHECK(cfg.grpo.clip_eps == 0.2);
    CHECK(cfg.grpo.kl_beta == 0.02);
    CHECK(cfg.optimizer.batch_size == 4);
    CHECK(cfg.warm_start_steps == 200);
    CHECK(cfg.curriculum.fraction == 0.9);
    CHECK(cfg.curriculum.window == 5);
    CHECK(cfg.curriculum.plateau_tail == 0.1);
    CHECK_NOTHROW(cfg.validate());
  }
}

TEST_SUITE("optimizer") {
  TEST_CASE("cosine schedule reaches the floor at the final step") {
    OptimizerConfig cfg;
    cfg.learning_rate = 1e-3;
    cfg.total_steps = 250;
    CHECK(scheduled_lr(cfg, 0) == 1e-3);
    CHECK(scheduled_lr(cfg, 249) <= 0.01 * 1e-3);
    for (int s = 1; s < 250; ++s) CHECK(scheduled_lr(cfg, s) <= scheduled_lr(cfg, s - 1));
    cfg.min_lr_ratio = 0.1;
    CHECK(scheduled_lr(cfg, 249) == doctest::Approx(1e-4).epsilon(1e-12));
    cfg.schedule = Schedule::Constant;
    CHECK(scheduled_lr(cfg, 249) == 1e-3);
  }

  TEST_CASE("gradient clipping") {
    Gradient g;
    g.data = {{3.0, 0.0}, {4.0}};
    CHECK(clip_gradient(g, 10.0) == 5.0);
    CHECK(g.data[1][0] == 4.0);
    CHECK(clip_gradient(g, 1.0) == 5.0);
    CHECK(g.norm() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(g.data[0][0] == doctest::Approx(0.6).epsilon(1e-15));
  }

  TEST_CASE("first Adam step moves each weight by the learning rate") {
    PolicyConfig pc;
    pc.vocab_size = 8;
    pc.embed_dim = 4;
    pc.layers = 1;
    pc.mlp_dim = 4;
    pc.context = 8;
    PolicyParams p = PolicyParams::init(pc);
    const PolicyParams before = p;
    Gradient g = p.zero_gradient();
    for (auto& t : g.data)
      for (std::size_t k = 0; k < t.size(); ++k) t[k] = (k % 2 == 0) ? 2.0 : -0.5;
    Adam adam(p, 0.9, 0.999, 0.0);
    adam.step(p, g, 0.01);
    for (std::size_t i = 0; i < p.tensors().size(); ++i) {
      for (std::size_t k = 0; k < p.tensors()[i].data.size(); ++k) {
        const double moved = p.tensors()[i].data[k] - before.tensors()[i].data[k];
        CHECK(moved == doctest::Approx(k % 2 == 0 ? -0.01 : 0.01).epsilon(1e-9));
      }
    }
  }

  TEST_CASE("frozen tensors never move") {
    PolicyConfig pc;
    pc.vocab_size = 8;
    pc.embed_dim = 4;
    pc.layers = 1;
    pc.mlp_dim = 4;
    pc.context = 8;
    PolicyParams p = PolicyParams::init(pc);
    p.enable_adapters(2, 4.0, 1);
    const PolicyParams before = p;
    Gradient g = p.zero_gradient();
    for (auto& t : g.data)
      for (auto& x : t) x = 1.0;
    Adam adam(p);
    adam.step(p, g, 0.1);
    for (std::size_t i = 0; i < p.tensors().size(); ++i) {
      if (p.tensors()[i].trainable) {
        CHECK(p.tensors()[i].data != before.tensors()[i].data);
      } else {
        CHECK(p.tensors()[i].data == before.tensors()[i].data);
      }
    }
  }
}
