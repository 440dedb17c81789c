#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "test_support.hpp"
#include "uck/errors.hpp"
#include "uck/train.hpp"

using namespace uck;
using test::random_tensor;

TEST_SUITE("train") {

TEST_CASE("cross_entropy worked values and gradient") {
  Tensor even = Tensor::from_data({2}, {0, 0}, true);
  Tensor loss = cross_entropy(even, 0);
  CHECK(loss.value() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  GradMap grads = backward(loss);
  CHECK((*grads.find(even))[0] == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK((*grads.find(even))[1] == doctest::Approx(0.5).epsilon(1e-12));

  Tensor confident = Tensor::from_data({2}, {20, 0});
  CHECK(cross_entropy(confident, 0).value() ==
        doctest::Approx(std::log1p(std::exp(-20.0))).epsilon(1e-9));

  CHECK_THROWS_AS(cross_entropy(even, 2), std::invalid_argument);
  CHECK_THROWS_AS(cross_entropy(Tensor::from_data({3}, {1, 2, 3}), 0), std::invalid_argument);
}

TEST_CASE("clip_grad_norm scales globally and reports the observed norm") {
  std::vector<std::vector<double>> grads{{2.0, 0.0}};
  CHECK(clip_grad_norm(grads, 1.0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(grads[0][0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(grads[0][1] == 0.0);

  std::vector<std::vector<double>> small{{0.3, 0.4}};
  CHECK(clip_grad_norm(small, 1.0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(small[0][0] == 0.3);  // unchanged below the bound

  // Norms combine across tensors: two 2-vectors as one 4-vector.
  std::vector<std::vector<double>> multi{{3.0, 0.0}, {0.0, 4.0}};
  CHECK(clip_grad_norm(multi, 1.0) == doctest::Approx(5.0).epsilon(1e-12));
  const double post = std::sqrt(multi[0][0] * multi[0][0] + multi[1][1] * multi[1][1]);
  CHECK(post == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("cosine_lr schedule") {
  CHECK(cosine_lr(0, 100, 3e-4) == doctest::Approx(3e-4).epsilon(1e-12));
  CHECK(cosine_lr(100, 100, 3e-4) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(cosine_lr(50, 100, 3e-4) == doctest::Approx(1.5e-4).epsilon(1e-12));
  CHECK_THROWS_AS(cosine_lr(101, 100, 3e-4), std::invalid_argument);
}

TEST_CASE("adamw_step matches the hand-applied update") {
  Tensor theta = Tensor::from_data({1}, {1.0}, true);
  std::vector<Tensor*> params{&theta};
  std::vector<std::vector<double>> grads{{0.5}};
  OptimizerState opt;
  const double lr = 3e-4, wd = 1e-2, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  adamw_step(params, grads, opt, lr, wd, {true}, b1, b2, eps);

  // Bias-corrected first step: m_hat = g, v_hat = g^2; decay uses theta=1.
  const double after_decay = 1.0 - lr * wd * 1.0;
  const double expected = after_decay - lr * (0.5 / (0.5 + eps));
  CHECK(theta.at(0) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(std::abs((theta.at(0) - 1.0) - (-3.03e-4)) < 1e-6);
  CHECK(opt.step == 1);

  SUBCASE("zero gradient and zero decay leave parameters unchanged") {
    Tensor fixed = Tensor::from_data({3}, {1.0, -2.0, 0.5}, true);
    std::vector<Tensor*> p2{&fixed};
    std::vector<std::vector<double>> g2{{0.0, 0.0, 0.0}};
    OptimizerState opt2;
    adamw_step(p2, g2, opt2, lr, 0.0, {true}, b1, b2, eps);
    CHECK(fixed.data() == std::vector<double>{1.0, -2.0, 0.5});
  }
}

TEST_CASE("two optimizers with identical streams stay identical") {
  Rng rng(5);
  Tensor a = random_tensor({4, 4}, rng);
  Tensor b = Tensor::from_data(a.shape(), a.data(), true);
  OptimizerState oa, ob;
  Rng grads_rng(17);
  for (int step = 0; step < 25; ++step) {
    std::vector<double> g(16);
    for (auto& v : g) v = grads_rng.uniform(-1, 1);
    std::vector<Tensor*> pa{&a}, pb{&b};
    std::vector<std::vector<double>> ga{g}, gb{g};
    adamw_step(pa, ga, oa, 1e-3, 1e-2, {true}, 0.9, 0.999, 1e-8);
    adamw_step(pb, gb, ob, 1e-3, 1e-2, {true}, 0.9, 0.999, 1e-8);
  }
  CHECK(a.data() == b.data());
}

TEST_CASE("adamw reference trajectory on a 3-parameter toy") {
  // Independent reference implementation of the same update rule.
  double theta[3] = {0.5, -1.0, 2.0};
  double m[3] = {0, 0, 0}, v[3] = {0, 0, 0};
  const double lr = 0.01, wd = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;

  Tensor t = Tensor::from_data({3}, {0.5, -1.0, 2.0}, true);
  std::vector<Tensor*> params{&t};
  OptimizerState opt;

  Rng rng(3);
  for (int step = 1; step <= 10; ++step) {
    std::vector<double> g(3);
    for (auto& x : g) x = rng.uniform(-1, 1);
    std::vector<std::vector<double>> packed{g};
    adamw_step(params, packed, opt, lr, wd, {true}, b1, b2, eps);
    for (int i = 0; i < 3; ++i) {
      m[i] = b1 * m[i] + (1 - b1) * g[i];
      v[i] = b2 * v[i] + (1 - b2) * g[i] * g[i];
      const double mh = m[i] / (1 - std::pow(b1, step));
      const double vh = v[i] / (1 - std::pow(b2, step));
      theta[i] -= lr * wd * theta[i];
      theta[i] -= lr * mh / (std::sqrt(vh) + eps);
    }
  }
  for (int i = 0; i < 3; ++i) CHECK(t.at(i) == doctest::Approx(theta[i]).epsilon(1e-12));
}

TEST_CASE("training config validation aggregates problems") {
  TrainConfig tc;
  tc.learning_rate = 0;
  tc.epochs = 0;
  tc.clip_norm = 0;
  try {
    tc.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("learning_rate") != std::string::npos);
    CHECK(msg.find("epochs") != std::string::npos);
    CHECK(msg.find("clip_norm") != std::string::npos);
  }
}

TEST_CASE("a linear head separates a toy problem within 200 steps") {
  // Two clusters in the plane, one linear layer trained with the optimizer.
  Rng rng(11);
  std::vector<std::vector<double>> xs;
  std::vector<int> ys;
  for (int i = 0; i < 40; ++i) {
    const int label = i % 2;
    const double cx = label == 0 ? -2.0 : 2.0;
    xs.push_back({cx + rng.uniform(-0.5, 0.5), rng.uniform(-1, 1)});
    ys.push_back(label);
  }

  Tensor w = Tensor::zeros({2, 2}, true);
  Tensor b = Tensor::zeros({2}, true);
  OptimizerState opt;
  std::vector<Tensor*> params{&w, &b};

  int steps_to_perfect = -1;
  for (int step = 0; step < 200; ++step) {
    std::vector<std::vector<double>> grads{std::vector<double>(4, 0.0),
                                           std::vector<double>(2, 0.0)};
    int correct = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      Tensor x = Tensor::from_data({1, 2}, xs[i]);
      Tensor logits = reshape(add_rowvec(matmul(x, w), b), {2});
      if ((logits.at(1) > logits.at(0)) == (ys[i] == 1)) ++correct;
      GradMap gm = backward(cross_entropy(logits, ys[i]));
      const double inv = 1.0 / static_cast<double>(xs.size());
      if (const auto* gw = gm.find(w)) {
        for (int j = 0; j < 4; ++j) grads[0][j] += (*gw)[j] * inv;
      }
      if (const auto* gb = gm.find(b)) {
        for (int j = 0; j < 2; ++j) grads[1][j] += (*gb)[j] * inv;
      }
    }
    if (correct == static_cast<int>(xs.size())) {
      steps_to_perfect = step;
      break;
    }
    clip_grad_norm(grads, 1.0);
    adamw_step(params, grads, opt, 0.05, 0.0, {true, true}, 0.9, 0.999, 1e-8);
  }
  CHECK(steps_to_perfect >= 0);
  CHECK(steps_to_perfect < 200);
}

TEST_CASE("train loop on a small dataset") {
  TaskSpec spec;
  spec.task = Task::Reachability;
  spec.size = 6;
  spec.count = 60;
  spec.seed = 4;
  auto data = generate_dataset(spec);

  ModelConfig mc;
  mc.d_model = 16;
  mc.d_rule = 16;
  mc.num_rules = 4;
  mc.rollout_steps = 2;
  mc.in_features = 3;
  mc.seed = 5;
  Model model = Model::init(mc);

  TrainConfig tc;
  tc.epochs = 10;
  tc.batch_size = 16;
  tc.learning_rate = 3e-3;
  tc.seed = 5;
  TrainResult result = train(model, data, tc);
  REQUIRE(result.log.size() == 10);

  SUBCASE("loss trends down") {
    CHECK(result.log.back().mean_loss < result.log.front().mean_loss);
  }
  SUBCASE("last lr is near zero") {
    CHECK(result.log.back().lr_last < tc.learning_rate * 0.05);
  }
  SUBCASE("same seed reproduces the epoch log exactly") {
    Model again = Model::init(mc);
    TrainResult second = train(again, data, tc);
    for (std::size_t i = 0; i < result.log.size(); ++i) {
      CHECK(result.log[i].mean_loss == second.log[i].mean_loss);
      CHECK(result.log[i].train_acc == second.log[i].train_acc);
      CHECK(result.log[i].lr_last == second.log[i].lr_last);
    }
  }
  SUBCASE("empty dataset is rejected") {
    Model fresh = Model::init(mc);
    CHECK_THROWS_AS(train(fresh, {}, tc), ConfigError);
  }
  SUBCASE("log round-trips through the jsonl file") {
    const std::string dir = test::scratch_dir("train_log");
    write_train_log(dir + "/log.jsonl", result.log);
    auto loaded = read_train_log(dir + "/log.jsonl");
    REQUIRE(loaded.size() == result.log.size());
    for (std::size_t i = 0; i < loaded.size(); ++i) {
      CHECK(loaded[i].epoch == result.log[i].epoch);
      CHECK(loaded[i].mean_loss == result.log[i].mean_loss);
    }
  }
}

TEST_CASE("loss decreases over a 3-seed median on a toy set") {
  TaskSpec spec;
  spec.task = Task::Reachability;
  spec.size = 5;
  spec.count = 20;
  spec.seed = 9;
  auto data = generate_dataset(spec);

  std::vector<double> first_epoch, tenth_epoch;
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    ModelConfig mc;
    mc.d_model = 12;
    mc.d_rule = 12;
    mc.num_rules = 3;
    mc.rollout_steps = 2;
    mc.seed = seed;
    Model model = Model::init(mc);
    TrainConfig tc;
    tc.epochs = 10;
    tc.batch_size = 10;
    tc.learning_rate = 3e-3;
    tc.seed = seed;
    auto log = train(model, data, tc).log;
    first_epoch.push_back(log.front().mean_loss);
    tenth_epoch.push_back(log.back().mean_loss);
  }
  std::sort(first_epoch.begin(), first_epoch.end());
  std::sort(tenth_epoch.begin(), tenth_epoch.end());
  CHECK(tenth_epoch[1] < first_epoch[1]);  // medians
}

}  // TEST_SUITE
