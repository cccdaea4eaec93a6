#include <catch2/catch_amalgamated.hpp>

#include "hvtr/adam.hpp"
#include "hvtr/checkpoint.hpp"
#include "hvtr/kernels.hpp"
#include "hvtr/rng.hpp"

#include <filesystem>

using namespace hvtr;

TEST_CASE("tensor basics") {
  auto t = Tensor::from_vector({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.numel() == 6);
  CHECK(t.rank() == 2);
  CHECK_THROWS(Tensor::from_vector({2, 2}, {1, 2, 3}));
  CHECK_THROWS(Tensor({0, 3}));

  auto view = t.reshape({3, 2});
  view.data()[0] = 9;
  CHECK(t.data()[0] == 9);  // storage shared
  CHECK_THROWS(t.reshape({4, 2}));

  auto d = t.detached();
  d.data()[0] = 1;
  CHECK(t.data()[0] == 9);  // detach copies
}

TEST_CASE("backward: sum gives ones, detached target gives zero") {
  Tape tape;
  Tape::Scope scope(tape);
  auto x = Tensor::from_vector({4}, {1, 2, 3, 4});
  x.set_requires_grad(true);
  auto loss = sum(x);
  backward(tape, loss);
  for (int i = 0; i < 4; ++i) CHECK(x.grad()[i] == 1.0f);

  Tape tape2;
  Tape::Scope scope2(tape2);
  x.zero_grad();
  auto loss2 = mse_loss(x, x.detached());
  backward(tape2, loss2);
  for (int i = 0; i < 4; ++i) CHECK(x.grad()[i] == 0.0f);
}

TEST_CASE("backward rejects non-scalar loss and accumulates across calls") {
  Tape tape;
  Tape::Scope scope(tape);
  auto x = Tensor::from_vector({2}, {1, 2});
  x.set_requires_grad(true);
  auto y = scale(x, 2.0f);
  CHECK_THROWS(backward(tape, y));
  auto loss = sum(y);
  backward(tape, loss);
  CHECK(x.grad()[0] == 2.0f);
  backward(tape, loss);  // repeated call accumulates
  CHECK(x.grad()[0] == 4.0f);
}

TEST_CASE("conv2d examples") {
  // identity kernel
  auto x = Tensor::from_vector({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  auto w = Tensor::from_vector({1, 1, 1, 1}, {1});
  auto b = Tensor::from_vector({1}, {0});
  auto y = conv2d(x, w, b, 1, 0);
  REQUIRE(y.shape() == Shape{1, 1, 3, 3});
  for (int i = 0; i < 9; ++i) CHECK(y.data()[i] == x.data()[i]);

  // averaging preserves constants
  auto xc = Tensor::full({1, 1, 5, 5}, 2.0f);
  auto wa = Tensor::full({1, 1, 3, 3}, 1.0f / 9.0f);
  auto ya = conv2d(xc, wa, b, 1, 0);
  REQUIRE(ya.shape() == Shape{1, 1, 3, 3});
  for (int i = 0; i < 9; ++i) CHECK(ya.data()[i] == Catch::Approx(2.0).epsilon(1e-6));

  // channel mismatch diagnostic names both shapes
  auto w2 = Tensor::zeros({1, 2, 3, 3});
  CHECK_THROWS_WITH(conv2d(x, w2, b, 1, 0),
                    Catch::Matchers::ContainsSubstring("[1x1x3x3]") &&
                        Catch::Matchers::ContainsSubstring("[1x2x3x3]"));
}

TEST_CASE("conv_transpose2d examples") {
  // 1x1 kernel value 1, stride 1 -> identity
  auto x = Tensor::from_vector({1, 1, 2, 2}, {1, 2, 3, 4});
  auto w = Tensor::from_vector({1, 1, 1, 1}, {1});
  auto b = Tensor::from_vector({1}, {0});
  auto y = conv_transpose2d(x, w, b, 1, 0);
  for (int i = 0; i < 4; ++i) CHECK(y.data()[i] == x.data()[i]);

  // stride-2, k=2 ones kernel: each input scalar fills its 2x2 block
  auto w2 = Tensor::full({1, 1, 2, 2}, 1.0f);
  auto y2 = conv_transpose2d(x, w2, b, 2, 0);
  REQUIRE(y2.shape() == Shape{1, 1, 4, 4});
  const float expect[16] = {1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4};
  for (int i = 0; i < 16; ++i) CHECK(y2.data()[i] == expect[i]);
}

TEST_CASE("grid_sample examples") {
  // 2x2 single-channel map; texel centers at (0.25, 0.75) grid
  auto feat = Tensor::from_vector({1, 2, 2}, {1, 2, 3, 4});
  auto at = [&](float u, float v) {
    auto coords = Tensor::from_vector({1, 2}, {u, v});
    return grid_sample_bilinear(feat, coords).data()[0];
  };
  CHECK(at(0.25f, 0.25f) == 1.0f);  // exact texel center
  CHECK(at(0.75f, 0.25f) == 2.0f);
  CHECK(at(0.5f, 0.25f) == Catch::Approx(1.5));   // midway between texels
  CHECK(at(0.25f, 0.5f) == Catch::Approx(2.0));   // midway vertically: (1+3)/2
  CHECK(at(-3.0f, 9.0f) == 3.0f);                 // border clamp

  // constant map stays constant anywhere
  auto cfeat = Tensor::full({3, 4, 4}, 7.0f);
  Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    auto coords =
        Tensor::from_vector({1, 2}, {(float)rng.uniform(-0.2, 1.2), (float)rng.uniform(-0.2, 1.2)});
    auto out = grid_sample_bilinear(cfeat, coords);
    for (int c = 0; c < 3; ++c) CHECK(out.data()[c] == 7.0f);
  }
  CHECK_THROWS(grid_sample_bilinear(
      feat, Tensor::from_vector({1, 2}, {std::numeric_limits<float>::quiet_NaN(), 0.f})));
}

TEST_CASE("grid_sample output within source texel bounds") {
  Rng rng(11);
  auto feat = Tensor::zeros({2, 5, 7});
  for (int64_t i = 0; i < feat.numel(); ++i) feat.data()[i] = (float)rng.normal();
  float lo = 1e9f, hi = -1e9f;
  for (int64_t i = 0; i < feat.numel(); ++i) {
    lo = std::min(lo, feat.data()[i]);
    hi = std::max(hi, feat.data()[i]);
  }
  for (int i = 0; i < 200; ++i) {
    auto coords =
        Tensor::from_vector({1, 2}, {(float)rng.uniform(-0.5, 1.5), (float)rng.uniform(-0.5, 1.5)});
    auto out = grid_sample_bilinear(feat, coords);
    for (int c = 0; c < 2; ++c) {
      CHECK(out.data()[c] >= lo - 1e-6f);
      CHECK(out.data()[c] <= hi + 1e-6f);
    }
  }
}

TEST_CASE("kernel forward examples") {
  auto x = Tensor::from_vector({3}, {-1, 0, 2});
  auto r = relu(x);
  CHECK(r.data()[0] == 0);
  CHECK(r.data()[1] == 0);
  CHECK(r.data()[2] == 2);

  // instance-norm of a constant channel is zero pre-affine
  auto xc = Tensor::full({1, 1, 4, 4}, 3.25f);
  auto gamma = Tensor::full({1}, 1.0f);
  auto beta = Tensor::full({1}, 0.0f);
  auto n = norm_layer(xc, gamma, beta, NormMode::kInstance);
  for (int i = 0; i < 16; ++i) CHECK(std::abs(n.data()[i]) < 1e-3f);

  CHECK(softplus(Tensor::from_vector({1}, {0.f})).data()[0] == Catch::Approx(std::log(2.0)));
  CHECK(sigmoid(Tensor::from_vector({1}, {0.f})).data()[0] == 0.5f);
}

TEST_CASE("conv2d linearity in x with zero bias") {
  Rng rng(5);
  auto x = Tensor::zeros({1, 2, 6, 6});
  for (int64_t i = 0; i < x.numel(); ++i) x.data()[i] = (float)rng.normal();
  auto w = Tensor::zeros({3, 2, 3, 3});
  for (int64_t i = 0; i < w.numel(); ++i) w.data()[i] = (float)rng.normal();
  Tensor b;
  auto y1 = conv2d(scale(x, 2.5f), w, b, 1, 1);
  auto y2 = scale(conv2d(x, w, b, 1, 1), 2.5f);
  for (int64_t i = 0; i < y1.numel(); ++i)
    CHECK(y1.data()[i] == Catch::Approx(y2.data()[i]).margin(1e-4));
}

TEST_CASE("forward determinism: same inputs and seed give identical bits") {
  auto run = [] {
    Rng rng(77);
    auto x = Tensor::zeros({1, 3, 8, 8});
    for (int64_t i = 0; i < x.numel(); ++i) x.data()[i] = (float)rng.normal();
    auto w = Tensor::zeros({4, 3, 3, 3});
    for (int64_t i = 0; i < w.numel(); ++i) w.data()[i] = (float)rng.normal();
    auto b = Tensor::zeros({4});
    auto y = sigmoid(conv2d(x, w, b, 2, 1));
    return y;
  };
  auto a = run(), b = run();
  REQUIRE(a.numel() == b.numel());
  for (int64_t i = 0; i < a.numel(); ++i) REQUIRE(a.data()[i] == b.data()[i]);
}

TEST_CASE("adam: zero grad leaves params unchanged; first step matches hand evaluation", "[adam]") {
  AdamState st;
  auto p = Tensor::from_vector({2}, {1.0f, -2.0f});
  p.set_requires_grad(true);
  std::vector<Tensor> params{p};
  adam_step(params, st);  // no grad allocated: zero grad
  CHECK(p.data()[0] == 1.0f);
  CHECK(p.data()[1] == -2.0f);

  // single scalar, g=1, lr=2e-4: first step approximately -lr
  auto q = Tensor::from_vector({1}, {1.0f});
  q.set_requires_grad(true);
  q.grad_data()[0] = 1.0f;
  AdamState st2;
  std::vector<Tensor> params2{q};
  adam_step(params2, st2);
  CHECK(q.data()[0] == Catch::Approx(1.0 - 2e-4).epsilon(1e-6));

  // NaN grad rejected with the parameter name
  q.set_name("field.l1.w");
  q.grad_data()[0] = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_WITH(adam_step(params2, st2), Catch::Matchers::ContainsSubstring("field.l1.w"));
}

TEST_CASE("adam: 100 steps on f(x)=x^2 shrink |x| monotonically after warmup") {
  auto x = TensorT<double>::from_vector({1}, {1.0});
  x.set_requires_grad(true);
  AdamStateT<double> st;
  st.lr = 2e-2;  // faster convergence for the scalar oracle
  std::vector<TensorT<double>> params{x};
  double prev = 1.0;
  for (int i = 0; i < 100; ++i) {
    TapeT<double> tape;
    TapeT<double>::Scope scope(tape);
    x.zero_grad();
    auto loss = mul(x, x);
    backward(tape, loss);
    adam_step(params, st);
    if (i >= 10) CHECK(std::abs(x.data()[0]) <= std::abs(prev) + 1e-12);
    prev = x.data()[0];
  }
  CHECK(std::abs(x.data()[0]) < 0.5);
}

TEST_CASE("checkpoint container round-trips bits") {
  const std::string dir = "/tmp/hvtr_test_ckpt";
  std::filesystem::remove_all(dir);
  Rng rng(9);
  auto t = Tensor::zeros({3, 4});
  for (int64_t i = 0; i < t.numel(); ++i) t.data()[i] = (float)rng.normal();
  std::vector<double> dbuf = {1.5, -2.25, 3.125};
  std::vector<int> ibuf = {7, -9};
  {
    CheckpointWriter w(dir);
    w.add_meta("iteration", (int64_t)42);
    w.add_meta("note", "hello world");
    w.add_tensor("net.w", t);
    w.add_buffer("geom", dbuf);
    w.add_buffer("idx", ibuf);
    w.finish();
  }
  {
    CheckpointReader r(dir);
    CHECK(r.meta_int("iteration") == 42);
    CHECK(r.meta("note") == "hello world");
    auto t2 = Tensor::zeros({3, 4});
    r.read_tensor("net.w", t2);
    for (int64_t i = 0; i < t.numel(); ++i) REQUIRE(t2.data()[i] == t.data()[i]);
    CHECK(r.read_buffer<double>("geom") == dbuf);
    CHECK(r.read_buffer<int>("idx") == ibuf);
    CHECK_THROWS(r.read_buffer<float>("geom"));  // dtype mismatch
    CHECK_THROWS(r.meta("missing"));
  }
  // header versioning
  {
    std::ofstream bad(dir + "/manifest.txt");
    bad << "WRONGHDR\n";
  }
  CHECK_THROWS(CheckpointReader(dir));
}

TEST_CASE("rng determinism and serialization") {
  Rng a(123), b(123);
  for (int i = 0; i < 100; ++i) REQUIRE(a.raw() == b.raw());
  const std::string state = a.serialize();
  const double next = a.normal();
  Rng c(0);
  c.deserialize(state);
  CHECK(c.normal() == next);
  CHECK(Rng::mix(1, 2) != Rng::mix(2, 1));
}
