#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <numbers>
#include <vector>

#include "batchrl/checkpoint.hpp"
#include "batchrl/policy.hpp"
#include "gradient_check.hpp"

using namespace batchrl;

using namespace testing_support;

TEST(Network, ParamCountMatchesLayout) {
  const auto s = shape(4, {8, 8}, HeadKind::Categorical, 2);
  // two trunks (4*8+8 + 8*8+8 each), actor 8*2+2, critic 8+1
  EXPECT_EQ(s.param_count(), 2 * (40 + 72) + 18 + 9);
  EXPECT_EQ(PolicyNetwork<float>(s).size(), s.param_count());
  const auto g = shape(3, {5}, HeadKind::Gaussian, 2);
  EXPECT_EQ(g.param_count(), 2 * 20 + 12 + 6 + 2);
}

TEST(Network, ZeroNetworkIsUniformWithZeroValue) {
  PolicyNetwork<float> net(shape(4, {8, 8}, HeadKind::Categorical, 3));
  auto ws = net.make_workspace(2);
  const std::vector<float> x{1, -2, 3, 0.5f, 7, 7, 7, 7};
  net.forward(x, {}, 2, ws);
  for (float z : ws.head) EXPECT_EQ(z, 0.0f);
  for (float v : ws.values) EXPECT_EQ(v, 0.0f);
}

TEST(Network, IdenticalRowsGiveIdenticalOutputs) {
  PolicyNetwork<float> net(shape(4, {16, 16}, HeadKind::Categorical, 2));
  net.init(5);
  std::vector<float> x;
  for (int r = 0; r < 5; ++r) x.insert(x.end(), {0.1f, -0.2f, 0.03f, 0.4f});
  auto ws = net.make_workspace(5);
  net.forward(x, {}, 5, ws);
  for (int r = 1; r < 5; ++r) {
    EXPECT_EQ(ws.head[2 * r], ws.head[0]);
    EXPECT_EQ(ws.head[2 * r + 1], ws.head[1]);
    EXPECT_EQ(ws.values[r], ws.values[0]);
  }
}

TEST(Network, BatchOfOneMatchesBatchOfN) {
  PolicyNetwork<float> net(shape(6, {64, 64}, HeadKind::Gaussian, 3));
  net.init(9);
  const std::size_t n = 37;
  const auto xd = random_vec(n * 6, 4, -3, 3);
  const std::vector<float> x(xd.begin(), xd.end());
  auto big = net.make_workspace(n);
  net.forward(x, {}, n, big);
  auto one = net.make_workspace(1);
  for (std::uint32_t r = 0; r < n; ++r) {
    const std::uint32_t idx[1] = {r};
    net.forward(x, idx, 1, one);
    for (std::size_t d = 0; d < 3; ++d) EXPECT_NEAR(one.head[d], big.head[r * 3 + d], 1e-7);
    EXPECT_NEAR(one.values[0], big.values[r], 1e-7);
  }
}

TEST(Network, ShapeErrors) {
  PolicyNetwork<float> net(shape(4, {8}, HeadKind::Categorical, 2));
  auto ws = net.make_workspace(2);
  std::vector<float> x(12);
  try {
    net.forward(x, {}, 3, ws);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
  }
  std::vector<float> odd(7);
  EXPECT_THROW(net.forward(odd, {}, 1, ws), Error);
  net.forward(x, {}, 2, ws);
  std::vector<float> hs(3), vs(2), g(net.size());
  EXPECT_THROW(net.backward(x, {}, ws, hs, vs, g), Error);
  EXPECT_THROW((PolicyNetwork<float>(shape(0, {8}, HeadKind::Categorical, 2))), Error);
}

TEST(Network, FastTanhIsCloseToTanh) {
  for (int i = -2000; i <= 2000; ++i) {
    const float x = static_cast<float>(i) * 0.01f;
    EXPECT_NEAR(fast_tanh(x), std::tanh(static_cast<double>(x)), 5e-7) << x;
  }
}

TEST(Backward, MatchesFiniteDifferencesOnSmallNet) {
  EXPECT_LT(gradient_check(shape(4, {8, 8}, HeadKind::Categorical, 2), 100), 1e-4);
}

TEST(Backward, MatchesFiniteDifferencesOverTenRandomNets) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto head = s % 2 ? HeadKind::Gaussian : HeadKind::Categorical;
    const std::size_t adim = 1 + s % 3;
    std::vector<std::size_t> hidden{8, 8};
    if (s % 4 == 3) hidden = {5};
    EXPECT_LT(gradient_check(shape(3 + s % 3, hidden, head, adim), 200 + 10 * s), 1e-4) << "net " << s;
  }
}

TEST(Backward, ZeroSeedsGiveZeroGradient) {
  PolicyNetwork<double> net(shape(4, {8, 8}, HeadKind::Categorical, 2));
  randomize(net, 1);
  const auto x = random_vec(4 * 6, 2);
  auto ws = net.make_workspace(6);
  net.forward(x, {}, 6, ws);
  std::vector<double> hs(12, 0.0), vs(6, 0.0), g(net.size(), 0.0);
  net.backward(x, {}, ws, hs, vs, g);
  for (double v : g) EXPECT_EQ(v, 0.0);
}

TEST(Backward, DoublingTheSeedDoublesTheGradient) {
  PolicyNetwork<double> net(shape(4, {8, 8}, HeadKind::Gaussian, 2));
  randomize(net, 3);
  const auto x = random_vec(4 * 6, 4);
  auto hs = random_vec(12, 5), vs = random_vec(6, 6);
  auto ws = net.make_workspace(6);
  net.forward(x, {}, 6, ws);
  std::vector<double> g1(net.size(), 0.0), g2(net.size(), 0.0);
  net.backward(x, {}, ws, hs, vs, g1);
  for (auto& v : hs) v *= 2;
  for (auto& v : vs) v *= 2;
  net.backward(x, {}, ws, hs, vs, g2);
  for (std::size_t i = 0; i < g1.size(); ++i) EXPECT_EQ(g2[i], 2 * g1[i]);
}

TEST(Backward, FloatAgreesWithDouble) {
  PolicyNetwork<double> d(shape(4, {16, 16}, HeadKind::Categorical, 2));
  randomize(d, 8, 0.5);
  const auto f = d.cast<float>();
  const auto xd = random_vec(4 * 10, 9);
  const std::vector<float> xf(xd.begin(), xd.end());
  auto wd = d.make_workspace(10);
  auto wf = f.make_workspace(10);
  d.forward(xd, {}, 10, wd);
  f.forward(xf, {}, 10, wf);
  for (std::size_t i = 0; i < 20; ++i) EXPECT_NEAR(wf.head[i], wd.head[i], 1e-5);
}

TEST(Init, FollowsGainsAndIsSeeded) {
  const auto s = shape(4, {64, 64}, HeadKind::Gaussian, 2);
  PolicyNetwork<float> a(s), b(s), c(s);
  a.init(1);
  b.init(1);
  c.init(2);
  EXPECT_TRUE(std::equal(a.params().begin(), a.params().end(), b.params().begin()));
  EXPECT_FALSE(std::equal(a.params().begin(), a.params().end(), c.params().begin()));
  for (float v : a.log_std()) EXPECT_EQ(v, 0.0f);
  // Actor head is tiny, so the initial policy is close to uniform.
  auto ws = a.make_workspace(1);
  const std::vector<float> x{0.3f, -0.2f, 0.1f, 0.05f};
  a.forward(x, {}, 1, ws);
  for (std::size_t d = 0; d < 2; ++d) EXPECT_LT(std::abs(ws.head[d]), 0.1f);
}

TEST(Init, ProjectClampsLogStd) {
  PolicyNetwork<float> net(shape(2, {4}, HeadKind::Gaussian, 2));
  net.params()[net.log_std_offset()] = -9.0f;
  net.params()[net.log_std_offset() + 1] = 3.5f;
  net.project();
  EXPECT_EQ(net.log_std()[0], static_cast<float>(kLogStdMin));
  EXPECT_EQ(net.log_std()[1], static_cast<float>(kLogStdMax));
}

// ------------------------------------------------------------ distributions

TEST(Categorical, NearDeterministicLogits) {
  RngStream rng(1, {0, 0, StreamPurpose::Action});
  const std::array<double, 2> logits{1000, 0};
  int zeros = 0;
  for (int i = 0; i < 10000; ++i) zeros += sample_categorical<double>(logits, rng).index == 0;
  EXPECT_GT(zeros / 10000.0, 0.999);
}

TEST(Categorical, UniformFrequencies) {
  RngStream rng(2, {0, 0, StreamPurpose::Action});
  const std::array<float, 4> logits{0, 0, 0, 0};
  std::array<int, 4> count{};
  for (int i = 0; i < 100000; ++i) {
    const auto s = sample_categorical<float>(logits, rng);
    ++count[s.index];
    EXPECT_NEAR(s.log_prob, std::log(0.25), 1e-6);
  }
  for (int c : count) EXPECT_NEAR(c / 100000.0, 0.25, 0.02);
}

TEST(Categorical, SameStreamStateSameAction) {
  const std::array<float, 3> logits{0.2f, -1.0f, 0.5f};
  RngStream a(5, {3, 1, StreamPurpose::Action}), b(5, {3, 1, StreamPurpose::Action});
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sample_categorical<float>(logits, a).index,
                                          sample_categorical<float>(logits, b).index);
}

TEST(Categorical, ClosedForms) {
  const std::array<double, 4> logits{0, 0, 0, 0};
  const auto le = categorical_log_prob_entropy<double>(logits, 2);
  EXPECT_NEAR(le.log_prob, std::log(0.25), 1e-12);
  EXPECT_NEAR(le.entropy, std::log(4.0), 1e-12);
  try {
    categorical_log_prob_entropy<double>(logits, 4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::OutOfSupport);
  }
  EXPECT_THROW(categorical_log_prob_entropy<double>(logits, -1), Error);
}

TEST(Categorical, SoftmaxNormalizesExtremeLogits) {
  RngStream rng(9, {0, 0, StreamPurpose::Init});
  for (int trial = 0; trial < 1000; ++trial) {
    std::array<float, 5> z{}, p{};
    for (auto& v : z) v = static_cast<float>(rng.uniform(-50, 50));
    softmax<float>(z, p);
    double sum = 0;
    for (float v : p) sum += v;
    EXPECT_NEAR(sum, 1.0, 1e-6);
  }
}

TEST(Gaussian, SampleMoments) {
  RngStream rng(3, {0, 0, StreamPurpose::Action});
  const std::array<double, 1> mean{0}, log_std{0};
  double s = 0, s2 = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    std::array<double, 1> a{};
    const double lp = sample_gaussian<double, double>(mean, log_std, rng, a);
    EXPECT_NEAR(lp, -0.5 * a[0] * a[0] - 0.5 * std::log(2 * std::numbers::pi), 1e-12);
    s += a[0];
    s2 += a[0] * a[0];
  }
  const double m = s / n;
  EXPECT_NEAR(m, 0.0, 0.02);
  EXPECT_NEAR(s2 / n - m * m, 1.0, 0.05);
}

TEST(Gaussian, ClosedForms) {
  const std::array<double, 1> mean{0.7}, log_std{0}, action{0.7};
  const auto le = gaussian_log_prob_entropy<double, double>(mean, log_std, action);
  EXPECT_NEAR(le.log_prob, -0.5 * std::log(2 * std::numbers::pi), 1e-12);
  EXPECT_NEAR(le.entropy, 0.5 * std::log(2 * std::numbers::pi * std::numbers::e), 1e-12);
  const std::array<double, 1> bad{std::nan("")};
  EXPECT_THROW((gaussian_log_prob_entropy<double, double>(mean, log_std, bad)), Error);
}

TEST(Gaussian, LogStdIsClampedWhenSampling) {
  RngStream rng(4, {0, 0, StreamPurpose::Action});
  const std::array<double, 1> mean{0}, log_std{-50};
  std::array<double, 1> a{};
  sample_gaussian<double, double>(mean, log_std, rng, a);
  EXPECT_LT(std::abs(a[0]), 10 * std::exp(kLogStdMin));
}

// ------------------------------------------------------------- checkpoints

TEST(Checkpoint, BitExactRoundTrip) {
  for (auto head : {HeadKind::Categorical, HeadKind::Gaussian}) {
    Policy p(shape(5, {64, 32}, head, 3));
    p.init(77);
    const auto bytes = encode_checkpoint(p);
    const auto q = decode_checkpoint(bytes);
    EXPECT_EQ(q.shape(), p.shape());
    ASSERT_EQ(q.size(), p.size());
    EXPECT_EQ(std::memcmp(q.params().data(), p.params().data(), p.size() * sizeof(float)), 0);
  }
}

TEST(Checkpoint, HeaderIsLittleEndianWithMagic) {
  Policy p(shape(4, {8}, HeadKind::Categorical, 2));
  const auto b = encode_checkpoint(p);
  EXPECT_EQ(static_cast<char>(b[0]), 'B');
  EXPECT_EQ(static_cast<char>(b[3]), 'P');
  EXPECT_EQ(static_cast<int>(b[4]), 1);  // version
  EXPECT_EQ(static_cast<int>(b[12]), 2);  // two layer sizes: 4, 8
  EXPECT_EQ(static_cast<int>(b[16]), 4);
  EXPECT_EQ(static_cast<int>(b[20]), 8);
  EXPECT_EQ(b.size(), 4 + 4 + 4 + 4 + 8 + 4 + 8 + 4 * p.size());
}

TEST(Checkpoint, CorruptInputIsRejected) {
  Policy p(shape(4, {8}, HeadKind::Categorical, 2));
  auto b = encode_checkpoint(p);
  auto bad_magic = b;
  bad_magic[0] = std::byte{'X'};
  EXPECT_THROW(decode_checkpoint(bad_magic), Error);
  b.pop_back();
  EXPECT_THROW(decode_checkpoint(b), Error);
}

TEST(Checkpoint, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "batchrl_test_policy.ckpt";
  Policy p(shape(4, {16}, HeadKind::Gaussian, 1));
  p.init(3);
  save_checkpoint(path, p);
  const auto q = load_checkpoint(path);
  EXPECT_EQ(std::memcmp(q.params().data(), p.params().data(), p.size() * sizeof(float)), 0);
  std::filesystem::remove(path);
  EXPECT_THROW(load_checkpoint(path), Error);
}
