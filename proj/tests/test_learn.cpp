#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "tpsdf/extract.hpp"
#include "tpsdf/fixtures.hpp"
#include "tpsdf/learn.hpp"
#include "gradcheck.hpp"

using namespace tpsdf;

namespace {

const Box3 kDomain{{-1, -1, -1}, {1, 1, 1}};

TrainConfig small_config(std::vector<int> hidden = {8}) {
  TrainConfig c;
  c.hidden = std::move(hidden);
  c.batch_size = 64;
  c.epochs = 5;
  return c;
}

bool same_parameters(const TriClassModel& a, const TriClassModel& b) {
  if (a.layers().size() != b.layers().size()) return false;
  for (std::size_t l = 0; l < a.layers().size(); ++l) {
    if (a.layers()[l].weight != b.layers()[l].weight) return false;
    if (a.layers()[l].bias != b.layers()[l].bias) return false;
  }
  return true;
}

// Overrides the last layer so the output is a constant per class.
void constant_logits(TriClassModel& m, std::vector<float> logits) {
  auto& last = m.layers().back();
  last.weight.setZero();
  for (std::size_t c = 0; c < logits.size(); ++c) last.bias(static_cast<Eigen::Index>(c)) = logits[c];
}

}  // namespace

TEST_CASE("init is deterministic per seed") {
  const auto cfg = small_config({16, 16});
  const auto a = init_model(cfg, kDomain, 1);
  const auto b = init_model(cfg, kDomain, 1);
  const auto c = init_model(cfg, kDomain, 2);
  CHECK(same_parameters(a, b));
  CHECK_FALSE(same_parameters(a, c));
}

TEST_CASE("layer shapes chain") {
  const auto m = init_model(small_config({8}), kDomain, 0);
  REQUIRE(m.layers().size() == 2);
  CHECK(m.layers()[0].weight.rows() == 8);
  CHECK(m.layers()[0].weight.cols() == 3);
  CHECK(m.layers()[1].weight.rows() == 3);
  CHECK(m.layers()[1].weight.cols() == 8);
  CHECK(m.parameter_count() == 8 * 3 + 8 + 3 * 8 + 3);

  auto cfg = small_config({8});
  cfg.mode = TrainMode::br;
  cfg.frequencies = 6;
  const auto br = init_model(cfg, kDomain, 0);
  CHECK(br.layers()[0].weight.cols() == 3 + 36);
  CHECK(br.layers()[1].weight.rows() == 2);
}

TEST_CASE("He-uniform bounds") {
  const auto m = init_model(small_config({64, 64}), kDomain, 3);
  for (const auto& layer : m.layers()) {
    const double bound = std::sqrt(6.0 / static_cast<double>(layer.weight.cols()));
    CHECK(layer.weight.cwiseAbs().maxCoeff() <= bound);
    CHECK(layer.weight.cwiseAbs().maxCoeff() > 0.5 * bound);
    CHECK(layer.bias.isZero());
  }
}

TEST_CASE("invalid configurations are rejected") {
  auto cfg = small_config({0});
  CHECK_THROWS_AS(cfg.validate(), TrainingError);
  cfg = small_config();
  cfg.learning_rate = 0.0;
  CHECK_THROWS_AS(cfg.validate(), TrainingError);
  cfg = small_config();
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), TrainingError);
  CHECK_THROWS_AS(parse_mode("regression"), TrainingError);
  CHECK(parse_mode("br") == TrainMode::br);
}

TEST_CASE("zero-initialised model gives uniform softmax") {
  const TriClassModel m({8, 8}, TrainMode::triclass, 0, kDomain);
  const std::vector<Vec3> pts = {{0.1, 0.2, 0.3}, {-0.5, 0.5, 0.9}};
  const auto out = m.forward(pts);
  CHECK(out.isZero());
  const std::vector<std::uint8_t> labels = {0, 2};
  const auto loss = triclass_loss<float>(out, labels);
  CHECK(loss.loss == doctest::Approx(std::log(3.0)));
}

TEST_CASE("batched forward equals per-point forward") {
  const auto m = init_model(small_config({16, 16}), kDomain, 4);
  const Vec3 p{0.3, -0.7, 0.1};
  const std::vector<Vec3> one = {p};
  const std::vector<Vec3> many(100, p);
  const auto single = m.forward(one);
  const auto batch = m.forward(many);
  for (Eigen::Index j = 0; j < 100; ++j) CHECK(batch.col(j) == single.col(0));
  CHECK(batch.allFinite());
}

TEST_CASE("forward rejects mismatched inputs") {
  const auto m = init_model(small_config(), kDomain, 0);
  CHECK_THROWS_AS(m.forward(TriClassModel::Matrix::Zero(5, 2)), TrainingError);
}

TEST_CASE("encoding normalises the domain and adds sinusoids") {
  const TriClassModel m({4}, TrainMode::triclass, 2, Box3{{0, 0, 0}, {2, 4, 2}});
  const std::vector<Vec3> pts = {{2, 2, 0.5}};
  const auto x = m.encode(pts);
  REQUIRE(x.rows() == 15);
  CHECK(x(0, 0) == doctest::Approx(1.0));
  CHECK(x(1, 0) == doctest::Approx(0.0));
  CHECK(x(2, 0) == doctest::Approx(-0.5));
  CHECK(x(3 + 2, 0) == doctest::Approx(std::sin(-0.5 * std::numbers::pi)));
  CHECK(x(3 + 6 + 3 + 2, 0) == doctest::Approx(std::cos(-std::numbers::pi)));
}

TEST_CASE("triclass loss examples") {
  TriClassModel::Matrix logits(3, 1);
  logits << 50, -50, -50;
  const std::vector<std::uint8_t> zero = {0};
  CHECK(triclass_loss<float>(logits, zero).loss == doctest::Approx(0.0).epsilon(1e-6));
  logits << 0, 0, 0;
  for (std::uint8_t l = 0; l < 3; ++l) {
    const std::vector<std::uint8_t> label = {l};
    CHECK(triclass_loss<float>(logits, label).loss == doctest::Approx(1.0986).epsilon(1e-4));
  }
  // Extreme logits stay finite.
  logits << 1e4F, -1e4F, 0;
  const std::vector<std::uint8_t> wrong = {1};
  CHECK(std::isfinite(triclass_loss<float>(logits, wrong).loss));
}

TEST_CASE("class weights reweight the mean") {
  TriClassModel::Matrix logits(3, 2);
  logits << 2, 0, 0, 0, 0, 0;
  const std::vector<std::uint8_t> labels = {0, 1};
  const std::vector<float> weights = {1.0F, 3.0F, 1.0F};
  const auto a = triclass_loss<float>(logits, labels);
  const auto b = triclass_loss<float>(logits, labels, weights);
  const double l0 = std::log(std::exp(2.0) + 2.0) - 2.0;
  const double l1 = std::log(3.0);
  CHECK(a.loss == doctest::Approx(0.5 * (l0 + l1)).epsilon(1e-5));
  CHECK(b.loss == doctest::Approx((l0 + 3.0 * l1) / 4.0).epsilon(1e-5));
}

TEST_CASE("br loss examples") {
  TriClassModel::Matrix out(2, 2);
  const float nan = std::numeric_limits<float>::quiet_NaN();
  out << -60, -60, 0.3F, -0.2F;
  const std::vector<float> all_null = {nan, nan};
  CHECK(br_loss<float>(out, all_null).loss == doctest::Approx(0.0).epsilon(1e-6));
  out << 60, 60, 0.3F, -0.2F;
  const std::vector<float> exact = {0.3F, -0.2F};
  CHECK(br_loss<float>(out, exact).loss == doctest::Approx(0.0).epsilon(1e-6));
  out << 0, 0, 0.5F, 0.0F;
  const std::vector<float> mixed = {0.25F, nan};
  // ln 2 from the classifier, |0.5 - 0.25| from the single non-null point.
  CHECK(br_loss<float>(out, mixed).loss == doctest::Approx(std::log(2.0) + 0.25).epsilon(1e-5));
}

TEST_CASE("triclass gradients match finite differences") {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto p = test::random_problem(TrainMode::triclass, {6, 5}, seed % 2 == 0 ? 0 : 1, 5, seed);
    const auto r = test::check_gradients(p);
    CHECK(r.failures == 0);
    CHECK(r.parameters == p.model.parameter_count());
  }
}

TEST_CASE("br gradients match finite differences") {
  for (std::uint64_t seed = 10; seed < 14; ++seed) {
    const auto p = test::random_problem(TrainMode::br, {7}, 1, 5, seed);
    const auto r = test::check_gradients(p);
    CHECK(r.failures == 0);
  }
}

TEST_CASE("Adam update matches a hand computation") {
  TriClassModel m({1}, TrainMode::br, 0, kDomain);
  auto grads = m.layers();
  for (auto& g : grads) {
    g.weight.setConstant(0.5F);
    g.bias.setConstant(-2.0F);
  }
  auto state = make_adam_state(m);
  TrainConfig cfg;
  cfg.learning_rate = 0.01;
  adam_update(m, grads, state, cfg);
  // The first bias-corrected step is lr * sign(g).
  CHECK(m.layers()[0].weight(0, 0) == doctest::Approx(-0.01).epsilon(1e-4));
  CHECK(m.layers()[0].bias(0) == doctest::Approx(0.01).epsilon(1e-4));
  CHECK(state.step == 1);
  adam_update(m, grads, state, cfg);
  CHECK(m.layers()[0].weight(0, 0) == doctest::Approx(-0.02).epsilon(1e-4));
}

TEST_CASE("zero epochs returns the initial model") {
  const auto mesh = fixtures::disk();
  const auto tree = Octree::build(mesh, 3);
  const auto batch = sample_points(mesh, tree, SamplingStrategy::octree, 1, 0);
  auto cfg = small_config();
  cfg.epochs = 0;
  cfg.seed = 5;
  const auto result = train(batch, cfg, tree.root_box());
  CHECK(result.loss_log.empty());
  CHECK(same_parameters(result.model, init_model(cfg, tree.root_box(), 5)));
}

TEST_CASE("training is deterministic and lowers the loss") {
  const auto mesh = fixtures::disk();
  const auto tree = Octree::build(mesh, 3);
  const auto batch = sample_points(mesh, tree, SamplingStrategy::octree, 1, 0);
  auto cfg = small_config({16, 16});
  cfg.epochs = 30;
  cfg.learning_rate = 1e-3;
  const auto a = train(batch, cfg, tree.root_box());
  const auto b = train(batch, cfg, tree.root_box());
  CHECK(same_parameters(a.model, b.model));
  CHECK(a.loss_log == b.loss_log);
  REQUIRE(a.loss_log.size() == 30);
  CHECK(a.loss_log.back() < a.loss_log.front());

  cfg.mode = TrainMode::br;
  const auto br = train(batch, cfg, tree.root_box());
  CHECK(br.loss_log.back() < br.loss_log.front());
  CHECK(br.model.output_width() == 2);
}

TEST_CASE("divergence aborts with a diagnostic") {
  const auto mesh = fixtures::disk();
  const auto tree = Octree::build(mesh, 3);
  auto batch = sample_points(mesh, tree, SamplingStrategy::octree, 1, 0);
  batch.points[0].x = std::numeric_limits<double>::infinity();
  auto cfg = small_config();
  cfg.epochs = 2;
  CHECK_THROWS_AS(train(batch, cfg, tree.root_box()), TrainingError);
}

TEST_CASE("always-null model gives an empty reconstruction") {
  auto m = init_model(small_config(), kDomain, 0);
  constant_logits(m, {0.0F, 0.0F, 5.0F});
  const FieldGrid geometry = make_lattice(kDomain, {9, 9, 9});
  const FieldGrid grid = predict_grid(m, geometry);
  CHECK(grid.null_count() == grid.size());
  CHECK(strip_null(marching_cubes_3p(grid)).empty());
}

TEST_CASE("logit ties resolve to the lowest class") {
  auto m = init_model(small_config(), kDomain, 0);
  constant_logits(m, {1.0F, 1.0F, 1.0F});
  const std::vector<Vec3> pts = {{0, 0, 0}};
  CHECK(predict_labels(m, pts)[0] == 0);
  constant_logits(m, {0.0F, 2.0F, 2.0F});
  CHECK(predict_labels(m, pts)[0] == 1);
}

TEST_CASE("adding a constant to all logits keeps the labels") {
  auto m = init_model(small_config({16}), kDomain, 9);
  const FieldGrid geometry = make_lattice(kDomain, {7, 7, 7});
  const FieldGrid before = predict_grid(m, geometry);
  m.layers().back().bias.array() += 3.25F;
  const FieldGrid after = predict_grid(m, geometry);
  for (std::size_t i = 0; i < before.size(); ++i) {
    CHECK(ThreePoleValue::decode(before.values[i]) == ThreePoleValue::decode(after.values[i]));
  }
}

TEST_CASE("br probability threshold is inclusive") {
  auto cfg = small_config();
  cfg.mode = TrainMode::br;
  auto m = init_model(cfg, kDomain, 0);
  constant_logits(m, {0.0F, 0.25F});
  const FieldGrid geometry = make_lattice(kDomain, {3, 3, 3});
  const FieldGrid grid = predict_grid(m, geometry);
  CHECK(grid.null_count() == 0);
  // Distances come back in world units (domain half-size 1 here).
  CHECK(grid.values[0] == doctest::Approx(0.25));

  const FieldGrid g2 = make_lattice(kDomain, {2, 1, 1});
  const std::vector<float> prob = {0.5F, 0.4999F};
  const std::vector<float> dist = {0.1F, 0.2F};
  const FieldGrid merged = merge_br_field(g2, prob, dist);
  CHECK(merged.values[0] == 0.1F);
  CHECK(std::isnan(merged.values[1]));
}

TEST_CASE("checkpoints round trip") {
  auto cfg = small_config({12, 7});
  cfg.frequencies = 3;
  cfg.mode = TrainMode::br;
  const Box3 domain{{-0.5, -0.25, 0}, {0.5, 0.75, 1}};
  const auto m = init_model(cfg, domain, 8);
  const auto path = std::filesystem::temp_directory_path() / "tpsdf_test_model.3pm1";
  write_model(path, m);
  const auto back = read_model(path);
  std::filesystem::remove(path);
  CHECK(same_parameters(m, back));
  CHECK(back.mode() == TrainMode::br);
  CHECK(back.frequencies() == 3);
  CHECK(back.hidden() == cfg.hidden);
  CHECK(back.domain().min.y == -0.25);
  CHECK(back.domain().max.z == 1.0);
}
