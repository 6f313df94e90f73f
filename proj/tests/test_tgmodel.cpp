#include <doctest.h>

#include <cmath>
#include <sstream>

#include "oracles.hpp"
#include "vistat/error.hpp"
#include "vistat/tgmodel.hpp"

using namespace vistat;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

TgConfig tiny_config() {
  TgConfig c;
  c.m = 4;
  c.features = 2;
  c.q = 1;
  c.time_hidden = 3;
  c.gcn_hidden = 3;
  c.geo_lstm_hidden = 3;
  c.fc_widths = {6, 5, 4, 3};
  return c;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST_CASE("normalize_adjacency on small graphs") {
  CHECK(normalize_adjacency(MatrixXd::Zero(1, 1))(0, 0) == doctest::Approx(1.0));

  MatrixXd path(2, 2);
  path << 0, 1, 1, 0;
  const auto a = normalize_adjacency(path);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) CHECK(a(i, j) == doctest::Approx(0.5));

  MatrixXd tri = MatrixXd::Ones(3, 3) - MatrixXd::Identity(3, 3);
  const auto t = normalize_adjacency(tri);
  CHECK((t.array() - 1.0 / 3.0).abs().maxCoeff() < 1e-15);
  CHECK(t.isApprox(t.transpose()));

  MatrixXd arc(2, 2);
  arc << 0, 1, 0, 0;
  CHECK_THROWS_AS(normalize_adjacency(arc), ArgumentError);
}

TEST_CASE("gcn_layer examples") {
  MatrixXd h(2, 1), theta(1, 1);
  h << 1, 3;
  theta << 1;
  MatrixXd path(2, 2);
  path << 0, 1, 1, 0;
  const auto out = gcn_layer(normalize_adjacency(path), h, theta, Activation::Identity);
  CHECK(out(0, 0) == doctest::Approx(2.0));
  CHECK(out(1, 0) == doctest::Approx(2.0));

  MatrixXd h2 = MatrixXd::Random(3, 2), th2 = MatrixXd::Random(2, 4);
  CHECK(gcn_layer(MatrixXd::Identity(3, 3), h2, th2, Activation::Identity).isApprox(h2 * th2));

  CHECK(gcn_layer(MatrixXd::Identity(2, 2), -MatrixXd::Ones(2, 1), theta, Activation::Relu)
            .isZero());
  CHECK_THROWS_AS(gcn_layer(MatrixXd::Identity(2, 2), h2, th2, Activation::Relu), DimensionError);
}

TEST_CASE("activations and their derivatives") {
  for (auto a : {Activation::Relu, Activation::Elu, Activation::Selu, Activation::LeakyRelu,
                 Activation::Identity}) {
    for (double z : {-1.3, -0.2, 0.4, 2.0}) {
      const double h = 1e-6;
      const double fd = (activate(a, z + h) - activate(a, z - h)) / (2 * h);
      CHECK(activate_derivative(a, z) == doctest::Approx(fd).epsilon(1e-6));
    }
    CHECK(parse_activation(to_string(a)) == a);
  }
  CHECK(parse_activation("leaky relu") == Activation::LeakyRelu);
  CHECK_THROWS_AS(parse_activation("swish"), ConfigError);
}

TEST_CASE("time component") {
  auto cfg = tiny_config();
  cfg.activation = Activation::Identity;

  SUBCASE("zero weights give zero output") {
    auto p = init_params(cfg, ModelKind::Baseline, 1);
    p.set_zero();
    CHECK(time_component_forward(MatrixXd::Random(4, 2), p, cfg).isZero());
  }

  SUBCASE("single step plain recurrent cell matches hand unroll") {
    cfg.m = 1;
    cfg.features = 1;
    cfg.time_hidden = 1;
    auto p = init_params(cfg, ModelKind::Baseline, 1);
    p["time.l0.W_in"](0, 0) = 0.7;
    p["time.l0.W_rec"](0, 0) = 5.0;  // no previous state at the first step
    p["time.l0.b"](0, 0) = -0.1;
    p["time.proj.W"](0, 0) = 1.5;
    p["time.proj.b"](0, 0) = 0.25;
    MatrixXd x(1, 1);
    x << 2.0;
    const double expected = 1.5 * std::tanh(0.7 * 2.0 - 0.1) + 0.25;
    CHECK(time_component_forward(x, p, cfg)(0, 0) == doctest::Approx(expected).epsilon(1e-14));
  }

  SUBCASE("saturated LSTM gates accumulate the candidate") {
    cfg.m = 3;
    cfg.features = 1;
    cfg.time_hidden = 1;
    cfg.time_cell = TimeCell::Lstm;
    auto p = init_params(cfg, ModelKind::Baseline, 1);
    p["time.l0.W_in"].setZero();
    p["time.l0.W_rec"].setZero();
    p["time.l0.W_in"](2, 0) = 0.5;  // candidate row
    p["time.l0.b"] << 50.0, 50.0, 0.0, 50.0;
    p["time.proj.W"](0, 0) = 1.0;
    p["time.proj.b"](0, 0) = 0.0;
    MatrixXd x(3, 1);
    x << 0.3, -1.2, 2.0;
    const auto out = time_component_forward(x, p, cfg);
    double cell = 0.0;
    for (int t = 0; t < 3; ++t) {
      cell += std::tanh(0.5 * x(t, 0));
      CHECK(out(t, 0) == doctest::Approx(std::tanh(cell)).epsilon(1e-12));
    }
  }
}

TEST_CASE("geometric component") {
  auto cfg = tiny_config();
  cfg.gcn_activation = Activation::Identity;

  SUBCASE("zero LSTM and projection weights give zeros") {
    auto p = init_params(cfg, ModelKind::TimeGeometric, 3);
    p["geo.lstm.W_in"].setZero();
    p["geo.lstm.W_rec"].setZero();
    p["geo.lstm.b"].setZero();
    p["geo.proj.W"].setZero();
    p["geo.proj.b"].setZero();
    const auto ex = testing::random_example(cfg, 5);
    CHECK(geometric_component_forward(ex.a_hat, ex.x, p, cfg).isZero());
  }

  SUBCASE("empty graph and identity theta feed the features straight to the LSTM") {
    cfg.features = 2;
    cfg.gcn_hidden = 2;
    cfg.geo_lstm_hidden = 1;
    auto p = init_params(cfg, ModelKind::TimeGeometric, 3);
    p["geo.gcn0.theta"] = MatrixXd::Identity(2, 2);
    MatrixXd x = MatrixXd::Random(4, 2);
    const auto with_graph = geometric_component_forward(MatrixXd::Identity(4, 4), x, p, cfg);

    // Scalar LSTM over the raw feature rows.
    const auto& wi = p["geo.lstm.W_in"];
    const auto& wr = p["geo.lstm.W_rec"];
    const auto& b = p["geo.lstm.b"];
    double h = 0.0, c = 0.0;
    for (int t = 0; t < 4; ++t) {
      double a[4];
      for (int k = 0; k < 4; ++k) a[k] = wi(k, 0) * x(t, 0) + wi(k, 1) * x(t, 1) + wr(k, 0) * h + b(k, 0);
      c = sigmoid(a[1]) * c + sigmoid(a[0]) * std::tanh(a[2]);
      h = sigmoid(a[3]) * std::tanh(c);
      for (int f = 0; f < 2; ++f)
        CHECK(with_graph(t, f) ==
              doctest::Approx(p["geo.proj.W"](f, 0) * h + p["geo.proj.b"](f, 0)).epsilon(1e-12));
    }
  }

  SUBCASE("two-node path graph through a one-unit LSTM") {
    cfg.m = 2;
    cfg.features = 1;
    cfg.gcn_hidden = 1;
    cfg.geo_lstm_hidden = 1;
    auto p = init_params(cfg, ModelKind::TimeGeometric, 3);
    p["geo.gcn0.theta"](0, 0) = 1.0;
    p["geo.lstm.W_in"] << 0.5, -0.3, 0.8, 0.2;
    p["geo.lstm.W_rec"] << 0.1, 0.4, -0.6, 0.3;
    p["geo.lstm.b"] << 0.0, 0.1, 0.0, -0.1;
    p["geo.proj.W"](0, 0) = 2.0;
    p["geo.proj.b"](0, 0) = -1.0;
    MatrixXd path(2, 2);
    path << 0, 1, 1, 0;
    MatrixXd x(2, 1);
    x << 1, 3;
    const auto out = geometric_component_forward(normalize_adjacency(path), x, p, cfg);
    // GCN output is 2 at both nodes.
    double h = 0.0, c = 0.0;
    const double w[4] = {0.5, -0.3, 0.8, 0.2}, u[4] = {0.1, 0.4, -0.6, 0.3}, b[4] = {0, 0.1, 0, -0.1};
    for (int t = 0; t < 2; ++t) {
      double a[4];
      for (int k = 0; k < 4; ++k) a[k] = w[k] * 2.0 + u[k] * h + b[k];
      c = sigmoid(a[1]) * c + sigmoid(a[0]) * std::tanh(a[2]);
      h = sigmoid(a[3]) * std::tanh(c);
      CHECK(out(t, 0) == doctest::Approx(2.0 * h - 1.0).epsilon(1e-13));
    }
  }

  SUBCASE("adjacency size mismatch") {
    auto p = init_params(cfg, ModelKind::TimeGeometric, 3);
    CHECK_THROWS_AS(geometric_component_forward(MatrixXd::Identity(3, 3), MatrixXd::Zero(4, 2), p, cfg),
                    DimensionError);
  }
}

TEST_CASE("fully connected component") {
  auto cfg = tiny_config();
  auto p = init_params(cfg, ModelKind::TimeGeometric, 9);
  const MatrixXd x = MatrixXd::Random(4, 2);
  const MatrixXd a = MatrixXd::Random(4, 2);
  const MatrixXd b = MatrixXd::Random(4, 2);

  CHECK(fc_component_forward(a, b, x, p, cfg) == fc_component_forward(b, a, x, p, cfg));
  CHECK(fc_component_forward(a, MatrixXd::Zero(4, 2), x, p, cfg) ==
        fc_component_forward(MatrixXd::Zero(4, 2), a, x, p, cfg));

  cfg.skip_layer = true;
  auto ps = init_params(cfg, ModelKind::TimeGeometric, 9);
  CHECK(ps["fc0.W"].cols() == 16);
  CHECK(fc_component_forward(a, b, x, ps, cfg).size() == 1);

  ps.set_zero();
  CHECK(fc_component_forward(a, b, x, ps, cfg).isZero());
}

TEST_CASE("tg and baseline forward") {
  for (std::size_t q : {1u, 5u, 20u}) {
    auto cfg = tiny_config();
    cfg.q = q;
    const auto ex = testing::random_example(cfg, 11);
    const auto tg = init_params(cfg, ModelKind::TimeGeometric, 2);
    CHECK(tg_forward(ex, tg, cfg).size() == static_cast<Eigen::Index>(q));
    CHECK(tg_forward(ex, tg, cfg) == tg_forward(ex, tg, cfg));
  }

  SUBCASE("baseline equals tg with the geometric pattern forced to zero") {
    for (bool skip : {false, true}) {
      auto cfg = tiny_config();
      cfg.skip_layer = skip;
      const auto ex = testing::random_example(cfg, 12);
      const auto tg = init_params(cfg, ModelKind::TimeGeometric, 4);
      ParamSet base;
      for (const auto& e : tg.entries())
        if (e.name.rfind("geo.", 0) != 0) base.add(e.name, e.value.rows(), e.value.cols(), e.penalized) = e.value;
      const auto t = time_component_forward(ex.x, tg, cfg);
      CHECK(baseline_forward(ex, base, cfg) ==
            fc_component_forward(t, MatrixXd::Zero(4, 2), ex.x, tg, cfg));
      CHECK(init_params(cfg, ModelKind::Baseline, 4).size() == base.size());
    }
  }
}

TEST_CASE("loss") {
  auto cfg = tiny_config();
  auto p = init_params(cfg, ModelKind::Baseline, 1);
  VectorXd y(1), yhat(1);
  y << 2;
  yhat << 0;
  CHECK(loss(yhat, y, p, 0.0) == doctest::Approx(4.0));
  CHECK(loss(y, y, p, 0.0) == 0.0);
  const double pen = penalty(p);
  CHECK(pen > 0.0);
  CHECK(loss(yhat, y, p, 0.5) == doctest::Approx(4.0 + 0.5 * pen));
  p.set_zero();
  CHECK(loss(yhat, y, p, 0.5) == doctest::Approx(4.0));
}

TEST_CASE("gradient special cases") {
  auto cfg = tiny_config();
  cfg.activation = Activation::Identity;
  cfg.gcn_activation = Activation::Identity;
  auto ex = testing::random_example(cfg, 3);
  auto p = init_params(cfg, ModelKind::TimeGeometric, 6);

  SUBCASE("zero-loss point has zero head-bias gradient") {
    ex.target = tg_forward(ex, p, cfg);
    const auto g = gradients(ex, p, cfg, ModelKind::TimeGeometric);
    CHECK(g.loss == doctest::Approx(0.0));
    CHECK(g.grads["head.b"].cwiseAbs().maxCoeff() < 1e-15);
  }

  SUBCASE("penalty gradient is 2 lambda w") {
    ex.target = tg_forward(ex, p, cfg);
    cfg.l2 = 0.3;
    const auto g = gradients(ex, p, cfg, ModelKind::TimeGeometric);
    CHECK((g.grads["fc1.W"] - 2.0 * 0.3 * p["fc1.W"]).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(g.grads["fc1.b"].cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("analytic gradients match finite differences") {
  for (auto cell : {TimeCell::Rnn, TimeCell::Lstm})
    for (bool skip : {false, true})
      for (auto kind : {ModelKind::Baseline, ModelKind::TimeGeometric}) {
        auto cfg = tiny_config();
        cfg.time_cell = cell;
        cfg.skip_layer = skip;
        cfg.time_layers = 2;
        cfg.gcn_layers = 2;
        cfg.l2 = 1e-3;
        const auto ex = testing::random_example(cfg, 21);
        const auto p = init_params(cfg, kind, 8);
        const auto g = gradients(ex, p, cfg, kind);
        const auto rep = testing::finite_difference_check(ex, p, cfg, kind, g.grads);
        INFO(to_string(cell), " skip=", skip, " kind=", to_string(kind), " worst=", rep.worst);
        CHECK(rep.checked == p.scalar_count());
        CHECK(rep.max_rel_error < 1e-4);
      }
}

TEST_CASE("batch gradient is the mean of per-example gradients") {
  auto cfg = tiny_config();
  std::vector<Example> data{testing::random_example(cfg, 1), testing::random_example(cfg, 2)};
  const auto p = init_params(cfg, ModelKind::TimeGeometric, 5);
  const std::vector<std::size_t> idx{0, 1};
  const auto batch = batch_gradients(data, idx, p, cfg, ModelKind::TimeGeometric);
  auto sum = gradients(data[0], p, cfg, ModelKind::TimeGeometric);
  const auto second = gradients(data[1], p, cfg, ModelKind::TimeGeometric);
  sum.grads.add_scaled(second.grads, 1.0);
  for (std::size_t i = 0; i < p.size(); ++i)
    CHECK((batch.grads.entries()[i].value - 0.5 * sum.grads.entries()[i].value).cwiseAbs().maxCoeff() <
          1e-14);
  CHECK(batch.loss == doctest::Approx(0.5 * (sum.loss + second.loss)));
}

TEST_CASE("adam step") {
  ParamSet p;
  p.add("w", 1, 1, true)(0, 0) = 3.0;
  auto g = p.zeros_like();
  auto state = AdamState::for_params(p);
  adam_step(p, g, state, 0.1);
  CHECK(p["w"](0, 0) == 3.0);

  g["w"](0, 0) = 1.0;
  auto fresh = AdamState::for_params(p);
  adam_step(p, g, fresh, 0.1);
  CHECK(p["w"](0, 0) == doctest::Approx(3.0 - 0.1 / (1.0 + 1e-8)).epsilon(1e-15));
  CHECK(fresh.step == 1);
}

TEST_CASE("training") {
  auto cfg = tiny_config();
  cfg.batch_size = 4;
  std::vector<Example> tr, va;
  for (int i = 0; i < 12; ++i) tr.push_back(testing::random_example(cfg, 100 + i));
  for (int i = 0; i < 4; ++i) va.push_back(testing::random_example(cfg, 200 + i));

  SUBCASE("zero learning rate stops after patience + 1 epochs") {
    cfg.learning_rate = 0.0;
    cfg.patience = 5;
    const auto r = train(tr, va, cfg, ModelKind::TimeGeometric);
    CHECK(r.early_stopped);
    CHECK(r.log.back().epoch == cfg.patience + 1);
    for (const auto& e : r.log) {
      CHECK(e.train_loss == r.log.front().train_loss);
      CHECK(e.val_loss == r.log.front().val_loss);
    }
  }

  SUBCASE("seeded runs are identical") {
    cfg.max_epochs = 5;
    cfg.dropout = true;
    cfg.dropout_rate = 0.2;
    const auto a = train(tr, va, cfg, ModelKind::TimeGeometric);
    const auto b = train(tr, va, cfg, ModelKind::TimeGeometric);
    CHECK(a.params == b.params);
    CHECK(a.log.size() == b.log.size());
  }

  SUBCASE("invalid configurations") {
    cfg.patience = 0;
    CHECK_THROWS_AS(train(tr, va, cfg, ModelKind::Baseline), ConfigError);
    cfg.patience = 20;
    CHECK_THROWS_AS(train(tr, {}, cfg, ModelKind::Baseline), ConfigError);
    cfg.dropout_rate = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
}

TEST_CASE("checkpoint round trip") {
  auto cfg = tiny_config();
  cfg.skip_layer = true;
  Checkpoint ck{ModelKind::TimeGeometric, cfg, R"({"seed":7})", init_params(cfg, ModelKind::TimeGeometric, 7)};
  std::stringstream s;
  write_checkpoint(s, ck);
  const auto text = s.str();
  const auto back = read_checkpoint(s);
  CHECK(back.params == ck.params);
  CHECK(back.kind == ModelKind::TimeGeometric);
  CHECK(config_to_json(back.config) == config_to_json(cfg));
  CHECK(back.metadata == ck.metadata);
  std::stringstream again;
  write_checkpoint(again, back);
  CHECK(again.str() == text);

  std::stringstream bad("vistat-checkpoint 1\nmodel tg\n");
  CHECK_THROWS_AS(read_checkpoint(bad), SchemaError);
}

TEST_CASE("config JSON and presets") {
  const auto c = config_from_json(R"({"m": 8, "time_cell": "lstm", "activation": "selu", "fc_widths": [4, 2]})");
  CHECK(c.m == 8);
  CHECK(c.time_cell == TimeCell::Lstm);
  CHECK(c.fc_widths.size() == 2);
  CHECK_THROWS_AS(config_from_json(R"({"bogus": 1})"), ConfigError);
  CHECK_THROWS_AS(config_from_json("[1]"), ConfigError);
  for (const auto& name : preset_names()) CHECK_NOTHROW(preset(name).validate());
  const auto p = preset("tuned-rnn-1d");
  CHECK(p.m == 100);
  CHECK(p.fc_widths == std::vector<std::size_t>{128, 64, 32, 16});
  CHECK(p.patience == 20);
  CHECK(p.max_epochs == 1000);
  CHECK_THROWS_AS(preset("nope"), ConfigError);
}
