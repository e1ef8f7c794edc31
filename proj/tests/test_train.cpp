#include <cmath>

#include "doctest.h"
#include "routekg/train/gradcheck.hpp"
#include "routekg/train/trainer.hpp"
#include "support.hpp"

using namespace routekg;

namespace {

struct Setup {
  geo::RoadNetwork net = testing::grid(5, 3, 0.2);
  geo::DirectionMatrix D{net, 8};
  geo::NaeMatrix A{net};
  corpus::RouteCorpus corpus;

  Setup() {
    corpus::RouteGenOptions g;
    g.count = 60;
    g.min_len = 7;
    g.seed = 4;
    corpus::SplitOptions so;
    so.observed = 4;
    so.future = 3;
    corpus = corpus::split_corpus(corpus::generate_routes(net, g), D, so).corpus;
  }
  train::Context ctx() const { return {net, D, A}; }
};

train::TrainConfig tiny(Scenario sc) {
  train::TrainConfig c;
  c.scenario = sc;
  c.observed = 4;
  c.future = 3;
  c.dim = 8;
  c.hidden = 8;
  c.batch_size = 8;
  c.max_iterations = 6;
  c.eval_every = 3;
  c.lr = 1e-2;
  c.seed = 5;
  return c;
}

std::vector<double> flatten(train::Model m) {
  std::vector<double> out;
  for (const auto& b : kg::blocks(m.kg)) out.insert(out.end(), b.values.begin(), b.values.end());
  for (const auto& b : rank::blocks(m.refine)) out.insert(out.end(), b.values.begin(), b.values.end());
  return out;
}

}  // namespace

TEST_CASE("config text round trip") {
  train::TrainConfig c = tiny(Scenario::NoGoal);
  c.w_d = 0.5;
  c.teacher_forcing = false;
  c.window_stride = 2;
  c.norm = kg::ScoreNorm::L2;
  train::TrainConfig back;
  train::apply_config_text(train::config_to_text(c), back);
  CHECK(train::config_to_text(back) == train::config_to_text(c));
  CHECK(back.scenario == Scenario::NoGoal);
  CHECK(back.window_stride == 2);
}

TEST_CASE("config errors") {
  train::TrainConfig c;
  CHECK_THROWS_AS(train::set_config_value(c, "nope", "1"), DataError);
  CHECK_THROWS_AS(train::set_config_value(c, "lr", "fast"), DataError);
  CHECK_THROWS_AS(train::set_config_value(c, "teacher_forcing", "maybe"), DataError);
  train::apply_config_text("# comment\n\nlr = 0.5  # trailing\n", c);
  CHECK(c.lr == 0.5);
}

TEST_CASE("branching default") {
  train::TrainConfig c;
  CHECK(c.branching() == 2);
  c.future = 1;
  CHECK(c.branching() == 10);
  c.n = 3;
  CHECK(c.branching() == 3);
}

TEST_CASE("zero loss weights leave parameters unchanged") {
  const Setup s;
  auto c = tiny(Scenario::Goal);
  c.w_rep = c.w_pred = c.w_rank = 0;
  c.eval_every = 0;
  const auto init = train::init_model(c, s.net.num_edges());
  const auto r = train::train(s.corpus, s.ctx(), c);
  CHECK(flatten(r.model) == flatten(init));
}

TEST_CASE("training is deterministic and keeps hyperplanes unit length") {
  const Setup s;
  for (Scenario sc : {Scenario::Goal, Scenario::NoGoal}) {
    const auto c = tiny(sc);
    double worst = 0;
    const auto a = train::train(s.corpus, s.ctx(), c, [&](std::size_t, const train::Model& m) {
      for (const auto& h : m.kg.store.hyperplane) {
        for (std::size_t r = 0; r < h.rows; ++r) {
          double n2 = 0;
          for (double v : h.row(r)) n2 += v * v;
          worst = std::max(worst, std::abs(std::sqrt(n2) - 1.0));
        }
      }
    });
    const auto b = train::train(s.corpus, s.ctx(), c);
    CHECK(worst < 1e-9);
    CHECK(flatten(a.model) == flatten(b.model));
    CHECK(a.history.iterations.size() == 6);
    CHECK(a.history.validations.size() == 2);
    for (const auto& l : a.history.iterations) CHECK(std::isfinite(l.total));
  }
}

TEST_CASE("predictions are connected and of the requested size") {
  const Setup s;
  const auto r = train::train(s.corpus, s.ctx(), tiny(Scenario::GoalD));
  auto opts = train::predict_options(r.model.config);
  for (bool refine : {true, false}) {
    opts.refine = refine;
    for (std::size_t i : s.corpus.test) {
      const auto& sample = s.corpus.samples[i];
      const auto p = train::predict(r.model, s.ctx(), sample, opts);
      REQUIRE(p.routes.size() == 10);
      CHECK(p.scores.size() == 10);
      for (const Route& route : p.routes) {
        REQUIRE(route.size() == 3);
        EdgeId prev = sample.last_observed();
        for (EdgeId e : route) {
          CHECK(s.net.edge(prev).end_node == s.net.edge(e).start_node);
          prev = e;
        }
      }
    }
  }
}

TEST_CASE("every loss passes the gradient check") {
  train::GradCheckSettings g;
  g.instances = 2;
  const auto checks = train::check_all_gradients(g);
  CHECK(checks.size() == 10);
  for (const auto& c : checks) {
    INFO(c.loss, " ", c.instance);
    CHECK(c.report.ok());
    CHECK(c.report.checked > 0);
  }
}
