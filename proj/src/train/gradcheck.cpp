#include "routekg/train/gradcheck.hpp"

#include <algorithm>
#include <array>

#include "json.hpp"

#include "routekg/corpus/corpus.hpp"
#include "routekg/geo/matrices.hpp"
#include "routekg/kg/triplets.hpp"
#include "routekg/rank/refine.hpp"
#include "routekg/route/spanning.hpp"

namespace routekg::train {

namespace {

std::vector<nn::GradCheckBlock> pair_blocks(std::vector<nn::Block> params, std::vector<nn::Block> grads) {
  std::vector<nn::GradCheckBlock> out;
  for (std::size_t i = 0; i < params.size(); ++i) out.push_back({params[i].name, params[i].values, grads[i].values});
  return out;
}

struct Instance {
  geo::RoadNetwork net;
  geo::DirectionMatrix D;
  geo::NaeMatrix A;
  corpus::RouteCorpus corpus;
  kg::KgParams kg;
  rank::RefineParams refine;
};

Instance make_instance(std::uint64_t seed) {
  Instance in;
  geo::GridOptions go;
  go.side = 4;
  go.jitter = 0.2;
  go.seed = seed;
  in.net = geo::generate_grid_network(go);
  in.D = geo::DirectionMatrix(in.net, 4);
  in.A = geo::NaeMatrix(in.net);
  corpus::RouteGenOptions ro;
  ro.count = 12;
  ro.min_len = 5;
  ro.sigma = 0.5;
  ro.seed = seed;
  corpus::SplitOptions so;
  so.observed = 3;
  so.future = 2;
  so.ratios = {1.0, 0.0, 0.0};
  so.seed = seed;
  in.corpus = corpus::split_corpus(corpus::generate_routes(in.net, ro), in.D, so).corpus;
  kg::ModelDims dims;
  dims.num_edges = in.net.num_edges();
  dims.observed_len = 3;
  dims.future_len = 2;
  dims.n_d = 4;
  dims.dim = 6;
  dims.hidden = 5;
  Rng rng = make_stream(seed, "gradcheck-init");
  in.kg = kg::init_kg_params(dims, rng);
  in.refine = rank::init_refine_params(dims, rng, false);
  in.refine.residual = true;
  return in;
}

}  // namespace

std::vector<LossGradCheck> check_all_gradients(const GradCheckSettings& settings) {
  std::vector<LossGradCheck> out;
  for (std::size_t i = 0; i < settings.instances; ++i) {
    const std::uint64_t seed = splitmix64(settings.seed + i);
    Instance in = make_instance(seed);
    nn::GradCheckOptions opts = settings.check;
    opts.seed = seed;
    const auto& samples = in.corpus.samples;
    const std::size_t used = std::min<std::size_t>(samples.size(), 3);

    {
      std::vector<Route> observed;
      for (const auto& s : samples) observed.push_back(s.observed);
      kg::TripletSampler sampler(in.net, in.D, observed, 2);
      Rng rng = make_stream(seed, "gradcheck-triplets");
      std::vector<kg::TripletBatch> batches;
      for (kg::Family f : kg::kFamilies) batches.push_back(sampler.sample(f, 4, rng));
      // smallest margin that keeps every hinge live, so the loss stays small
      double margin = 0.0;
      for (const auto& b : batches) {
        for (std::size_t j = 0; j < b.positives.size(); ++j) {
          margin = std::max(margin, 1.0 + kg::rep_loss({b.family, {b.negatives[j]}, {b.positives[j]}}, in.kg, 0.0).loss);
        }
      }
      auto loss = [&](kg::KgParams* g) {
        double l = 0.0;
        for (const auto& b : batches) l += kg::rep_loss(b, in.kg, margin, g, 1.0).loss;
        return l;
      };
      kg::KgParams g = kg::zeros_like(in.kg);
      loss(&g);
      out.push_back({"rep", i, nn::grad_check([&] { return loss(nullptr); }, pair_blocks(kg::blocks(in.kg), kg::blocks(g)), opts)});
    }
    {
      auto loss = [&](kg::KgParams* g) {
        double l = 0.0;
        for (std::size_t s = 0; s < used; ++s) l += kg::direction_loss(samples[s], in.kg, g, 1.0);
        return l;
      };
      kg::KgParams g = kg::zeros_like(in.kg);
      loss(&g);
      out.push_back({"direction", i, nn::grad_check([&] { return loss(nullptr); }, pair_blocks(kg::blocks(in.kg), kg::blocks(g)), opts)});
    }
    {
      const Scenario sc = std::array{Scenario::Goal, Scenario::GoalD, Scenario::NoGoal}[i % 3];
      auto loss = [&](kg::KgParams* g) {
        double l = 0.0;
        for (std::size_t s = 0; s < used; ++s) {
          kg::QueryTrace t;
          const auto dists = kg::query_tail(samples[s], in.kg, sc, samples[s].goal_dir, &t);
          l += kg::pred_loss(samples[s], dists, t, in.kg, g, 1.0);
        }
        return l;
      };
      kg::KgParams g = kg::zeros_like(in.kg);
      loss(&g);
      out.push_back({"pred", i, nn::grad_check([&] { return loss(nullptr); }, pair_blocks(kg::blocks(in.kg), kg::blocks(g)), opts)});
    }
    {
      std::vector<route::CandidateSet> cands;
      for (std::size_t s = 0; s < used; ++s) {
        const auto dists = kg::query_tail(samples[s], in.kg, Scenario::Goal);
        const auto& last = samples[s].last_observed();
        auto c = route::spanning_route(dists, in.net.edge(last).end_node, last, in.A, in.net, 2, 4);
        if (std::find(c.routes.begin(), c.routes.end(), samples[s].future) == c.routes.end()) {
          c.routes.back() = samples[s].future;
        }
        cands.push_back(std::move(c));
      }
      auto loss = [&](rank::RefineParams* g) {
        double l = 0.0;
        for (std::size_t s = 0; s < used; ++s) {
          rank::RankTrace t;
          rank::rank_candidates(cands[s], samples[s], in.kg, in.refine, in.D, &t);
          l += rank::rank_loss(t, samples[s], in.refine, g, 1.0).loss;
        }
        return l;
      };
      rank::RefineParams g = rank::zeros_like(in.refine);
      loss(&g);
      out.push_back({"rank", i, nn::grad_check([&] { return loss(nullptr); }, pair_blocks(rank::blocks(in.refine), rank::blocks(g)), opts)});

      auto rloss = [&](rank::RefineParams* g) {
        double l = 0.0;
        for (std::size_t s = 0; s < used; ++s) {
          kg::QueryTrace q;
          kg::query_tail(samples[s], in.kg, Scenario::Goal, {}, &q);
          rank::RefineTrace t;
          rank::refine_logits(samples[s], cands[s].routes.front(), q.dir, in.kg, in.refine, in.D, &q.logits, &t);
          l += rank::refine_loss(t, samples[s], in.kg, in.refine, in.net, g, 1.0);
        }
        return l;
      };
      rank::RefineParams rg = rank::zeros_like(in.refine);
      rloss(&rg);
      out.push_back({"refine", i, nn::grad_check([&] { return rloss(nullptr); }, pair_blocks(rank::blocks(in.refine), rank::blocks(rg)), opts)});
    }
  }
  return out;
}

std::string gradcheck_to_json(const std::vector<LossGradCheck>& checks) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : checks) {
    arr.push_back({{"loss", c.loss},
                   {"instance", c.instance},
                   {"max_rel_error", c.report.max_rel_error},
                   {"checked", c.report.checked},
                   {"ok", c.report.ok()},
                   {"failures", c.report.failures}});
  }
  return arr.dump(2);
}

}  // namespace routekg::train
