#include <stdexcept>
#include <cmath>
#include <random>

#include "croloss/eval.hpp"
#include "croloss/ranking.hpp"
#include "doctest.h"
#include "support/oracles.hpp"

using namespace croloss;

namespace {

TwoTowerModel eval_model(std::int64_t catalog, std::uint64_t seed = 1, int dim = 16) {
  ModelConfig cfg;
  cfg.catalog = catalog;
  cfg.embedding_dim = dim;
  cfg.hidden_dim = dim;
  cfg.output_dim = dim;
  cfg.seed = seed;
  return init_model(cfg);
}

std::vector<TrainingSample> random_samples(std::int64_t catalog, int count,
                                           std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::int64_t> item(0, catalog - 1);
  std::vector<TrainingSample> samples;
  for (int i = 0; i < count; ++i) {
    TrainingSample s;
    for (int j = 0; j < 3; ++j) s.history.push_back(item(rng));
    // keep the target out of the history so an untrained model sees it as an
    // exchangeable random item
    do {
      s.target = item(rng);
    } while (std::find(s.history.begin(), s.history.end(), s.target) != s.history.end());
    samples.push_back(std::move(s));
  }
  return samples;
}

}  // namespace

TEST_CASE("recall at the full catalog is 1") {
  const std::int64_t catalog = 60;
  const TwoTowerModel m = eval_model(catalog);
  const auto samples = random_samples(catalog, 40, 3);
  const std::vector<int> ns{1, 10, 60};
  const EvalReport report = recall_at_n(m, samples, ns);
  CHECK(report.recall_at.at(60) == 1.0);
  CHECK(report.num_pairs == 40);
  CHECK(report.tie_policy == "positive_loses_ties");
}

TEST_CASE("untrained model ranks a random target uniformly") {
  const std::int64_t catalog = 1000;
  const TwoTowerModel m = eval_model(catalog, 9, 24);
  const auto samples = random_samples(catalog, 1200, 11);
  const std::vector<int> ns{50, 100, 200};
  const EvalReport report = recall_at_n(m, samples, ns);
  for (int n : ns) {
    const double p = static_cast<double>(n) / static_cast<double>(catalog);
    const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(samples.size()));
    CHECK(std::abs(report.recall_at.at(n) - p) < 3.0 * se);
  }
}

TEST_CASE("monotone in N and read-only") {
  const std::int64_t catalog = 300;
  const TwoTowerModel m = eval_model(catalog, 13);
  const auto samples = random_samples(catalog, 100, 17);
  const std::uint64_t hash_before = parameter_hash(m);
  const std::vector<int> ns{1, 5, 20, 50, 150, 300};
  const EvalReport report = recall_at_n(m, samples, ns);
  CHECK(parameter_hash(m) == hash_before);

  double prev = -1.0;
  for (int n : ns) {
    CHECK(report.recall_at.at(n) >= prev);
    prev = report.recall_at.at(n);
  }
  CHECK_THROWS_AS(recall_at_n(m, samples, std::vector<int>{0}), std::invalid_argument);
  CHECK_THROWS_AS(recall_at_n(m, samples, std::vector<int>{301}), std::invalid_argument);
}

TEST_CASE("brute_force_rank under the tie policy") {
  const std::vector<double> strict{0.1, 0.9, 0.3};
  CHECK(brute_force_rank(strict, 1) == 1);

  const std::vector<double> tied(5, 2.5);
  CHECK(brute_force_rank(tied, 2) == 5);  // positive loses every tie

  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> score(-3.0, 3.0);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> scores(40);
    for (double& s : scores) s = score(rng);
    const std::size_t pos = t % scores.size();
    GapVector gaps;
    gaps.sample_scale = 1.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (i != pos) gaps.gaps.push_back(scores[i] - scores[pos]);
    }
    CHECK(static_cast<double>(brute_force_rank(scores, pos)) == rank_exact(gaps));
  }
  CHECK_THROWS_AS(brute_force_rank(strict, 5), std::invalid_argument);
}

TEST_CASE("membership and rank-counting recall agree") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> score(-5.0, 5.0);
  const std::size_t items = 200;
  const std::size_t users = 50;

  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<double>> scores(users, std::vector<double>(items));
    std::vector<std::size_t> positives(users);
    for (std::size_t u = 0; u < users; ++u) {
      for (double& s : scores[u]) s = score(rng);
      positives[u] = static_cast<std::size_t>(rng() % items);
    }
    for (int n : {1, 10, 50, 200}) {
      std::size_t hits = 0;
      for (std::size_t u = 0; u < users; ++u) {
        if (brute_force_rank(scores[u], positives[u]) <= n) ++hits;
      }
      const double counting = static_cast<double>(hits) / users;
      const double membership = testsupport::topn_membership_recall(scores, positives, n);
      CHECK(counting == membership);
    }
  }

  // all-tied input: the positive sits at rank = catalog under the policy.
  std::vector<std::vector<double>> flat(users, std::vector<double>(items, 1.0));
  std::vector<std::size_t> positives(users, 3);
  CHECK(testsupport::topn_membership_recall(flat, positives, 199) == 0.0);
  CHECK(testsupport::topn_membership_recall(flat, positives, 200) == 1.0);
  CHECK(brute_force_rank(flat[0], 3) == 200);
}

TEST_CASE("recall_at_n agrees with brute_force_rank over model scores") {
  const std::int64_t catalog = 120;
  const TwoTowerModel m = eval_model(catalog, 29, 8);
  const auto samples = random_samples(catalog, 60, 31);

  // Rebuild every score from the towers and count by hand.
  std::vector<std::vector<double>> item_vecs;
  for (ItemId id = 0; id < catalog; ++id) {
    item_vecs.push_back(item_forward(m, id).tower.out);
  }
  const std::vector<int> ns{1, 10, 40};
  std::map<int, int> hits;
  for (const TrainingSample& s : samples) {
    const std::vector<double> u = user_forward(m, s.history).tower.out;
    std::vector<double> scores(catalog);
    for (ItemId id = 0; id < catalog; ++id) scores[id] = score(m, u, item_vecs[id]);
    const std::int64_t rank = brute_force_rank(scores, s.target);
    for (int n : ns) {
      if (rank <= n) ++hits[n];
    }
  }
  const EvalReport report = recall_at_n(m, samples, ns);
  for (int n : ns) {
    CHECK(report.recall_at.at(n) ==
          doctest::Approx(static_cast<double>(hits[n]) / samples.size()).epsilon(1e-12));
  }
}

TEST_CASE("history exclusion can only improve the measured rank") {
  const std::int64_t catalog = 150;
  const TwoTowerModel m = eval_model(catalog, 37);
  auto samples = random_samples(catalog, 80, 41);
  const std::vector<int> ns{5, 25};
  const EvalReport with = recall_at_n(m, samples, ns, false);
  const EvalReport without = recall_at_n(m, samples, ns, true);
  CHECK(without.exclude_history);
  CHECK_FALSE(with.exclude_history);
  for (int n : ns) {
    CHECK(without.recall_at.at(n) >= with.recall_at.at(n));
  }
}

TEST_CASE("finite_diff_check") {
  // Quadratics are exact for central differences up to rounding.
  const std::vector<double> point{1.0, -2.0, 0.5};
  const std::vector<double> grad{2.0, -4.0, 1.0};
  auto quadratic = [](std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return s;
  };
  const FiniteDiffResult ok = finite_diff_check(quadratic, point, grad);
  CHECK(ok.max_rel_err < 1e-9);

  // A single corrupted coordinate is flagged by index.
  std::vector<double> corrupted = grad;
  corrupted[1] *= 2.0;
  const FiniteDiffResult bad = finite_diff_check(quadratic, point, corrupted);
  CHECK(bad.worst_index == 1);
  CHECK(bad.max_rel_err > 0.1);

  auto exploding = [](std::span<const double> x) {
    return x[0] > 1.0 ? std::numeric_limits<double>::infinity() : 0.0;
  };
  CHECK_THROWS_AS(finite_diff_check(exploding, point, grad, 0.5), std::runtime_error);
  CHECK_THROWS_AS(finite_diff_check(quadratic, point, std::vector<double>{1.0}, 1e-5),
                  std::invalid_argument);
}
