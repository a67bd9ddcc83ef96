#include <doctest.h>

#include <cmath>
#include <set>

#include "ppap/errors.hpp"
#include "ppap/matrix.hpp"
#include "ppap/synthgen.hpp"
#include "test_support.hpp"

using namespace ppap;
using test::kind_of;

TEST_CASE("spec validation") {
  MixtureSpec spec = two_cluster_spec();
  validate_spec(spec);

  SUBCASE("weights must sum to one") {
    spec.components[0].weight = 0.7;
    CHECK(kind_of([&] { validate_spec(spec); }) == ErrorKind::ConfigInvalid);
  }
  SUBCASE("means must be unit") {
    spec.components[0].mean_direction[0] = 2.0;
    CHECK(kind_of([&] { validate_spec(spec); }) == ErrorKind::NormalizationMismatch);
  }
  SUBCASE("dimension mismatch") {
    spec.components[0].mean_direction.push_back(0.0);
    CHECK(kind_of([&] { validate_spec(spec); }) == ErrorKind::DimensionMismatch);
  }
  SUBCASE("empty spec") {
    spec.components.clear();
    CHECK(kind_of([&] { validate_spec(spec); }) == ErrorKind::ConfigInvalid);
  }
}

TEST_CASE("sampling is deterministic per seed") {
  const MixtureSpec spec = two_cluster_spec(30, 6, 150.0, 5);
  const FeatureBatch a = sample_mixture(spec);
  const FeatureBatch b = sample_mixture(spec);
  CHECK(a.data.data == b.data.data);
  CHECK(*a.labels == *b.labels);

  MixtureSpec other = spec;
  other.seed = 6;
  const FeatureBatch c = sample_mixture(other);
  CHECK(a.data.data != c.data.data);
}

TEST_CASE("samples are unit rows labeled by component") {
  const FeatureBatch batch = sample_mixture(two_cluster_spec(40, 8, 200.0, 11));
  CHECK(batch.normalized);
  REQUIRE(batch.labels.has_value());
  std::size_t first = 0;
  for (std::size_t i = 0; i < batch.n(); ++i) {
    CHECK(l2_norm(batch.data.row(i), batch.dim()) == doctest::Approx(1.0).epsilon(1e-12));
    if ((*batch.labels)[i] == 0) ++first;
  }
  CHECK(first >= 10);
  CHECK(first <= 30);
}

TEST_CASE("high concentration stays near the component mean") {
  const MixtureSpec spec = two_cluster_spec(50, 8, 400.0, 17);
  const FeatureBatch batch = sample_mixture(spec);
  for (std::size_t i = 0; i < batch.n(); ++i) {
    const auto& mean = spec.components[(*batch.labels)[i]].mean_direction;
    CHECK(dot(batch.data.row(i), mean.data(), batch.dim()) > 0.9);
  }
}

TEST_CASE("presets have the documented shape") {
  const MixtureSpec overlap = overlap8_spec();
  CHECK(overlap.dim == 32);
  CHECK(overlap.count == 4096);
  CHECK(overlap.components.size() == 8);
  validate_spec(overlap);

  const MixtureSpec tail = long_tail_spec();
  CHECK(tail.dim == 16);
  CHECK(tail.count == 2048);
  CHECK(tail.components.size() == 6);
  validate_spec(tail);
  for (std::size_t c = 0; c + 1 < tail.components.size(); ++c) {
    CHECK(tail.components[c + 1].weight ==
          doctest::Approx(tail.components[c].weight * 0.5).epsilon(1e-12));
  }
}

TEST_CASE("spec files load from toml and json") {
  test::TempDir dir;

  SUBCASE("toml with rescaling") {
    const auto path = dir.file("spec.toml");
    test::write_file(path,
                     "dim = 2\n"
                     "count = 10\n"
                     "seed = 3\n"
                     "[[component]]\n"
                     "weight = 2.0\n"
                     "mean = [2.0, 0.0]\n"
                     "concentration = 50.0\n"
                     "[[component]]\n"
                     "weight = 2.0\n"
                     "mean = [0.0, 1.0]\n");
    const MixtureSpec spec = load_mixture_spec(path);
    CHECK(spec.dim == 2);
    CHECK(spec.seed == 3);
    CHECK(spec.components[0].weight == doctest::Approx(0.5));
    CHECK(spec.components[0].mean_direction[0] == doctest::Approx(1.0));
    CHECK(spec.components[1].concentration == 1.0);
  }

  SUBCASE("json round trip") {
    const auto path = dir.file("spec.json");
    save_mixture_spec_json(two_cluster_spec(12, 4, 90.0, 8), path);
    const MixtureSpec spec = load_mixture_spec(path);
    CHECK(spec.dim == 4);
    CHECK(spec.count == 12);
    CHECK(spec.seed == 8);
    CHECK(spec.components.size() == 2);
    CHECK(spec.components[0].concentration == 90.0);
  }

  SUBCASE("zero mean direction is rejected") {
    const auto path = dir.file("bad.toml");
    test::write_file(path,
                     "dim = 2\ncount = 4\n[[component]]\nweight = 1.0\nmean = [0.0, 0.0]\n");
    CHECK(kind_of([&] { load_mixture_spec(path); }) == ErrorKind::ZeroVector);
  }

  SUBCASE("malformed toml is a parse error") {
    const auto path = dir.file("broken.toml");
    test::write_file(path, "dim = \n");
    CHECK(kind_of([&] { load_mixture_spec(path); }) == ErrorKind::ParseError);
  }
}

TEST_CASE("spec json string round trip") {
  const MixtureSpec spec = long_tail_spec(9);
  const std::string text = mixture_spec_to_json_string(spec);
  const MixtureSpec back = mixture_spec_from_json_string(text, "test");
  CHECK(back.dim == spec.dim);
  CHECK(back.count == spec.count);
  CHECK(back.seed == spec.seed);
  REQUIRE(back.components.size() == spec.components.size());
  for (std::size_t c = 0; c < spec.components.size(); ++c) {
    CHECK(back.components[c].weight == spec.components[c].weight);
    CHECK(back.components[c].mean_direction == spec.components[c].mean_direction);
    CHECK(back.components[c].concentration == spec.components[c].concentration);
  }
}

TEST_CASE("oracle rejects invalid anchors") {
  const FeatureBatch batch = sample_mixture(two_cluster_spec(10, 4, 100.0, 1));
  CHECK(kind_of([&] { oracle_mine(batch, MiningConfig{}, 10); }) ==
        ErrorKind::ConfigInvalid);
}

TEST_CASE("oracle trajectory shape") {
  const FeatureBatch batch = sample_mixture(two_cluster_spec(20, 4, 100.0, 2));
  MiningConfig cfg;
  cfg.steps = 3;
  const OracleOutput out = oracle_mine(batch, cfg, 0);
  CHECK(out.trajectory.size() == 4);
  CHECK(out.positives.size() + out.ambiguous.size() + out.negatives.size() == 20);
  CHECK(out.trajectory[0].phi == cfg.phi0);
  CHECK(out.trajectory[0].psi == cfg.psi0);
}

TEST_CASE("two-cluster mining stays within the true cluster") {
  const FeatureBatch batch = sample_mixture(two_cluster_spec(40, 8, 200.0, 11));
  MiningConfig cfg;
  cfg.phi0 = 0.55;
  cfg.psi0 = 0.15;
  cfg.sigma_pos = 3.0;
  cfg.sigma_amb = 4.0;
  cfg.steps = 2;
  for (std::size_t anchor = 0; anchor < batch.n(); ++anchor) {
    const OracleOutput out = oracle_mine(batch, cfg, anchor);
    const uint32_t label = (*batch.labels)[anchor];
    for (uint32_t j : out.positives) CHECK((*batch.labels)[j] == label);
  }
}
