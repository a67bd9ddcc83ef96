#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "ppap/errors.hpp"
#include "ppap/mining.hpp"
#include "ppap/rng.hpp"
#include "ppap/synthgen.hpp"
#include "test_support.hpp"

using namespace ppap;
using test::kind_of;
using test::make_batch;
using test::unit;

namespace {

// Random unit-row batch for property tests.
FeatureBatch random_batch(Rng& rng, std::size_t n, std::size_t dim) {
  FeatureBatch batch;
  batch.data = Matrix(n, dim);
  batch.normalized = true;
  for (std::size_t i = 0; i < n; ++i) {
    double norm = 0.0;
    while (norm < 1e-9) {
      for (std::size_t d = 0; d < dim; ++d) batch.data.at(i, d) = rng.normal();
      norm = l2_norm(batch.data.row(i), dim);
    }
    for (std::size_t d = 0; d < dim; ++d) batch.data.at(i, d) /= norm;
  }
  return batch;
}

}  // namespace

TEST_CASE("criterion update spot values") {
  CHECK(update_phi(0.55, 0.97, 3.0) == doctest::Approx(0.54).epsilon(1e-12));
  CHECK(update_psi(0.15, 0.97, 3.0) == doctest::Approx(0.16).epsilon(1e-12));
  CHECK(update_phi(0.55, 0.97, 3.0) == doctest::Approx(0.55 - 0.01));
  CHECK(update_psi(0.15, 0.97, 4.0) == doctest::Approx(0.1575));
  // orthogonal proxies
  CHECK(update_phi(0.55, 0.0, 3.0) == doctest::Approx(0.55 - 1.0 / 3.0));
  CHECK(update_psi(0.2, 0.0, 2.0) == doctest::Approx(0.7));
  // identical proxies leave both unchanged
  CHECK(update_phi(0.55, 1.0, 3.0) == 0.55);
  CHECK(update_psi(0.15, 1.0, 4.0) == 0.15);
}

TEST_CASE("vector overloads agree with the scalar form") {
  const std::vector<double> a = unit({1.0, 2.0, 2.0});
  const std::vector<double> b = unit({2.0, 1.0, 2.0});
  const double sim = dot(a.data(), b.data(), 3);
  CHECK(update_phi(0.5, a, b, 3.0) == update_phi(0.5, sim, 3.0));
  CHECK(update_psi(0.1, a, b, 4.0) == update_psi(0.1, sim, 4.0));
}

TEST_CASE("config validation") {
  MiningConfig c;
  validate_config(c);
  c.psi0 = c.phi0;
  CHECK(kind_of([&] { validate_config(c); }) == ErrorKind::ConfigInvalid);
  c = MiningConfig{};
  c.sigma_pos = 0.0;
  CHECK(kind_of([&] { validate_config(c); }) == ErrorKind::ConfigInvalid);
  c = MiningConfig{};
  c.clamp_margin = -0.1;
  CHECK(kind_of([&] { validate_config(c); }) == ErrorKind::ConfigInvalid);
  c = MiningConfig{};
  c.phi0 = 1.5;
  CHECK(kind_of([&] { validate_config(c); }) == ErrorKind::ConfigInvalid);
}

TEST_CASE("initial positives use a strict threshold") {
  const FeatureBatch batch = make_batch({{1.0, 0.0}, {0.6, 0.8}, {0.0, 1.0}});
  // dots with row 0: 1.0, 0.6, 0.0
  CHECK(initial_positives(batch, 0, 0.5) == std::vector<uint32_t>{0, 1});
  CHECK(initial_positives(batch, 0, 0.6) == std::vector<uint32_t>{0});  // tie excluded
  CHECK(initial_positives(batch, 0, 0.99) == std::vector<uint32_t>{0});
}

TEST_CASE("relocate_proxy averages then rescales") {
  const FeatureBatch batch = make_batch({{1.0, 0.0}, {0.6, 0.8}, {0.0, 1.0}});
  double mean_norm = 0.0;
  const auto proxy = relocate_proxy(batch, {0, 1}, true, &mean_norm);
  // mean = (0.8, 0.4), norm = sqrt(0.8)
  CHECK(mean_norm == doctest::Approx(std::sqrt(0.8)).epsilon(1e-15));
  CHECK(proxy[0] == doctest::Approx(0.8 / std::sqrt(0.8)).epsilon(1e-15));
  CHECK(proxy[1] == doctest::Approx(0.4 / std::sqrt(0.8)).epsilon(1e-15));
  CHECK(l2_norm(proxy.data(), 2) == doctest::Approx(1.0).epsilon(1e-12));

  const auto raw = relocate_proxy(batch, {0, 1}, false);
  CHECK(raw[0] == doctest::Approx(0.8));
  CHECK(raw[1] == doctest::Approx(0.4));
}

TEST_CASE("relocate_proxy rejects an empty set") {
  const FeatureBatch batch = make_batch({{1.0, 0.0}});
  CHECK(kind_of([&] { relocate_proxy(batch, {}); }) == ErrorKind::EmptyPositiveSet);
}

TEST_CASE("zero steps keeps the seed state") {
  const FeatureBatch batch = make_batch({{1.0, 0.0}, {0.6, 0.8}, {0.0, 1.0}});
  MiningConfig cfg;
  cfg.phi0 = 0.5;
  cfg.steps = 0;
  const AnchorState state = propagate_anchor(batch, 0, cfg);
  CHECK(state.step == 0);
  CHECK(state.phi == 0.5);
  CHECK(state.psi == cfg.psi0);
  CHECK(state.positives == std::vector<uint32_t>{0, 1});
  CHECK(state.proxy == std::vector<double>{1.0, 0.0});
  REQUIRE(state.trajectory.size() == 1);
  CHECK(state.trajectory[0].phi == 0.5);
  CHECK(state.trajectory[0].psi_raw == cfg.psi0);
}

TEST_CASE("single-point batch is a fixed point") {
  const FeatureBatch batch = make_batch({{0.0, 1.0}});
  MiningConfig cfg;
  cfg.steps = 3;
  const AnchorState state = propagate_anchor(batch, 0, cfg);
  CHECK(state.positives == std::vector<uint32_t>{0});
  CHECK(state.phi == cfg.phi0);
  CHECK(state.psi == cfg.psi0);
  CHECK(state.proxy == std::vector<double>{0.0, 1.0});
  const Partition parts = partition_sets(batch, state);
  CHECK(parts.positives == std::vector<uint32_t>{0});
  CHECK(parts.ambiguous.empty());
  CHECK(parts.negatives.empty());
}

TEST_CASE("empty seed falls back to the anchor itself") {
  // phi0 = 1.0: nothing exceeds it strictly, the anchor included.
  const FeatureBatch batch = make_batch({{1.0, 0.0}, {0.0, 1.0}});
  MiningConfig cfg;
  cfg.phi0 = 1.0;
  cfg.steps = 2;
  const AnchorState state = propagate_anchor(batch, 0, cfg);
  CHECK(state.positives == std::vector<uint32_t>{0});
  CHECK(state.phi == 1.0);
  CHECK(state.psi == cfg.psi0);
  CHECK(state.proxy == std::vector<double>{1.0, 0.0});
}

TEST_CASE("two-step trajectory matches a hand computation") {
  // Anchor plus two nearby rows and one orthogonal row.
  const std::vector<double> a = {1.0, 0.0};
  const std::vector<double> b = unit({0.9, std::sqrt(1.0 - 0.81)});
  const std::vector<double> c = unit({0.9, -std::sqrt(1.0 - 0.81)});
  const FeatureBatch batch = make_batch({a, b, c, {0.0, 1.0}});
  MiningConfig cfg;
  cfg.phi0 = 0.85;
  cfg.psi0 = 0.1;
  cfg.sigma_pos = 3.0;
  cfg.sigma_amb = 4.0;
  cfg.steps = 1;

  // seed: dots with anchor are 1.0, 0.9, 0.9, 0.0 -> P = {0,1,2}
  // mean of the three = ((1+.9+.9)/3, 0) -> unit (1, 0); sim(v0, v1) = 1
  // phi and psi therefore stay put; regather -> same P.
  const AnchorState state = propagate_anchor(batch, 0, cfg);
  CHECK(state.positives == std::vector<uint32_t>{0, 1, 2});
  CHECK(state.phi == doctest::Approx(0.85).epsilon(1e-15));
  CHECK(state.psi == doctest::Approx(0.1).epsilon(1e-15));
  REQUIRE(state.trajectory.size() == 2);
  CHECK(state.trajectory[1].mean_norm ==
        doctest::Approx((1.0 + 0.9 + 0.9) / 3.0).epsilon(1e-12));
  CHECK(state.proxy[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("psi clamps against phi") {
  // Large ambiguity growth forces the clamp: orthogonal proxy movement.
  const FeatureBatch batch =
      make_batch({{1.0, 0.0}, {0.0, 1.0}, {unit({1.0, 1.0})[0], unit({1.0, 1.0})[1]}});
  MiningConfig cfg;
  cfg.phi0 = 0.6;
  cfg.psi0 = 0.5;
  cfg.sigma_pos = 100.0;  // phi barely moves
  cfg.sigma_amb = 0.5;    // psi jumps
  cfg.steps = 1;
  cfg.clamp_margin = 0.01;
  const AnchorState state = propagate_anchor(batch, 0, cfg);
  REQUIRE(state.trajectory.size() == 2);
  const TrajectoryPoint& last = state.trajectory[1];
  if (last.psi_raw > last.phi - cfg.clamp_margin) {
    CHECK(last.psi == last.phi - cfg.clamp_margin);
  }
  CHECK(state.psi < state.phi);
}

TEST_CASE("partition honors the stored positive set") {
  const FeatureBatch batch = make_batch({{1.0, 0.0}, {0.6, 0.8}, {0.0, 1.0}, {-1.0, 0.0}});
  AnchorState state;
  state.anchor_index = 0;
  state.proxy = {1.0, 0.0};
  state.phi = 0.9;
  state.psi = -0.5;
  state.positives = {0, 2};  // includes a row the phi test would reject
  const Partition parts = partition_sets(batch, state);
  CHECK(parts.positives == std::vector<uint32_t>{0, 2});
  // row 1 sim 0.6 in (psi, phi); row 3 sim -1 below psi
  CHECK(parts.ambiguous == std::vector<uint32_t>{1});
  CHECK(parts.negatives == std::vector<uint32_t>{3});
}

TEST_CASE("partition boundary similarities go outward") {
  const FeatureBatch batch = make_batch({{1.0, 0.0}, {0.6, 0.8}, {0.0, 1.0}});
  AnchorState state;
  state.anchor_index = 0;
  state.proxy = {1.0, 0.0};
  state.positives = {0};
  state.phi = 0.6;  // row 1 sits exactly on phi
  state.psi = 0.0;  // row 2 sits exactly on psi
  const Partition parts = partition_sets(batch, state);
  CHECK(parts.ambiguous.empty());
  CHECK(parts.negatives == std::vector<uint32_t>{1, 2});
}

TEST_CASE("inverted criteria are rejected") {
  const FeatureBatch batch = make_batch({{1.0, 0.0}});
  AnchorState state;
  state.anchor_index = 0;
  state.proxy = {1.0, 0.0};
  state.positives = {0};
  state.phi = 0.2;
  state.psi = 0.2;
  CHECK(kind_of([&] { partition_sets(batch, state); }) == ErrorKind::CriterionInversion);
}

TEST_CASE("unnormalized batches need the explicit opt-in") {
  FeatureBatch batch = make_batch({{0.5, 0.0}, {0.0, 0.5}}, false);
  MiningConfig cfg;
  CHECK(kind_of([&] { mine(batch, cfg); }) == ErrorKind::NormalizationMismatch);
  cfg.allow_unnormalized = true;
  const MiningResult result = mine(batch, cfg);
  CHECK(result.anchors.size() == 2);
}

TEST_CASE("mine equals the per-anchor reference composition") {
  Rng rng(404);
  const FeatureBatch batch = random_batch(rng, 48, 6);
  MiningConfig cfg;
  cfg.phi0 = 0.4;
  cfg.psi0 = 0.0;
  cfg.steps = 3;
  const MiningResult result = mine(batch, cfg);
  REQUIRE(result.anchors.size() == 48);
  for (std::size_t i = 0; i < 48; ++i) {
    const AnchorState state = propagate_anchor(batch, i, cfg);
    const Partition parts = partition_sets(batch, state);
    CHECK(result.anchors[i].anchor == i);
    CHECK(result.anchors[i].positives == parts.positives);
    CHECK(result.anchors[i].ambiguous == parts.ambiguous);
    CHECK(result.negatives_of(i) == parts.negatives);
    CHECK(result.anchors[i].phi == state.phi);
    CHECK(result.anchors[i].psi == state.psi);
  }
}

TEST_CASE("mining is independent of the thread count") {
  Rng rng(2024);
  const FeatureBatch batch = random_batch(rng, 96, 8);
  MiningConfig cfg;
  cfg.phi0 = 0.3;
  cfg.steps = 2;
  const MiningResult serial = mine(batch, cfg, std::nullopt, 1);
  const MiningResult threaded = mine(batch, cfg, std::nullopt, 4);
  REQUIRE(serial.anchors.size() == threaded.anchors.size());
  for (std::size_t i = 0; i < serial.anchors.size(); ++i) {
    CHECK(serial.anchors[i].positives == threaded.anchors[i].positives);
    CHECK(serial.anchors[i].ambiguous == threaded.anchors[i].ambiguous);
    CHECK(serial.anchors[i].phi == threaded.anchors[i].phi);
    CHECK(serial.anchors[i].psi == threaded.anchors[i].psi);
  }
}

TEST_CASE("anchor subset selects exactly those entries") {
  Rng rng(11);
  const FeatureBatch batch = random_batch(rng, 20, 4);
  MiningConfig cfg;
  const std::vector<uint32_t> picks = {3, 7, 19};
  const MiningResult result = mine(batch, cfg, picks);
  REQUIRE(result.anchors.size() == 3);
  const MiningResult full = mine(batch, cfg);
  for (std::size_t k = 0; k < picks.size(); ++k) {
    CHECK(result.anchors[k].anchor == picks[k]);
    CHECK(result.anchors[k].positives == full.anchors[picks[k]].positives);
    CHECK(result.anchors[k].ambiguous == full.anchors[picks[k]].ambiguous);
  }
}

TEST_CASE("row permutation permutes the mined sets") {
  Rng rng(31);
  const FeatureBatch batch = random_batch(rng, 24, 5);
  MiningConfig cfg;
  cfg.phi0 = 0.35;
  cfg.steps = 2;

  // reverse permutation: new row p(i) = old row n-1-i
  const std::size_t n = batch.n();
  FeatureBatch permuted;
  permuted.data = Matrix(n, batch.dim());
  permuted.normalized = true;
  for (std::size_t i = 0; i < n; ++i) {
    const double* from = batch.data.row(n - 1 - i);
    std::copy(from, from + batch.dim(), permuted.data.row(i));
  }

  const MiningResult base = mine(batch, cfg);
  const MiningResult flipped = mine(permuted, cfg);
  auto relabel = [n](std::vector<uint32_t> ids) {
    for (auto& j : ids) j = static_cast<uint32_t>(n - 1 - j);
    std::sort(ids.begin(), ids.end());
    return ids;
  };
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(relabel(flipped.anchors[n - 1 - i].positives) == base.anchors[i].positives);
    CHECK(relabel(flipped.anchors[n - 1 - i].ambiguous) == base.anchors[i].ambiguous);
  }
}

TEST_CASE("partition property over random cases") {
  Rng rng(900);
  for (int iter = 0; iter < 25; ++iter) {
    const std::size_t n = 2 + static_cast<std::size_t>(rng.uniform01() * 40);
    const std::size_t dim = 2 + static_cast<std::size_t>(rng.uniform01() * 6);
    const FeatureBatch batch = random_batch(rng, n, dim);
    MiningConfig cfg;
    cfg.phi0 = 0.2 + 0.7 * rng.uniform01();
    cfg.psi0 = cfg.phi0 - 0.1 - 0.5 * rng.uniform01();
    cfg.sigma_pos = 0.5 + 5.0 * rng.uniform01();
    cfg.sigma_amb = 0.5 + 5.0 * rng.uniform01();
    cfg.steps = static_cast<uint32_t>(rng.uniform01() * 4);
    const MiningResult result = mine(batch, cfg);
    for (std::size_t k = 0; k < result.anchors.size(); ++k) {
      const auto& entry = result.anchors[k];
      const auto negatives = result.negatives_of(k);
      CHECK(entry.positives.size() + entry.ambiguous.size() + negatives.size() == n);
      std::set<uint32_t> all;
      all.insert(entry.positives.begin(), entry.positives.end());
      all.insert(entry.ambiguous.begin(), entry.ambiguous.end());
      all.insert(negatives.begin(), negatives.end());
      CHECK(all.size() == n);
      CHECK_FALSE(entry.positives.empty());
    }
  }
}

TEST_CASE("trajectory criteria move monotonically") {
  Rng rng(901);
  for (int iter = 0; iter < 25; ++iter) {
    const std::size_t n = 2 + static_cast<std::size_t>(rng.uniform01() * 40);
    const FeatureBatch batch = random_batch(rng, n, 4);
    MiningConfig cfg;
    cfg.phi0 = 0.2 + 0.7 * rng.uniform01();
    cfg.psi0 = cfg.phi0 - 0.2 - 0.4 * rng.uniform01();
    cfg.sigma_pos = 0.5 + 5.0 * rng.uniform01();
    cfg.sigma_amb = 0.5 + 5.0 * rng.uniform01();
    cfg.steps = 1 + static_cast<uint32_t>(rng.uniform01() * 3);
    const AnchorState state =
        propagate_anchor(batch, static_cast<std::size_t>(rng.uniform01() * n), cfg);
    for (std::size_t t = 1; t < state.trajectory.size(); ++t) {
      CHECK(state.trajectory[t].phi <= state.trajectory[t - 1].phi + 1e-12);
      CHECK(state.trajectory[t].psi_raw + 1e-12 >= state.trajectory[t - 1].psi);
      CHECK(state.trajectory[t].psi < state.trajectory[t].phi);
    }
  }
}

TEST_CASE("degenerate positive mean keeps the previous proxy") {
  // Antipodal pair: once both are positives the mean vanishes.
  const FeatureBatch batch = make_batch({{1.0, 0.0}, {-1.0, 0.0}});
  MiningConfig cfg;
  cfg.phi0 = 0.5;
  cfg.psi0 = -0.9;
  cfg.sigma_pos = 0.4;  // phi crashes below -1 after one orthogonal-ish move
  cfg.sigma_amb = 50.0;
  cfg.steps = 3;
  cfg.clamp_margin = 0.01;
  const AnchorState state = propagate_anchor(batch, 0, cfg);
  // By step 2 the positive set is {0,1}, the mean is the zero vector, and the
  // proxy must stay where it was instead of dividing by zero.
  CHECK(std::isfinite(state.proxy[0]));
  CHECK(std::isfinite(state.proxy[1]));
  const auto& last = state.trajectory.back();
  if (last.mean_norm < 1e-12) {
    CHECK(state.proxy == state.trajectory[state.trajectory.size() - 2].proxy);
  }
}

TEST_CASE("mining result round trips through json and binary") {
  Rng rng(77);
  const FeatureBatch batch = random_batch(rng, 16, 4);
  MiningConfig cfg;
  cfg.steps = 2;
  MiningResult result = mine(batch, cfg);
  result.source_indices = std::vector<uint32_t>(16);
  for (uint32_t i = 0; i < 16; ++i) (*result.source_indices)[i] = i * 3;

  test::TempDir dir;
  const auto jpath = dir.file("m.json");
  const auto bpath = dir.file("m.ppmr");
  save_mining_json(result, jpath);
  save_mining_binary(result, bpath);

  for (const MiningResult& loaded : {load_mining(jpath), load_mining(bpath)}) {
    CHECK(loaded.n == result.n);
    CHECK(loaded.strategy == result.strategy);
    CHECK(loaded.params == result.params);
    REQUIRE(loaded.source_indices.has_value());
    CHECK(*loaded.source_indices == *result.source_indices);
    REQUIRE(loaded.anchors.size() == result.anchors.size());
    for (std::size_t k = 0; k < result.anchors.size(); ++k) {
      CHECK(loaded.anchors[k].anchor == result.anchors[k].anchor);
      CHECK(loaded.anchors[k].positives == result.anchors[k].positives);
      CHECK(loaded.anchors[k].ambiguous == result.anchors[k].ambiguous);
      CHECK(loaded.anchors[k].phi == result.anchors[k].phi);
      CHECK(loaded.anchors[k].psi == result.anchors[k].psi);
      CHECK(loaded.anchors[k].proxy_norm == result.anchors[k].proxy_norm);
      CHECK(loaded.anchors[k].steps == result.anchors[k].steps);
    }
  }
}

TEST_CASE("nan diagnostics survive both serializations") {
  MiningResult result;
  result.n = 2;
  result.strategy = "knn";
  result.params = {{"k", 1.0}};
  AnchorSets entry;
  entry.anchor = 0;
  entry.positives = {1};
  entry.phi = std::numeric_limits<double>::quiet_NaN();
  entry.psi = std::numeric_limits<double>::quiet_NaN();
  entry.proxy_norm = std::numeric_limits<double>::quiet_NaN();
  result.anchors.push_back(entry);

  test::TempDir dir;
  const auto jpath = dir.file("m.json");
  const auto bpath = dir.file("m.ppmr");
  save_mining_json(result, jpath);
  save_mining_binary(result, bpath);
  for (const MiningResult& loaded : {load_mining(jpath), load_mining(bpath)}) {
    CHECK(std::isnan(loaded.anchors[0].phi));
    CHECK(std::isnan(loaded.anchors[0].psi));
    CHECK(std::isnan(loaded.anchors[0].proxy_norm));
  }
}

TEST_CASE("malformed mining files are rejected") {
  test::TempDir dir;
  const auto path = dir.file("m.json");

  SUBCASE("overlapping sets") {
    test::write_file(path,
                     R"({"format":"ppap-mining","version":1,"n":3,"strategy":"ppap",)"
                     R"("params":{},"anchors":[{"anchor":0,"positives":[1],)"
                     R"("ambiguous":[1],"steps":0}]})");
    CHECK(kind_of([&] { load_mining(path); }) == ErrorKind::MalformedHeader);
  }
  SUBCASE("index outside n") {
    test::write_file(path,
                     R"({"format":"ppap-mining","version":1,"n":2,"strategy":"ppap",)"
                     R"("params":{},"anchors":[{"anchor":0,"positives":[5],)"
                     R"("ambiguous":[],"steps":0}]})");
    CHECK(kind_of([&] { load_mining(path); }) == ErrorKind::MalformedHeader);
  }
  SUBCASE("binary with truncated payload") {
    Rng rng(5);
    const FeatureBatch batch = random_batch(rng, 8, 3);
    MiningResult result = mine(batch, MiningConfig{});
    const auto bpath = dir.file("m.ppmr");
    save_mining_binary(result, bpath);
    const std::string bytes = test::read_file(bpath);
    test::write_file(bpath, bytes.substr(0, bytes.size() - 3));
    CHECK_THROWS_AS(load_mining(bpath), Error);
  }
}

TEST_CASE("engine matches the naive oracle on random cases") {
  Rng rng(5150);
  for (int iter = 0; iter < 20; ++iter) {
    const std::size_t n = 2 + static_cast<std::size_t>(rng.uniform01() * 60);
    const std::size_t dim = 2 + static_cast<std::size_t>(rng.uniform01() * 6);
    const FeatureBatch batch = random_batch(rng, n, dim);
    MiningConfig cfg;
    cfg.phi0 = 0.2 + 0.75 * rng.uniform01();
    cfg.psi0 = cfg.phi0 - 0.15 - 0.5 * rng.uniform01();
    cfg.sigma_pos = 0.5 + 6.0 * rng.uniform01();
    cfg.sigma_amb = 0.5 + 6.0 * rng.uniform01();
    cfg.steps = static_cast<uint32_t>(rng.uniform01() * 4);
    cfg.normalize_proxy = rng.uniform01() < 0.8;

    const std::size_t anchor = static_cast<std::size_t>(rng.uniform01() * n);
    const OracleOutput expected = oracle_mine(batch, cfg, anchor);
    const AnchorState state = propagate_anchor(batch, anchor, cfg);
    const Partition parts = partition_sets(batch, state);
    CHECK(parts.positives == expected.positives);
    CHECK(parts.ambiguous == expected.ambiguous);
    CHECK(parts.negatives == expected.negatives);
    REQUIRE(state.trajectory.size() == expected.trajectory.size());
    for (std::size_t t = 0; t < state.trajectory.size(); ++t) {
      CHECK(state.trajectory[t].phi ==
            doctest::Approx(expected.trajectory[t].phi).epsilon(1e-12));
      CHECK(state.trajectory[t].psi ==
            doctest::Approx(expected.trajectory[t].psi).epsilon(1e-12));
    }
  }
}
