#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>

#include "cood/datagen.hpp"
#include "support/oracles.hpp"

using cood::LabeledDataset;
using cood::Matrix;

namespace {

std::vector<std::vector<double>> class_means(const LabeledDataset& ds) {
  std::vector<std::vector<double>> means(ds.num_classes(), std::vector<double>(ds.dim(), 0.0));
  const auto counts = ds.class_counts();
  for (std::size_t r = 0; r < ds.size(); ++r) {
    const auto k = static_cast<std::size_t>(ds.labels()[r]);
    for (std::size_t j = 0; j < ds.dim(); ++j) means[k][j] += ds.inputs()(r, j) / static_cast<double>(counts[k]);
  }
  return means;
}

/// AUROC of the distance-to-nearest-ID-mean oracle scorer.
double oracle_auroc(const cood::DatasetPair& pair) {
  const auto means = class_means(pair.id_train);
  std::vector<double> id, ood;
  for (std::size_t r = 0; r < pair.id_test.size(); ++r)
    id.push_back(oracle::nearest_mean_distance(pair.id_test.inputs().row(r), means));
  for (std::size_t r = 0; r < pair.ood_test.size(); ++r)
    ood.push_back(oracle::nearest_mean_distance(pair.ood_test.inputs().row(r), means));
  return oracle::auroc(id, ood);
}

std::vector<std::vector<double>> sorted_rows(const Matrix& m) {
  std::vector<std::vector<double>> rows;
  for (std::size_t r = 0; r < m.rows(); ++r) rows.emplace_back(m.row(r).begin(), m.row(r).end());
  std::sort(rows.begin(), rows.end());
  return rows;
}

}  // namespace

TEST_CASE("LabeledDataset constructor enforces invariants") {
  CHECK_THROWS_AS(LabeledDataset(Matrix(3, 2), {0, 1}), cood::DataError);
  Matrix bad(2, 2);
  bad(1, 1) = NAN;
  CHECK_THROWS_AS(LabeledDataset(bad, {0, 1}), cood::DataError);
  CHECK_THROWS_AS(LabeledDataset(Matrix(2, 2), {0, 3}, 2), cood::DataError);
  CHECK_THROWS_AS(LabeledDataset(Matrix(2, 2), {-1, 0}), cood::DataError);
  const LabeledDataset ok(Matrix(4, 2), {0, 1, 1, 0});
  CHECK(ok.num_classes() == 2);
  CHECK_NOTHROW(ok.require_min_per_class(2));
  CHECK_THROWS_AS(ok.require_min_per_class(3), cood::DataError);
}

TEST_CASE("PairConfig validation") {
  cood::PairConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.num_classes = 1;
  CHECK_THROWS_AS(cfg.validate(), cood::DataError);
  cfg = {};
  cfg.input_dim = 1;
  CHECK_THROWS_AS(cfg.validate(), cood::DataError);
  cfg = {};
  cfg.samples_per_class = 15;
  CHECK_THROWS_AS(cfg.validate(), cood::DataError);
  cfg = {};
  cfg.ood_shift = -1.0;
  CHECK_THROWS_AS(cfg.validate(), cood::DataError);
  CHECK_THROWS_AS(cood::preset_pair("nowhere"), cood::DataError);
  CHECK(cood::parse_ood_mode("shared-style") == cood::OodMode::shared_style);
}

TEST_CASE("far pair with a large shift is separable by the distance-to-mean oracle") {
  cood::PairConfig cfg;
  cfg.num_classes = 3;
  cfg.input_dim = 32;
  cfg.ood_mode = cood::OodMode::far;
  cfg.ood_shift = 10.0;
  cfg.seed = 1;
  const auto pair = cood::generate_pair(cfg);
  CHECK(pair.id_train.size() == 600);
  CHECK(pair.id_test.size() == 300);
  CHECK(pair.ood_test.dim() == 32);
  CHECK(oracle_auroc(pair) >= 0.99);
}

TEST_CASE("near pair with zero shift and identical covariances is at chance") {
  cood::PairConfig cfg;
  cfg.num_classes = 3;
  cfg.ood_mode = cood::OodMode::near;
  cfg.ood_shift = 0.0;
  cfg.class_spread = 0.0;
  cfg.samples_per_class = 400;
  cfg.seed = 2;
  const double a = oracle_auroc(cood::generate_pair(cfg));
  CHECK(a >= 0.45);
  CHECK(a <= 0.55);
}

TEST_CASE("generate_pair is deterministic given the seed") {
  auto cfg = cood::preset_pair("shared-style");
  cfg.seed = 9;
  const auto a = cood::generate_pair(cfg);
  const auto b = cood::generate_pair(cfg);
  CHECK(cood::format_features_csv(a.id_train) == cood::format_features_csv(b.id_train));
  CHECK(cood::format_features_csv(a.id_test) == cood::format_features_csv(b.id_test));
  CHECK(cood::format_features_csv(a.ood_test) == cood::format_features_csv(b.ood_test));
  cfg.seed = 10;
  CHECK_FALSE(cood::generate_pair(cfg).id_train == a.id_train);
}

TEST_CASE("oracle AUROC grows with the OOD shift") {
  const std::vector<double> shifts = {0.0, 1.0, 2.0, 3.0, 4.0};
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::vector<double> aurocs;
    for (double s : shifts) {
      cood::PairConfig cfg;
      cfg.num_classes = 4;
      cfg.input_dim = 16;
      cfg.ood_mode = cood::OodMode::near;
      cfg.ood_shift = s;
      cfg.samples_per_class = 100;
      cfg.seed = seed;
      aurocs.push_back(oracle_auroc(cood::generate_pair(cfg)));
    }
    CAPTURE(seed);
    CHECK(oracle::spearman(shifts, aurocs) >= 0.9);
  }
}

TEST_CASE("augment identity, shape and determinism") {
  const std::vector<double> x = {1.0, -2.0, 3.5, 0.25};
  cood::Rng rng(1);
  const cood::AugmentPolicy identity{0.0, 0.0, 1.0, 1.0};
  CHECK(cood::augment(x, identity, rng) == x);

  const cood::AugmentPolicy policy;
  cood::Rng r1(42), r2(42);
  const auto a = cood::augment(x, policy, r1);
  CHECK(a.size() == x.size());
  CHECK(a == cood::augment(x, policy, r2));

  const cood::AugmentPolicy tiny{1e-14, 0.0, 1.0, 1.0};
  const auto t = cood::augment(x, tiny, rng);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(t[i] - x[i]) <= 1e-12);
}

TEST_CASE("augment masking rate and scale range") {
  const std::vector<double> x(1000, 1.0);
  cood::Rng rng(3);
  const cood::AugmentPolicy mask_only{0.0, 0.3, 1.0, 1.0};
  const auto m = cood::augment(x, mask_only, rng);
  const double zeros = static_cast<double>(std::count(m.begin(), m.end(), 0.0));
  CHECK(zeros / 1000.0 == doctest::Approx(0.3).epsilon(0.2));

  const cood::AugmentPolicy scale_only{0.0, 0.0, 0.5, 0.7};
  for (int i = 0; i < 20; ++i) {
    const auto s = cood::augment(x, scale_only, rng);
    CHECK(s[0] >= 0.5);
    CHECK(s[0] <= 0.7);
    CHECK(std::all_of(s.begin(), s.end(), [&](double v) { return v == s[0]; }));
  }
  CHECK_THROWS_AS((cood::AugmentPolicy{0.0, 1.0, 1.0, 1.0}.validate()), cood::DataError);
  CHECK_THROWS_AS((cood::AugmentPolicy{0.0, 0.0, 1.2, 1.0}.validate()), cood::DataError);
}

TEST_CASE("feature CSV parsing") {
  const auto ds = cood::parse_features_csv("label,f0,f1\n0,1.0,2.0\n1,3.0,4.0");
  CHECK(ds.size() == 2);
  CHECK(ds.dim() == 2);
  CHECK(ds.num_classes() == 2);
  CHECK(ds.inputs()(1, 0) == 3.0);

  const auto remapped = cood::parse_features_csv("label,f0\r\n9,1e-3\r\n5,+2\r\n9,-1.5E2\r\n");
  CHECK(remapped.labels() == std::vector<int>{0, 1, 0});
  CHECK(remapped.label_names() == std::vector<long long>{9, 5});
  CHECK(remapped.inputs()(0, 0) == 1e-3);
  CHECK(remapped.inputs()(2, 0) == -150.0);

  const auto sorted = cood::parse_features_csv("label,f0\n5,0\n9,1\n");
  CHECK(sorted.labels() == std::vector<int>{0, 1});
  CHECK(sorted.label_names() == std::vector<long long>{5, 9});
}

TEST_CASE("feature CSV errors carry kind and location") {
  auto kind_of = [](std::string_view text) {
    try {
      (void)cood::parse_features_csv(text);
    } catch (const cood::CsvError& e) {
      return std::make_tuple(e.kind(), e.line(), e.column());
    }
    FAIL("expected CsvError");
    return std::make_tuple(cood::CsvErrorKind::io, std::size_t{0}, std::size_t{0});
  };
  CHECK(std::get<0>(kind_of("")) == cood::CsvErrorKind::empty_file);
  CHECK(std::get<0>(kind_of("0,1.0\n")) == cood::CsvErrorKind::missing_header);
  const auto nn = kind_of("label,f0,f1\n0,1.0,abc\n");
  CHECK(std::get<0>(nn) == cood::CsvErrorKind::non_numeric);
  CHECK(std::get<1>(nn) == 2);
  CHECK(std::get<2>(nn) == 3);
  const auto ragged = kind_of("label,f0,f1\n0,1.0,2.0\n1,3.0\n");
  CHECK(std::get<0>(ragged) == cood::CsvErrorKind::ragged_row);
  CHECK(std::get<1>(ragged) == 3);
  CHECK(std::get<0>(kind_of("label,f0\n0,nan\n")) == cood::CsvErrorKind::non_numeric);
  CHECK_THROWS_AS(cood::load_features_csv("/nonexistent/features.csv"), cood::CsvError);
}

TEST_CASE("feature CSV round-trips through a file") {
  cood::PairConfig cfg;
  cfg.num_classes = 3;
  cfg.input_dim = 5;
  cfg.samples_per_class = 20;
  cfg.seed = 4;
  const auto ds = cood::generate_pair(cfg).id_train;
  const auto path = std::filesystem::temp_directory_path() / "cood_test_roundtrip.csv";
  cood::write_features_csv(ds, path);
  const auto back = cood::load_features_csv(path);
  std::filesystem::remove(path);
  CHECK(back.inputs() == ds.inputs());
  CHECK(back.labels() == ds.labels());
  CHECK(cood::format_features_csv(back) == cood::format_features_csv(ds));
}

TEST_CASE("stratified_split proportions and boundary") {
  std::vector<int> labels;
  for (int k = 0; k < 3; ++k) labels.insert(labels.end(), 100, k);
  Matrix x(300, 2);
  for (std::size_t r = 0; r < 300; ++r) x(r, 0) = static_cast<double>(r);
  const LabeledDataset ds(x, labels);
  const auto [train, test] = cood::stratified_split(ds, 0.2, 1);
  CHECK(test.class_counts() == std::vector<std::size_t>{20, 20, 20});
  CHECK(train.class_counts() == std::vector<std::size_t>{80, 80, 80});

  std::vector<std::vector<double>> all = sorted_rows(train.inputs());
  const auto t = sorted_rows(test.inputs());
  all.insert(all.end(), t.begin(), t.end());
  std::sort(all.begin(), all.end());
  CHECK(all == sorted_rows(ds.inputs()));

  const LabeledDataset pairs(Matrix(4, 1, {1, 2, 3, 4}), {0, 0, 1, 1});
  const auto [tr2, te2] = cood::stratified_split(pairs, 0.5, 3);
  CHECK(tr2.class_counts() == std::vector<std::size_t>{1, 1});
  CHECK(te2.class_counts() == std::vector<std::size_t>{1, 1});
}

TEST_CASE("stratified_split seeds and errors") {
  std::vector<int> labels;
  for (int k = 0; k < 2; ++k) labels.insert(labels.end(), 50, k);
  Matrix x(100, 1);
  for (std::size_t r = 0; r < 100; ++r) x(r, 0) = static_cast<double>(r);
  const LabeledDataset ds(x, labels);
  const auto a = cood::stratified_split(ds, 0.3, 5);
  const auto b = cood::stratified_split(ds, 0.3, 5);
  const auto c = cood::stratified_split(ds, 0.3, 6);
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
  CHECK_FALSE(a.second.inputs() == c.second.inputs());

  CHECK_THROWS_AS(cood::stratified_split(ds, 0.0, 1), cood::DataError);
  CHECK_THROWS_AS(cood::stratified_split(ds, 1.0, 1), cood::DataError);
  const LabeledDataset lonely(Matrix(3, 1), {0, 0, 1});
  CHECK_THROWS_AS(cood::stratified_split(lonely, 0.5, 1), cood::DataError);
}
