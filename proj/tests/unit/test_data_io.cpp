#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "stdagcn/csv.hpp"
#include "stdagcn/dag_extraction.hpp"
#include "stdagcn/data_io.hpp"
#include "stdagcn/error.hpp"
#include "test_paths.hpp"

using namespace stdagcn;
using doctest::Approx;
namespace fs = std::filesystem;

namespace {

void write_file(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p) << text;
}

std::string series_csv(std::size_t n, std::size_t t, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(3.0, 2.0);
  std::string s;
  for (std::size_t i = 0; i < n; ++i) s += (i ? ",r" : "r") + std::to_string(i);
  s += "\n";
  for (std::size_t r = 0; r < t; ++r) {
    for (std::size_t i = 0; i < n; ++i) s += (i ? "," : "") + csv::format(d(rng));
    s += "\n";
  }
  return s;
}

void check_standardized(const SubjectRecord& r) {
  for (Eigen::Index i = 0; i < r.series.rows(); ++i) {
    const auto row = r.series.row(i);
    const double mean = row.mean();
    const double sd = std::sqrt((row.array() - mean).square().mean());
    CHECK(std::abs(mean) < 1e-9);
    CHECK(std::abs(sd - 1.0) < 1e-6);
  }
}

}  // namespace

TEST_CASE("standardize") {
  std::vector<double> row{1, 2, 3};
  CHECK_FALSE(standardize(row));
  CHECK(row[0] == Approx(-1.224744871391589));
  CHECK(row[1] == Approx(0.0));
  CHECK(row[2] == Approx(1.224744871391589));
  auto again = row;
  standardize(again);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(again[i] - row[i]) < 1e-12);
  std::vector<double> flat{5, 5, 5};
  CHECK(standardize(flat));
  CHECK(flat == std::vector<double>{0, 0, 0});
}

TEST_CASE("sample_subsequence") {
  SubjectRecord r;
  r.series = Matrix(2, 10);
  for (int i = 0; i < 20; ++i) r.series.data()[i] = i;
  std::mt19937_64 rng(1);
  std::size_t start = 99;
  auto full = sample_subsequence(r, 10, rng, &start);
  CHECK(start == 0);
  CHECK(full.shape() == Shape{2, 10, 1});
  CHECK(full.values()[10] == 10.0);
  CHECK_THROWS_AS(sample_subsequence(r, 11, rng), ConfigError);

  std::mt19937_64 a(5), b(5);
  for (int i = 0; i < 20; ++i) CHECK(sample_start(10, 4, a) == sample_start(10, 4, b));

  std::mt19937_64 mc(2024);
  std::vector<int> counts(5, 0);
  for (int i = 0; i < 10000; ++i) ++counts[sample_start(12, 8, mc)];
  for (int c : counts) {
    CHECK(c / 1e4 >= 0.18);
    CHECK(c / 1e4 <= 0.22);
  }

  std::size_t s = 0;
  auto w = sample_subsequence(r, 4, mc, &s);
  CHECK(w.values()[0] == static_cast<double>(s));
  CHECK(w.values()[4] == static_cast<double>(10 + s));
}

TEST_CASE("load_dataset") {
  const fs::path dir = test_paths::scratch("load_dataset");
  write_file(dir / "a.csv", series_csv(4, 32, 1));
  write_file(dir / "b.csv", series_csv(4, 32, 2));
  write_file(dir / "manifest.csv", "subject_id,label,path\nA,0,a.csv\nB,1,b.csv\n");
  auto data = load_dataset(dir / "manifest.csv");
  CHECK(data.nodes() == 4);
  CHECK(data.length() == 32);
  CHECK(data.size() == 2);
  CHECK(data.roi_names[3] == "r3");
  for (const auto& r : data.records) check_standardized(r);

  SUBCASE("ROI count mismatch names the subject") {
    write_file(dir / "c.csv", series_csv(3, 32, 3));
    write_file(dir / "m2.csv", "subject_id,label,path\nA,0,a.csv\nC,1,c.csv\n");
    try {
      load_dataset(dir / "m2.csv");
      FAIL("expected a data error");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("'C'") != std::string::npos);
    }
  }
  SUBCASE("non-binary label") {
    write_file(dir / "m3.csv", "subject_id,label,path\nA,0,a.csv\nB,2,b.csv\n");
    CHECK_THROWS_AS(load_dataset(dir / "m3.csv"), DataError);
  }
  SUBCASE("non-numeric cell reports row and column") {
    auto text = series_csv(4, 5, 4);
    text.replace(text.find('\n') + 1, 1, "x");
    write_file(dir / "d.csv", text);
    write_file(dir / "m4.csv", "subject_id,label,path\nD,0,d.csv\n");
    try {
      load_dataset(dir / "m4.csv");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("row 2") != std::string::npos);
      CHECK(msg.find("column 1") != std::string::npos);
    }
  }
  SUBCASE("missing manifest") {
    CHECK_THROWS_AS(load_dataset(dir / "nope.csv"), IoError);
  }
}

TEST_CASE("dataset round trip") {
  SyntheticSpec spec;
  spec.subjects_per_class = 3;
  spec.length = 40;
  auto syn = generate_synthetic(spec);
  const fs::path dir = test_paths::scratch("round_trip");
  auto manifest = write_dataset(syn.dataset, dir);
  auto back = load_dataset(manifest);
  REQUIRE(back.size() == syn.dataset.size());
  CHECK(back.roi_names == syn.dataset.roi_names);
  for (std::size_t s = 0; s < back.size(); ++s) {
    CHECK(back.records[s].subject_id == syn.dataset.records[s].subject_id);
    CHECK(back.records[s].label == syn.dataset.records[s].label);
    CHECK((back.records[s].series - syn.dataset.records[s].series).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("generate_synthetic") {
  SyntheticSpec spec;
  auto syn = generate_synthetic(spec);
  CHECK(syn.dataset.size() == 200);
  CHECK(syn.dataset.nodes() == 10);
  CHECK(syn.dataset.length() == 256);
  CHECK(is_acyclic(syn.truth));
  CHECK_FALSE(oracle::has_cycle(syn.truth));
  for (const auto& r : syn.dataset.records) check_standardized(r);
  for (const auto& e : syn.perturbed_edges) CHECK(syn.truth(e.source, e.target) == e.weight);

  auto again = generate_synthetic(spec);
  for (std::size_t s = 0; s < 200; ++s) CHECK(again.dataset.records[s].series == syn.dataset.records[s].series);

  SyntheticSpec bad = spec;
  bad.edge_probability = 1.5;
  CHECK_THROWS_AS(generate_synthetic(bad), ConfigError);
  bad = spec;
  bad.class_scale = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("unit class scale carries no label signal") {
  // One 200-subject draw has a binomial spread of about 0.035, so the
  // chance-level check averages ten independent datasets.
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SyntheticSpec spec;
    spec.class_scale = 1.0;
    spec.seed = seed;
    auto data = generate_synthetic(spec).dataset;
    // 5-fold protocol so that every subject is predicted once.
    double acc = 0.0;
    for (std::size_t fold = 0; fold < 5; ++fold) {
      std::vector<Matrix> train, test;
      std::vector<int> ytrain, ytest;
      for (std::size_t s = 0; s < data.size(); ++s) {
        auto& dst = s % 5 == fold ? test : train;
        auto& y = s % 5 == fold ? ytest : ytrain;
        dst.push_back(data.records[s].series);
        y.push_back(data.records[s].label);
      }
      acc += oracle::nearest_centroid_accuracy(train, ytrain, test, ytest) / 5.0;
    }
    total += acc;
  }
  const double mean = total / 10.0;
  CHECK(mean >= 0.45);
  CHECK(mean <= 0.55);
}

TEST_CASE("pearson correlation") {
  Matrix s(2, 4);
  s << 1, 2, 3, 4, 2, 4, 6, 8;
  auto c = pearson_correlation(s);
  CHECK(c(0, 1) == Approx(1.0));
  CHECK(c(1, 1) == Approx(1.0));
  s.row(1) << 4, 3, 2, 1;
  CHECK(pearson_correlation(s)(0, 1) == Approx(-1.0));
}
