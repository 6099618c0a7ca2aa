#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "ctxmod/vector_models.hpp"
#include "fixture_util.hpp"

using namespace ctxmod;

namespace {

int feature_index(const DocFeatureMatrix& m, const std::string& id, const std::string& type) {
  for (size_t i = 0; i < m.space.features.size(); ++i)
    if (m.space.features[i].id == id && m.space.features[i].type == type)
      return static_cast<int>(i);
  return -1;
}

double count_of(const DocFeatureMatrix& m, const std::string& id, const std::string& type) {
  int idx = feature_index(m, id, type);
  return idx < 0 ? -1.0 : m.counts(0, idx);
}

}  // namespace

TEST_CASE("employee feature vectors by model", "[models]") {
  CorpusFacts corpus = testutil::employee_facts();

  DocFeatureMatrix boi = build_bof(corpus, FeatureKind::BoI);
  REQUIRE(boi.space.features.size() == 9);
  CHECK(count_of(boi, "name", "") == 2.0);
  CHECK(count_of(boi, "salary", "") == 4.0);
  CHECK(count_of(boi, "hireDay", "") == 1.0);
  CHECK(count_of(boi, "year", "") == 1.0);
  CHECK(count_of(boi, "month", "") == 1.0);
  CHECK(count_of(boi, "day", "") == 1.0);
  CHECK(count_of(boi, "temp", "") == 4.0);
  CHECK(count_of(boi, "byPercent", "") == 1.0);
  CHECK(count_of(boi, "bonus", "") == 1.0);

  DocFeatureMatrix boit = build_bof(corpus, FeatureKind::BoIT);
  REQUIRE(boit.space.features.size() == 10);
  CHECK(count_of(boit, "temp", "Date") == 2.0);
  CHECK(count_of(boit, "temp", "double") == 2.0);
  CHECK(count_of(boit, "salary", "double") == 4.0);
  CHECK(count_of(boit, "hireDay", "Date") == 1.0);

  DocFeatureMatrix bot = build_bof(corpus, FeatureKind::BoT);
  REQUIRE(bot.space.features.size() == 4);
  CHECK(count_of(bot, "", "String") == 2.0);
  CHECK(count_of(bot, "", "double") == 8.0);
  CHECK(count_of(bot, "", "int") == 3.0);
  CHECK(count_of(bot, "", "Date") == 3.0);
}

TEST_CASE("feature display names", "[models]") {
  CHECK(Feature{"temp", "Date"}.display() == "(temp,Date)");
  CHECK(Feature{"temp", ""}.display() == "temp");
  CHECK(Feature{"", "Date"}.display() == "Date");
}

TEST_CASE("bottom-typed occurrences drop from the type model only", "[models]") {
  auto units = parse_program("public class C { public void m(C x) { mystery(x); } }");
  CorpusFacts corpus = ingest_corpus(units, LibraryFacts{});
  DocFeatureMatrix boi = build_bof(corpus, FeatureKind::BoI);
  CHECK(feature_index(boi, "mystery", "") >= 0);
  DocFeatureMatrix bot = build_bof(corpus, FeatureKind::BoT);
  for (const auto& f : bot.space.features) CHECK(f.type != kBottom);
}

TEST_CASE("idf weights with a floor for ubiquitous features", "[models]") {
  CorpusFacts corpus = testutil::corpus_facts();
  DocFeatureMatrix boi = build_bof(corpus, FeatureKind::BoI);
  Eigen::VectorXd r = idf_diag(boi);
  REQUIRE(r.size() == static_cast<int>(boi.space.features.size()));

  int n = static_cast<int>(corpus.units.size());
  for (int j = 0; j < r.size(); ++j) {
    int df = 0;
    for (int i = 0; i < boi.counts.rows(); ++i)
      if (boi.counts(i, j) > 0) ++df;
    double expected = std::max(std::log(static_cast<double>(n) / df), 1e-12);
    CHECK(r(j) == Catch::Approx(expected).margin(1e-15));
  }

  // temp appears in every unit of the corpus fixture; its idf hits the floor.
  int temp_idx = feature_index(boi, "temp", "");
  REQUIRE(temp_idx >= 0);
  int temp_df = 0;
  for (int i = 0; i < boi.counts.rows(); ++i)
    if (boi.counts(i, temp_idx) > 0) ++temp_df;
  if (temp_df == n) CHECK(r(temp_idx) == 1e-12);
}

TEST_CASE("sublinear tf damps repeated occurrences", "[models]") {
  Eigen::MatrixXd counts(1, 3);
  counts << 0.0, 1.0, 8.0;
  Eigen::MatrixXd tf = sublinear_tf(counts);
  CHECK(tf(0, 0) == 0.0);
  CHECK(tf(0, 1) == 1.0);
  CHECK(tf(0, 2) == Catch::Approx(1.0 + std::log(8.0)));
}

TEST_CASE("document kernel with identity decomposition is plain cosine", "[models]") {
  CorpusFacts corpus = testutil::corpus_facts();
  DocFeatureMatrix boi = build_bof(corpus, FeatureKind::BoI);
  int n = static_cast<int>(boi.counts.rows());
  int f = static_cast<int>(boi.counts.cols());

  Eigen::MatrixXd k = document_kernel(boi.counts, Eigen::VectorXd::Ones(f),
                                      Eigen::MatrixXd::Identity(f, f));
  for (int i = 0; i < n; ++i) {
    CHECK(k(i, i) == 1.0);
    for (int j = 0; j < n; ++j) {
      double dot = boi.counts.row(i).dot(boi.counts.row(j));
      double denom = boi.counts.row(i).norm() * boi.counts.row(j).norm();
      double expected = i == j ? 1.0 : dot / denom;
      CHECK(k(i, j) == Catch::Approx(expected).margin(1e-12));
      CHECK(k(i, j) == Catch::Approx(k(j, i)).margin(0.0));
    }
  }
}

TEST_CASE("document kernel is positive semidefinite on the fixture", "[models]") {
  CorpusFacts corpus = testutil::corpus_facts();
  DocFeatureMatrix boit = build_bof(corpus, FeatureKind::BoIT);
  int f = static_cast<int>(boit.counts.cols());

  Eigen::MatrixXd k = document_kernel(boit.counts, idf_diag(boit),
                                      Eigen::MatrixXd::Identity(f, f));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(k);
  CHECK(eig.eigenvalues().minCoeff() >= -1e-8);
  for (int i = 0; i < k.rows(); ++i) CHECK(k(i, i) == 1.0);
}

TEST_CASE("all-zero documents keep unit self similarity", "[models]") {
  Eigen::MatrixXd counts(2, 2);
  counts << 1.0, 2.0, 0.0, 0.0;
  Eigen::MatrixXd k = document_kernel(counts, Eigen::VectorXd::Ones(2),
                                      Eigen::MatrixXd::Identity(2, 2));
  CHECK(k(1, 1) == 1.0);
  CHECK(k(0, 1) == 0.0);
}

TEST_CASE("kernel to distance clamps into the metric range", "[models]") {
  Eigen::MatrixXd k(2, 2);
  k << 1.0, -0.5, -0.5, 1.0;
  Eigen::MatrixXd d = kernel_to_distance(k);
  CHECK(d(0, 0) == 0.0);
  CHECK(d(1, 1) == 0.0);
  CHECK(d(0, 1) == 1.5);

  k(0, 1) = k(1, 0) = 3.0;
  d = kernel_to_distance(k);
  CHECK(d(0, 1) == 0.0);

  k(0, 1) = k(1, 0) = -2.0;
  d = kernel_to_distance(k);
  CHECK(d(0, 1) == 2.0);
}

TEST_CASE("semantic matrix composes concept and lexical scores", "[models]") {
  CorpusFacts corpus = testutil::employee_facts();
  DocFeatureMatrix boit = build_bof(corpus, FeatureKind::BoIT);

  auto concept_sim = [](const std::string& a, const std::string& b) {
    return a == b ? 1.0 : 0.5;
  };
  auto lex = [](const std::string& a, const std::string& b) { return a == b ? 1.0 : 0.25; };
  Eigen::MatrixXd s = semantic_matrix(boit.space, concept_sim, lex);

  int n = static_cast<int>(boit.space.features.size());
  REQUIRE(s.rows() == n);
  for (int i = 0; i < n; ++i) CHECK(s(i, i) == 1.0);
  CHECK((s - s.transpose()).cwiseAbs().maxCoeff() == 0.0);

  int a = feature_index(boit, "temp", "Date");
  int b = feature_index(boit, "temp", "double");
  // Same identifier, different types: concept 0.5, lexical 1.
  CHECK(s(a, b) == Catch::Approx(0.5));

  int c = feature_index(boit, "salary", "double");
  // Different identifiers, different types: 0.5 * 0.25.
  CHECK(s(a, c) == Catch::Approx(0.125));
  // (temp,double) vs (salary,double): same type, different identifier.
  CHECK(s(b, c) == Catch::Approx(0.25));

  auto negative = [](const std::string&, const std::string&) { return -2.0; };
  Eigen::MatrixXd clamped = semantic_matrix(boit.space, negative, lex);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) CHECK(clamped(i, j) == 0.0);
}

TEST_CASE("empty corpus rejected", "[models]") {
  CHECK_THROWS(build_bof(CorpusFacts{}, FeatureKind::BoI));
}
