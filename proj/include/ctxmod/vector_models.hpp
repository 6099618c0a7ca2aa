#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ctxmod/facts.hpp"
#include "ctxmod/io.hpp"

namespace ctxmod {

enum class FeatureKind { BoI, BoIT, BoT };

struct Feature {
  std::string id;    // empty for BoT
  std::string type;  // empty for BoI

  std::string display() const {
    if (id.empty()) return type;
    if (type.empty()) return id;
    return "(" + id + "," + type + ")";
  }
};

struct FeatureSpace {
  FeatureKind kind = FeatureKind::BoI;
  std::vector<Feature> features;  // lexicographic, unique
};

struct DocFeatureMatrix {
  FeatureSpace space;
  std::vector<std::string> docs;  // unit names in corpus order
  Eigen::MatrixXd counts;         // docs x features
};

inline DocFeatureMatrix build_bof(const CorpusFacts& corpus, FeatureKind kind) {
  if (corpus.units.empty()) throw std::runtime_error("empty corpus");
  std::map<std::pair<std::string, std::string>, int> feature_ids;
  auto key_of = [kind](const Occurrence& o) -> std::pair<std::string, std::string> {
    switch (kind) {
      case FeatureKind::BoI:
        return {o.id, ""};
      case FeatureKind::BoIT:
        return {o.id, o.type};
      case FeatureKind::BoT:
        return {"", o.type};
    }
    return {};
  };
  for (const auto& u : corpus.units)
    for (const auto& o : u.occurrences) {
      if (kind == FeatureKind::BoT && o.type == kBottom) continue;
      feature_ids.emplace(key_of(o), 0);
    }
  if (feature_ids.empty()) throw std::runtime_error("corpus yields an empty feature space");

  DocFeatureMatrix m;
  m.space.kind = kind;
  int next = 0;
  for (auto& [key, id] : feature_ids) {
    id = next++;
    m.space.features.push_back(Feature{key.first, key.second});
  }
  m.counts = Eigen::MatrixXd::Zero(static_cast<int>(corpus.units.size()), next);
  for (size_t d = 0; d < corpus.units.size(); ++d) {
    m.docs.push_back(corpus.units[d].unit_name);
    for (const auto& o : corpus.units[d].occurrences) {
      if (kind == FeatureKind::BoT && o.type == kBottom) continue;
      m.counts(static_cast<int>(d), feature_ids.at(key_of(o))) += o.count;
    }
  }
  return m;
}

// R diagonal: ln(N/df), floored at epsilon so R stays invertible.
inline Eigen::VectorXd idf_diag(const DocFeatureMatrix& m) {
  const double epsilon = 1e-12;
  int n_docs = static_cast<int>(m.counts.rows());
  Eigen::VectorXd r(m.counts.cols());
  for (int f = 0; f < m.counts.cols(); ++f) {
    int df = 0;
    for (int d = 0; d < n_docs; ++d)
      if (m.counts(d, f) > 0) ++df;
    double v = df > 0 ? std::log(static_cast<double>(n_docs) / df) : 0.0;
    r(f) = v > epsilon ? v : epsilon;
  }
  return r;
}

// Sublinear term-frequency scaling used by the tfidf weighting option.
inline Eigen::MatrixXd sublinear_tf(const Eigen::MatrixXd& counts) {
  Eigen::MatrixXd out = counts;
  for (int i = 0; i < out.rows(); ++i)
    for (int j = 0; j < out.cols(); ++j)
      if (out(i, j) > 0) out(i, j) = 1.0 + std::log(out(i, j));
  return out;
}

// Feature-feature similarity matrix S. For BoI, concept_sim receives the two
// identifier names (identifier-level WSD similarity); for BoIT/BoT it receives
// the two type names. lexical_sim always receives identifier names.
inline Eigen::MatrixXd semantic_matrix(
    const FeatureSpace& space,
    const std::function<double(const std::string&, const std::string&)>& concept_sim,
    const std::function<double(const std::string&, const std::string&)>& lexical_sim,
    int jobs = 1) {
  int n = static_cast<int>(space.features.size());
  Eigen::MatrixXd s = Eigen::MatrixXd::Identity(n, n);
  parallel_for(n, jobs, [&](int i) {
    const Feature& a = space.features[i];
    for (int j = i + 1; j < n; ++j) {
      const Feature& b = space.features[j];
      double v = 0.0;
      switch (space.kind) {
        case FeatureKind::BoI:
          v = concept_sim(a.id, b.id) * lexical_sim(a.id, b.id);
          break;
        case FeatureKind::BoIT:
          v = concept_sim(a.type, b.type) * lexical_sim(a.id, b.id);
          break;
        case FeatureKind::BoT:
          v = concept_sim(a.type, b.type);
          break;
      }
      s(i, j) = std::max(0.0, v);
    }
  });
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) s(j, i) = s(i, j);
  return s;
}

// K = (Phi P)(Phi P)^T with P = R S, cosine-normalized to unit diagonal.
// All-zero documents keep self-similarity 1 and zero elsewhere.
inline Eigen::MatrixXd document_kernel(const Eigen::MatrixXd& counts, const Eigen::VectorXd& r,
                                       const Eigen::MatrixXd& s) {
  Eigen::MatrixXd b = counts * (r.asDiagonal() * s);
  Eigen::MatrixXd k = b * b.transpose();
  int n = static_cast<int>(k.rows());
  Eigen::VectorXd diag = k.diagonal();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    out(i, i) = 1.0;
    for (int j = i + 1; j < n; ++j) {
      double denom = std::sqrt(diag(i) * diag(j));
      double v = denom > 0.0 ? k(i, j) / denom : 0.0;
      out(i, j) = out(j, i) = v;
    }
  }
  return out;
}

inline Eigen::MatrixXd kernel_to_distance(const Eigen::MatrixXd& k) {
  int n = static_cast<int>(k.rows());
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      d(i, j) = std::clamp(1.0 - k(i, j), 0.0, 2.0);
    }
  return d;
}

}  // namespace ctxmod
