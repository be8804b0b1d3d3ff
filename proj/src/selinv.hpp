#pragma once

#include <algorithm>
#include <stdexcept>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

namespace vse::detail {

/// Entries of A^-1 on the pattern of the Cholesky factor of P A P^T
/// (Takahashi recursions). Lookups take original, unpermuted indices.
class SelectedInverse {
 public:
  explicit SelectedInverse(const Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>& llt)
      : perm_(llt.permutationP().indices()) {
    const Eigen::SparseMatrix<double> l = llt.matrixL();
    s_ = l;
    const auto n = l.cols();
    const auto* outer = l.outerIndexPtr();
    const auto* inner = l.innerIndexPtr();
    const double* lv = l.valuePtr();
    double* sv = s_.valuePtr();
    std::vector<double> tmp;
    for (Eigen::Index i = n - 1; i >= 0; --i) {
      const auto b = outer[i], e = outer[i + 1];
      if (inner[b] != i) throw std::logic_error("selected inverse: factor diagonal missing");
      const double lii = lv[b];
      tmp.assign(static_cast<std::size_t>(e - b), 0.0);
      for (auto a = b + 1; a < e; ++a) {
        double acc = 0.0;
        for (auto c = b + 1; c < e; ++c) acc += lv[c] * at_perm(inner[a], inner[c]);
        tmp[static_cast<std::size_t>(a - b)] = -acc / lii;
      }
      double diag = 1.0 / (lii * lii);
      for (auto a = b + 1; a < e; ++a) {
        sv[a] = tmp[static_cast<std::size_t>(a - b)];
        diag -= lv[a] * sv[a] / lii;
      }
      sv[b] = diag;
    }
  }

  /// (A^-1)(r, c); the entry must lie on the factor pattern.
  double operator()(Eigen::Index r, Eigen::Index c) const { return at_perm(perm_[r], perm_[c]); }

 private:
  double at_perm(Eigen::Index r, Eigen::Index c) const {
    if (r < c) std::swap(r, c);
    const auto* inner = s_.innerIndexPtr();
    const auto* b = inner + s_.outerIndexPtr()[c];
    const auto* e = inner + s_.outerIndexPtr()[c + 1];
    const auto* it = std::lower_bound(b, e, static_cast<int>(r));
    if (it == e || *it != r) throw std::logic_error("selected inverse: entry outside the factor pattern");
    return s_.valuePtr()[it - inner];
  }

  Eigen::VectorXi perm_;
  Eigen::SparseMatrix<double> s_;
};

}  // namespace vse::detail
