#pragma once

// Gaussian discriminant classifiers: LDA (pooled covariance), QDA
// (per-class covariance) and Gaussian naive Bayes.

#include "cogsub/classifiers/kind.hpp"

#include <cmath>
#include <span>

namespace cogsub::classifiers {

namespace detail {

struct ClassMoments {
  Vector mean;
  Matrix scatter;  // sum of outer products of centered rows
  std::size_t n = 0;
};

inline ClassMoments class_moments(const Matrix& x, std::span<const Label> y, Label cls, bool want_scatter) {
  ClassMoments m;
  const auto p = x.cols();
  m.mean = Vector::Zero(p);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    if (y[static_cast<std::size_t>(i)] == cls) {
      m.mean += x.row(i).transpose();
      ++m.n;
    }
  m.mean /= static_cast<double>(m.n);
  if (want_scatter) {
    m.scatter = Matrix::Zero(p, p);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      if (y[static_cast<std::size_t>(i)] == cls) {
        Vector d = x.row(i).transpose() - m.mean;
        m.scatter.noalias() += d * d.transpose();
      }
  }
  return m;
}

inline Matrix shrink(Matrix cov, double shrinkage) {
  const auto p = cov.rows();
  const double tr = cov.trace();
  double ridge = shrinkage * tr / static_cast<double>(p);
  if (shrinkage > 0 && !(ridge > 0)) ridge = shrinkage;  // all-constant features
  cov.diagonal().array() += ridge;
  return cov;
}

// Solves cov * out = rhs; falls back to a rank-revealing solve when cov is singular.
inline Matrix robust_solve(const Matrix& cov, const Matrix& rhs) {
  Eigen::LDLT<Matrix> ldlt(cov);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
    Matrix sol = ldlt.solve(rhs);
    if (sol.allFinite() && (ldlt.vectorD().array() > 0).all()) return sol;
  }
  return Eigen::CompleteOrthogonalDecomposition<Matrix>(cov).solve(rhs);
}

inline double log_det_spd(const Matrix& cov) {
  Eigen::LDLT<Matrix> ldlt(cov);
  double s = 0;
  for (Eigen::Index i = 0; i < ldlt.vectorD().size(); ++i)
    s += std::log(std::max(ldlt.vectorD()(i), std::numeric_limits<double>::min()));
  return s;
}

}  // namespace detail

class LdaModel {
 public:
  static LdaModel fit(const LdaParams& params, const Matrix& x, std::span<const Label> y) {
    auto cn = detail::class_moments(x, y, Label::CN, true);
    auto mci = detail::class_moments(x, y, Label::MCI, true);
    const double n = static_cast<double>(x.rows());
    Matrix cov = (cn.scatter + mci.scatter) / std::max(1.0, n - 2.0);
    cov = detail::shrink(std::move(cov), params.shrinkage);
    LdaModel m;
    Vector diff = mci.mean - cn.mean;
    m.weights_ = detail::robust_solve(cov, diff);
    m.bias_ = -0.5 * (mci.mean + cn.mean).dot(m.weights_) +
              std::log(static_cast<double>(mci.n) / static_cast<double>(cn.n));
    return m;
  }

  double score(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
    return row.dot(weights_) + bias_;
  }

 private:
  Vector weights_;
  double bias_ = 0;
};

class QdaModel {
 public:
  static QdaModel fit(const QdaParams& params, const Matrix& x, std::span<const Label> y) {
    QdaModel m;
    const std::array<Label, 2> classes = {Label::CN, Label::MCI};
    for (std::size_t c = 0; c < 2; ++c) {
      auto mom = detail::class_moments(x, y, classes[c], true);
      Matrix cov = mom.scatter / std::max(1.0, static_cast<double>(mom.n) - 1.0);
      cov = detail::shrink(std::move(cov), params.shrinkage);
      auto& g = m.classes_[c];
      g.mean = mom.mean;
      g.precision = detail::robust_solve(cov, Matrix::Identity(cov.rows(), cov.cols()));
      g.offset = -0.5 * detail::log_det_spd(cov) +
                 std::log(static_cast<double>(mom.n) / static_cast<double>(x.rows()));
    }
    return m;
  }

  double score(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
    auto disc = [&](const Gaussian& g) {
      Vector d = row.transpose() - g.mean;
      return g.offset - 0.5 * d.dot(g.precision * d);
    };
    return disc(classes_[1]) - disc(classes_[0]);
  }

 private:
  struct Gaussian {
    Vector mean;
    Matrix precision;
    double offset = 0;
  };
  std::array<Gaussian, 2> classes_;
};

class NaiveBayesModel {
 public:
  static NaiveBayesModel fit(const NbParams& params, const Matrix& x, std::span<const Label> y) {
    const auto p = x.cols();
    double max_var = 0;
    for (Eigen::Index j = 0; j < p; ++j) {
      const double mu = x.col(j).mean();
      max_var = std::max(max_var, (x.col(j).array() - mu).square().mean());
    }
    const double floor = std::max(params.var_floor * max_var, 1e-12);
    NaiveBayesModel m;
    const std::array<Label, 2> classes = {Label::CN, Label::MCI};
    for (std::size_t c = 0; c < 2; ++c) {
      auto mom = detail::class_moments(x, y, classes[c], false);
      auto& g = m.classes_[c];
      g.mean = mom.mean;
      g.var = Vector::Zero(p);
      for (Eigen::Index i = 0; i < x.rows(); ++i)
        if (y[static_cast<std::size_t>(i)] == classes[c])
          g.var.array() += (x.row(i).transpose() - g.mean).array().square();
      g.var /= static_cast<double>(mom.n);
      g.var = g.var.cwiseMax(floor);
      g.log_prior = std::log(static_cast<double>(mom.n) / static_cast<double>(x.rows()));
    }
    return m;
  }

  double score(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
    auto loglik = [&](const Gaussian& g) {
      double s = g.log_prior;
      for (Eigen::Index j = 0; j < row.size(); ++j) {
        const double d = row(j) - g.mean(j);
        s -= 0.5 * (std::log(2.0 * M_PI * g.var(j)) + d * d / g.var(j));
      }
      return s;
    };
    return loglik(classes_[1]) - loglik(classes_[0]);
  }

 private:
  struct Gaussian {
    Vector mean;
    Vector var;
    double log_prior = 0;
  };
  std::array<Gaussian, 2> classes_;
};

}  // namespace cogsub::classifiers
