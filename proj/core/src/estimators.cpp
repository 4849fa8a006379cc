#include "qvest/estimators.hpp"

#include <cmath>
#include <string>

#include "qvest/errors.hpp"

namespace qvest {

namespace {

double mapped_sq_norm(const Eigen::MatrixXd& M, const LatticeVector& h) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(h.size()));
  for (std::size_t i = 0; i < h.size(); ++i) v[static_cast<Eigen::Index>(i)] = h[i];
  return (M * v).squaredNorm();
}

void check_dirs(const QSource& source, const DirectionSet& dirs) {
  if (dirs.dim() != source.dim()) {
    throw DomainError("direction set dimension " + std::to_string(dirs.dim()) +
                      " does not match the data dimension " + std::to_string(source.dim()));
  }
}

}  // namespace

DirectionSet DirectionSet::canonical(int d) {
  if (d < 1) throw DomainError("direction set needs d >= 1");
  DirectionSet s;
  s.d_ = d;
  for (int k = 0; k < d; ++k) {
    LatticeVector e(static_cast<std::size_t>(d), 0);
    e[static_cast<std::size_t>(k)] = 1;
    s.vectors_.push_back(std::move(e));
  }
  for (int k = 1; k < d; ++k) {
    for (int i = 0; i < k; ++i) {
      LatticeVector e(static_cast<std::size_t>(d), 0);
      e[static_cast<std::size_t>(k)] = 1;
      e[static_cast<std::size_t>(i)] = -1;
      s.vectors_.push_back(std::move(e));
    }
  }
  return s;
}

std::size_t DirectionSet::axis_index(int k) const { return static_cast<std::size_t>(k); }

std::size_t DirectionSet::difference_index(int k, int i) const {
  return static_cast<std::size_t>(d_ + k * (k - 1) / 2 + i);
}

int DirectionSet::max_abs_component() const {
  int mx = 0;
  for (const auto& v : vectors_) {
    for (int x : v) mx = std::max(mx, std::abs(x));
  }
  return mx;
}

QSource QSource::from_field(const GridField& field, int workers) {
  const GridField* f = &field;
  return QSource([f, workers](const Stencil& st, double e) { return quadratic_variation(*f, st, e, workers); },
                 field.spec.n, field.spec.d);
}

QSource QSource::exact(CovarianceModel model, GridSpec grid) {
  validate(model);
  grid.validate();
  const auto n = grid.n;
  const int d = grid.d;
  return QSource(
      [model = std::move(model), grid = std::move(grid)](const Stencil& st, double e) {
        return expected_qv(model, grid, st, e);
      },
      n, d);
}

MTildeRecovery recover_mtilde(std::span<const double> norms_sq, int d) {
  const DirectionSet dirs = DirectionSet::canonical(d);
  if (norms_sq.size() != dirs.size()) {
    throw DomainError("recover_mtilde expects " + std::to_string(dirs.size()) + " squared norms, got " +
                      std::to_string(norms_sq.size()));
  }
  for (double v : norms_sq) {
    if (!(v > 0.0) || !std::isfinite(v)) throw DomainError("recover_mtilde: squared norms must be positive");
  }
  MTildeRecovery out;
  out.mtilde = Eigen::MatrixXd::Zero(d, d);
  Eigen::MatrixXd& mt = out.mtilde;
  mt(0, 0) = std::sqrt(norms_sq[dirs.axis_index(0)]);
  for (int k = 1; k < d; ++k) {
    const double col_sq = norms_sq[dirs.axis_index(k)];
    // <Mt_{:,k}, Mt_{:,i}> from |u|^2 + |w|^2 - |u - w|^2.
    Eigen::VectorXd g(k);
    for (int i = 0; i < k; ++i) {
      g[i] = 0.5 * (col_sq + norms_sq[dirs.axis_index(i)] - norms_sq[dirs.difference_index(k, i)]);
    }
    // g = Mt_{0:k,0:k}^T v with the leading block upper triangular.
    Eigen::VectorXd v(k);
    for (int i = 0; i < k; ++i) {
      const double piv = mt(i, i);
      if (!(piv > 0.0)) throw NumericalError("recover_mtilde: singular leading minor");
      double acc = g[i];
      for (int r = 0; r < i; ++r) acc -= mt(r, i) * v[r];
      v[i] = acc / piv;
    }
    double rest = col_sq - v.squaredNorm();
    if (!(rest >= kDiagonalClamp)) {
      rest = kDiagonalClamp;
      ++out.clamped_diagonals;
    }
    mt.block(0, k, k, 1) = v;
    mt(k, k) = std::sqrt(rest);
  }
  return out;
}

SplitResult split_m(const Eigen::MatrixXd& mtilde, double nu, int d) {
  if (mtilde.rows() != d || mtilde.cols() != d) throw DomainError("split_m: matrix must be d x d");
  const double det = mtilde.determinant();
  if (!(det > 0.0) || !std::isfinite(det)) {
    throw NumericalError("split_m: determinant must be positive, got " + std::to_string(det));
  }
  const double log_det = std::log(det);
  SplitResult out;
  out.M = std::exp(-log_det / d) * mtilde;
  out.sigma2_alpha2nu = std::exp(2.0 * nu * log_det / d);
  return out;
}

EstimateReport estimate_matern_any_d(const QSource& source, double nu, int m, const DirectionSet& dirs) {
  check_dirs(source, dirs);
  const double a = coeff_A(nu, m);
  EstimateReport rep;
  rep.dirs = dirs;
  rep.m = m;
  std::vector<double> norms_sq;
  norms_sq.reserve(dirs.size());
  for (const auto& h : dirs.vectors()) {
    const double q = source(Stencil(m, h), 2.0 * nu);
    rep.per_direction_Q.push_back(q);
    if (!(q > 0.0)) throw NumericalError("quadratic variation is not positive along a direction");
    norms_sq.push_back(std::pow(q / a, 1.0 / nu));
  }
  const MTildeRecovery rec = recover_mtilde(norms_sq, dirs.dim());
  rep.diagnostics.clamped_diagonals = rec.clamped_diagonals;
  const SplitResult split = split_m(rec.mtilde, nu, dirs.dim());
  rep.mtilde = rec.mtilde;
  rep.M_hat = split.M;
  rep.sigma2_alpha2nu = split.sigma2_alpha2nu;
  return rep;
}

AlphaSigmaEstimate estimate_alpha_highd(const QSource& source, double nu, const EstimateReport& report,
                                        const DirectionSet& dirs, const AlphaOptions& options) {
  check_dirs(source, dirs);
  IndexPair used{0, 0};
  if (options.pq) {
    used = *options.pq;
    if (!(used.p > nu + 1.0)) throw OrderTooSmallError("alpha estimation needs p > nu + 1");
    if (!(used.q > used.p)) throw DomainError("alpha estimation needs q > p");
  } else {
    used = select_pq(nu, source.dim());
  }
  const double ap = coeff_A(nu, used.p);
  const double aq = coeff_A(nu, used.q);
  const double ratio = ap / aq;
  const double bc = coeff_B(nu, used.p) - ratio * coeff_B(nu, used.q);
  if (std::abs(bc) <= kPairNonvanishingTol * std::abs(coeff_B(nu, used.p))) {
    throw DegenerateDenominatorError("B-combination vanishes for the requested (p, q)");
  }
  const double n2 = static_cast<double>(source.n()) * static_cast<double>(source.n());

  AlphaSigmaEstimate out;
  out.pq = used;
  double acc = 0.0;
  for (const auto& h : dirs.vectors()) {
    const double qp = source(Stencil(used.p, h), 2.0 * nu);
    const double qq = source(Stencil(used.q, h), 2.0 * nu);
    // sigma^2 alpha^(2nu+2) |Mh|^(2nu+2) over sigma^2 alpha^(2nu) |Mh|^(2nu).
    const double second = n2 * (qp - ratio * qq) / bc;
    const double first = qp / ap;
    const double alpha2 = second / first / mapped_sq_norm(report.M_hat, h);
    out.per_direction_alpha2.push_back(alpha2);
    acc += alpha2;
  }
  double mean_alpha2 = acc / static_cast<double>(dirs.size());
  if (!(mean_alpha2 > 0.0)) {
    out.diagnostics.clamped_alpha = true;
    out.diagnostics.warnings.push_back("mean alpha^2 estimate was nonpositive and was clamped");
    mean_alpha2 = kDiagonalClamp;
  }
  out.alpha_hat = std::sqrt(mean_alpha2);
  out.sigma_hat = std::sqrt(report.sigma2_alpha2nu / std::pow(out.alpha_hat, 2.0 * nu));
  return out;
}

C1C2Estimate estimate_c1_c2(const QSource& source, double delta1, double delta2, int p, int q,
                            const LatticeVector& h) {
  if (!(delta1 > 0.0 && delta2 > delta1)) throw DomainError("c1/c2 estimation needs 0 < delta1 < delta2");
  if (!(p > delta2 / 2.0)) throw DomainError("c1/c2 estimation needs p > delta2 / 2");
  if (!(q > p)) throw DomainError("c1/c2 estimation needs q > p");
  if (static_cast<int>(h.size()) != source.dim()) throw DomainError("direction dimension mismatch");
  const Stencil sp(p, h);
  const Stencil sq(q, h);
  const double hn = sp.direction_norm();
  const double cp1 = coeff_C(p, delta1, hn);
  const double cq1 = coeff_C(q, delta1, hn);
  const double cp2 = coeff_C(p, delta2, hn);
  const double cq2 = coeff_C(q, delta2, hn);
  if (cp1 == 0.0 || cq1 == 0.0) throw DegenerateDenominatorError("C(., delta1) vanishes");
  const double ratio = cp1 / cq1;
  const double den = cp2 - ratio * cq2;
  if (!(std::abs(den) > 1e-12 * std::max(std::abs(cp2), std::abs(ratio * cq2)))) {
    throw DegenerateDenominatorError("C(p, delta2) - (C(p, delta1) / C(q, delta1)) C(q, delta2) vanishes");
  }
  C1C2Estimate out;
  out.q_p = source(sp, delta1);
  out.q_q = source(sq, delta1);
  const double n = static_cast<double>(source.n());
  out.c1_hat = out.q_p / cp1;
  out.c2_hat = std::pow(n, delta2 - delta1) * (out.q_p - ratio * out.q_q) / den;
  out.c1_corrected = out.c1_hat - out.c2_hat * (cp2 / cp1) * std::pow(n, delta1 - delta2);
  return out;
}

PowExpEstimate estimate_powexp(const QSource& source, double delta, int p, const DirectionSet& dirs,
                               const PowExpOptions& options) {
  check_dirs(source, dirs);
  if (!(delta > 0.0 && delta < 2.0)) throw DomainError("powered exponential: delta must lie in (0, 2)");
  if (p < 1) throw DomainError("powered exponential: p must be >= 1");
  const int d = dirs.dim();
  std::optional<IndexPair> pq;
  if (options.separate) {
    if (std::abs(delta - 1.0) <= 1e-9) {
      throw DomainError("powered exponential: sigma/alpha separation requires delta != 1");
    }
    if (!(2.0 * delta < d)) throw DomainError("powered exponential: separation requires 2 delta < d");
    if (!(p > 1.5 * delta)) throw DomainError("powered exponential: separation requires p > 3 delta / 2");
    const auto combo = [delta](int pp, int qq) {
      return coeff_D(pp, 2.0 * delta) - coeff_D(pp, delta) / coeff_D(qq, delta) * coeff_D(qq, 2.0 * delta);
    };
    if (options.q) {
      if (!(*options.q > p)) throw DomainError("powered exponential: q must exceed p");
      const double c = combo(p, *options.q);
      if (!(std::abs(c) > kPairNonvanishingTol * std::abs(coeff_D(p, 2.0 * delta)))) {
        throw DegenerateDenominatorError("D-combination vanishes for the requested (p, q)");
      }
      pq = IndexPair{p, *options.q};
    } else {
      pq = find_partner(p, coeff_D(p, 2.0 * delta), combo);
      if (!pq) throw NoValidPairError("no q gives a nonvanishing D-combination");
    }
  }

  PowExpEstimate out;
  const double dp = coeff_D(p, delta);
  std::vector<double> norms_sq;
  for (const auto& h : dirs.vectors()) {
    const double qv = source(Stencil(p, h), delta);
    const double s = -qv / dp;
    if (!(s > 0.0)) throw NumericalError("powered exponential: first-stage estimate is not positive");
    out.first_stage.push_back(s);
    norms_sq.push_back(std::pow(s, 2.0 / delta));
  }
  const MTildeRecovery rec = recover_mtilde(norms_sq, d);
  out.diagnostics.clamped_diagonals = rec.clamped_diagonals;
  const SplitResult split = split_m(rec.mtilde, 0.5 * delta, d);
  out.mtilde = rec.mtilde;
  out.M_hat = split.M;
  out.sigma2_alpha_delta = split.sigma2_alpha2nu;

  if (pq) {
    out.pq_used = pq;
    const int q = pq->q;
    const double ratio = dp / coeff_D(q, delta);
    const double den = coeff_D(p, 2.0 * delta) - ratio * coeff_D(q, 2.0 * delta);
    const double n_delta = std::pow(static_cast<double>(source.n()), delta);
    double acc = 0.0;
    for (std::size_t i = 0; i < dirs.size(); ++i) {
      const auto& h = dirs[i];
      const double qp = source(Stencil(p, h), delta);
      const double qq = source(Stencil(q, h), delta);
      const double second = 2.0 * n_delta * (qp - ratio * qq) / den;
      acc += second / out.first_stage[i] / std::pow(mapped_sq_norm(out.M_hat, h), 0.5 * delta);
    }
    double mean = acc / static_cast<double>(dirs.size());
    if (!(mean > 0.0)) {
      out.diagnostics.clamped_alpha = true;
      out.diagnostics.warnings.push_back("mean alpha^delta estimate was nonpositive and was clamped");
      mean = kDiagonalClamp;
    }
    out.alpha_hat = std::pow(mean, 1.0 / delta);
    out.sigma_hat = std::sqrt(out.sigma2_alpha_delta / mean);
  }
  return out;
}

}  // namespace qvest
