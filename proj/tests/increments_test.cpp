#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "qvest/errors.hpp"
#include "qvest/increments.hpp"

using namespace qvest;

namespace {

GridField make_field(const GridSpec& g, auto&& fn) {
  GridField f{g, std::vector<double>(g.size())};
  const auto strides = g.strides();
  for (std::size_t k = 0; k < f.values.size(); ++k) {
    std::vector<double> t(g.d);
    std::size_t rem = k;
    for (int a = 0; a < g.d; ++a) {
      const auto i = rem / strides[a];
      rem %= strides[a];
      t[a] = g.origin[a] + static_cast<double>(i) / static_cast<double>(g.n);
    }
    f.values[k] = fn(t);
  }
  return f;
}

MaternParams unit_matern(double nu, int d = 1) { return {1.0, 1.0, nu, Eigen::MatrixXd::Identity(d, d)}; }

}  // namespace

TEST(Stencil, Coefficients) {
  const auto s1 = stencil(1, {1});
  EXPECT_EQ(std::vector<double>(s1.coeffs().begin(), s1.coeffs().end()), (std::vector<double>{-1, 1}));
  const auto s2 = stencil(2, {1});
  EXPECT_EQ(std::vector<double>(s2.coeffs().begin(), s2.coeffs().end()), (std::vector<double>{1, -2, 1}));
  const auto s3 = stencil(3, {1, 0});
  EXPECT_EQ(std::vector<double>(s3.coeffs().begin(), s3.coeffs().end()), (std::vector<double>{-1, 3, -3, 1}));
  EXPECT_THROW(stencil(0, {1}), DomainError);
  EXPECT_THROW(stencil(2, {0, 0}), DomainError);
}

TEST(Stencil, MomentsVanishBelowOrder) {
  for (int m = 1; m <= 10; ++m) {
    const auto s = stencil(m, {1});
    for (int k = 0; k < m; ++k) {
      double mom = 0.0;
      for (int i = 0; i <= m; ++i) mom += s.coeffs()[i] * std::pow(i, k);
      EXPECT_NEAR(mom, 0.0, 1e-9 * std::pow(m, k) * std::pow(2.0, m)) << m << " " << k;
    }
    for (int i = 0; i <= m; ++i) {
      EXPECT_EQ(s.coeffs()[i], ((m + i) % 2 ? -1.0 : 1.0) * oracle::binom_coeff(m, i));
    }
  }
}

TEST(ApplyIncrement, Examples) {
  const auto g = GridSpec::cube(1, 10, 12);
  const auto constant = make_field(g, [](auto&) { return 3.5; });
  for (int m = 1; m <= 4; ++m) {
    for (double v : apply_increment(constant, stencil(m, {1})).values) EXPECT_EQ(v, 0.0);
  }
  const auto linear = make_field(g, [](auto& t) { return t[0]; });
  for (double v : apply_increment(linear, stencil(2, {1})).values) EXPECT_NEAR(v, 0.0, 1e-15);
  const auto square = make_field(g, [](auto& t) { return t[0] * t[0]; });
  const auto inc = apply_increment(square, stencil(2, {1}));
  EXPECT_EQ(inc.values.size(), 10u);
  for (double v : inc.values) EXPECT_NEAR(v, 2.0 / 100.0, 1e-15);
}

TEST(ApplyIncrement, ShrinksAlongDirection) {
  const auto g = GridSpec::cube(2, 8, 9);
  const auto f = make_field(g, [](auto& t) { return t[0] - 2.0 * t[1]; });
  const auto a = apply_increment(f, stencil(2, {1, 0}));
  EXPECT_EQ(a.spec.counts, (std::vector<std::int64_t>{7, 9}));
  const auto b = apply_increment(f, stencil(1, {-1, 2}));
  EXPECT_EQ(b.spec.counts, (std::vector<std::int64_t>{8, 7}));
  // Origin moves to the first site where the whole stencil fits.
  EXPECT_NEAR(b.spec.origin[0], 1.0 / 8.0, 1e-15);
  for (double v : b.values) EXPECT_NEAR(v, (-1.0 - 4.0) / 8.0, 1e-14);
  EXPECT_THROW(apply_increment(f, stencil(9, {1, 0})), GridTooSmallError);
  EXPECT_THROW(apply_increment(f, stencil(1, {1})), DomainError);
}

TEST(ApplyIncrement, SiteValueIsStencilSum) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z;
  auto g = GridSpec::cube(2, 5, 7);
  GridField f{g, std::vector<double>(g.size())};
  for (auto& v : f.values) v = z(rng);
  const Stencil st(2, {1, -1});
  const auto out = apply_increment(f, st);
  const auto sites = increment_sites(g, st);
  EXPECT_EQ(out.spec, sites);
  for (std::int64_t i = 0; i < out.spec.counts[0]; ++i) {
    for (std::int64_t j = 0; j < out.spec.counts[1]; ++j) {
      // Output site (i, j) corresponds to input (i, j + 2) for h = (1, -1).
      double expect = 0.0;
      for (int k = 0; k <= 2; ++k) {
        const std::int64_t idx[2] = {i + k, j + 2 - k};
        expect += st.coeffs()[k] * f.at(idx);
      }
      const std::int64_t o[2] = {i, j};
      EXPECT_NEAR(out.at(o), expect, 1e-14);
    }
  }
}

// Every monomial of total degree < m is annihilated, for m <= 5 and d <= 3.
TEST(ApplyIncrement, PolynomialAnnihilation) {
  const std::vector<LatticeVector> dirs3 = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, -1, 0}, {1, 1, 1}};
  for (int d = 1; d <= 3; ++d) {
    const auto g = GridSpec::cube(d, 7, d == 3 ? 12 : 14);
    for (int m = 1; m <= 5; ++m) {
      for (int a = 0; a < m; ++a) {
        for (int b = 0; b + a < m && (d >= 2 || b == 0); ++b) {
          for (int c = 0; c + b + a < m && (d >= 3 || c == 0); ++c) {
            const auto f = make_field(g, [&](auto& t) {
              double v = std::pow(t[0] + 0.3, a);
              if (d >= 2) v *= std::pow(t[1] - 0.1, b);
              if (d >= 3) v *= std::pow(t[2] + 0.2, c);
              return v;
            });
            for (const auto& h3 : dirs3) {
              LatticeVector h(h3.begin(), h3.begin() + d);
              if (std::all_of(h.begin(), h.end(), [](int x) { return x == 0; })) continue;
              const auto inc = apply_increment(f, stencil(m, h));
              for (double v : inc.values) EXPECT_NEAR(v, 0.0, 1e-9) << d << m << a << b << c;
            }
          }
        }
      }
    }
  }
}

TEST(QuadraticVariation, Examples) {
  const auto g = GridSpec::cube(1, 10, 12);
  const auto zero = make_field(g, [](auto&) { return 0.0; });
  EXPECT_EQ(quadratic_variation(zero, stencil(2, {1}), 1.0), 0.0);
  const auto square = make_field(g, [](auto& t) { return t[0] * t[0]; });
  EXPECT_NEAR(quadratic_variation(square, stencil(2, {1}), 0.0), 4.0 / 1e4, 1e-18);
  EXPECT_NEAR(quadratic_variation(square, stencil(2, {1}), 4.0), 4.0, 1e-12);
}

TEST(QuadraticVariation, InvariantUnderLowDegreePolynomials) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> z;
  const auto g = GridSpec::cube(2, 16, 20);
  GridField f{g, std::vector<double>(g.size())};
  for (auto& v : f.values) v = z(rng);
  for (int m = 1; m <= 4; ++m) {
    auto shifted = make_field(g, [&](auto& t) {
      double p = 0.7;
      if (m > 1) p += 2.0 * t[0] - t[1];
      if (m > 2) p += t[0] * t[1] - 3.0 * t[1] * t[1];
      if (m > 3) p += std::pow(t[0], 3) - t[0] * t[1] * t[1];
      return p;
    });
    for (std::size_t k = 0; k < f.values.size(); ++k) shifted.values[k] += f.values[k];
    for (const LatticeVector& h : {LatticeVector{1, 0}, LatticeVector{0, 1}, LatticeVector{-1, 1}}) {
      const double a = quadratic_variation(f, stencil(m, h), 1.3);
      const double b = quadratic_variation(shifted, stencil(m, h), 1.3);
      EXPECT_NEAR(a, b, 1e-9 * std::abs(a)) << m;
    }
  }
}

TEST(QuadraticVariation, IndependentOfWorkerCount) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z;
  const auto g = GridSpec::cube(2, 64, 97);
  GridField f{g, std::vector<double>(g.size())};
  for (auto& v : f.values) v = z(rng);
  const double one = quadratic_variation(f, stencil(3, {1, -1}), 3.5, 1);
  for (int w : {2, 3, 8, 17}) EXPECT_EQ(quadratic_variation(f, stencil(3, {1, -1}), 3.5, w), one);
}

TEST(Coefficients, Examples) {
  EXPECT_NEAR(coeff_A(0.5, 1), 2.0, 1e-13);
  EXPECT_NEAR(coeff_A(0.5, 2), 4.0, 1e-13);
  EXPECT_NEAR(coeff_B(0.5, 2), -4.0 / 3.0, 1e-13);
  EXPECT_NEAR(coeff_C(1, 0.3, 1.0), -2.0, 1e-14);
  EXPECT_NEAR(coeff_C(2, 0.2, 1.0), 2.0 * std::pow(2.0, 0.2) - 8.0, 1e-13);
  EXPECT_NEAR(coeff_C(2, 0.2, 1.0), -5.7026, 1e-4);
  EXPECT_NEAR(coeff_D(1, 0.5), -2.0, 1e-14);
  EXPECT_THROW(coeff_A(1.75, 1), OrderTooSmallError);
  EXPECT_THROW(coeff_B(0.5, 1), OrderTooSmallError);
  EXPECT_THROW(coeff_B(1.75, 2), OrderTooSmallError);
}

// a^m = sum d_i d_j G_nu(|i - j|) with G from its closed form, in long double.
TEST(Coefficients, AgainstDirectStencilSums) {
  for (double nu : {0.3, 0.5, 1.25, 1.75, 2.5}) {
    const long double c = -std::numbers::pi_v<long double> /
                          (std::pow(2.0L, 2.0L * nu) * std::sin(nu * std::numbers::pi_v<long double>) *
                           boost::math::tgamma<long double>(nu) * boost::math::tgamma<long double>(nu + 1.0L));
    const long double c1 = -std::numbers::pi_v<long double> /
                           (std::pow(2.0L, 2.0L * nu + 2.0L) * std::sin((nu + 1.0L) * std::numbers::pi_v<long double>) *
                            boost::math::tgamma<long double>(nu + 1.0L) * boost::math::tgamma<long double>(nu + 2.0L));
    for (int m = static_cast<int>(std::floor(nu)) + 1; m <= 8; ++m) {
      const long double a = oracle::stencil_quadratic_form(m, 1.0L, 0.0L, [&](long double t) {
        return t == 0 ? 0.0L : c * std::pow(t, 2.0L * nu);
      });
      EXPECT_NEAR(coeff_A(nu, m), static_cast<double>(a), 1e-10 * std::abs(static_cast<double>(a)));
      if (m > nu + 1.0) {
        const long double b = oracle::stencil_quadratic_form(m, 1.0L, 0.0L, [&](long double t) {
          return t == 0 ? 0.0L : -nu * c1 * std::pow(t, 2.0L * nu + 2.0L);
        });
        EXPECT_NEAR(coeff_B(nu, m), static_cast<double>(b), 1e-9 * std::abs(static_cast<double>(b)));
      }
    }
  }
}

TEST(Coefficients, SignsOfAAndB) {
  for (double nu : {0.3, 0.5, 1.0, 1.75, 2.5}) {
    for (int m = 1; m <= 8; ++m) {
      if (m > nu) { EXPECT_GT(coeff_A(nu, m), 0.0) << nu << " " << m; }
      if (m > nu + 1.0) { EXPECT_LT(coeff_B(nu, m), 0.0) << nu << " " << m; }
    }
  }
}

// Integer smoothness: the t^(2nu) log t terms are combined through the stencil
// sum; the result must match the limit from non-integer neighbours.
TEST(Coefficients, IntegerSmoothnessCancellation) {
  for (double nu : {1.0, 2.0}) {
    for (int m = static_cast<int>(nu) + 1; m <= 6; ++m) {
      const double lo = coeff_A(nu - 2e-5, m);
      const double hi = coeff_A(nu + 2e-5, m);
      EXPECT_NEAR(coeff_A(nu, m), 0.5 * (lo + hi), 1e-6 * std::abs(coeff_A(nu, m))) << nu << " " << m;
      if (m > nu + 1) {
        const double blo = coeff_B(nu - 2e-5, m);
        const double bhi = coeff_B(nu + 2e-5, m);
        EXPECT_NEAR(coeff_B(nu, m), 0.5 * (blo + bhi), 1e-6 * std::abs(coeff_B(nu, m))) << nu << " " << m;
      }
    }
  }
}

TEST(Coefficients, CIsHPowerTimesD) {
  for (int p = 1; p <= 6; ++p) {
    for (double delta : {0.1, 0.2, 0.4, 0.5, 1.3, 1.9}) {
      EXPECT_NEAR(coeff_D(p, delta), oracle::power_sum(p, delta), 1e-10 * std::abs(oracle::power_sum(p, delta)));
      for (double h : {1.0, std::sqrt(2.0), 3.0}) {
        EXPECT_EQ(coeff_C(p, delta, h), std::pow(h, delta) * coeff_D(p, delta));
      }
    }
  }
}

TEST(StencilSums, EvenPowersVanish) {
  for (int m = 1; m <= 6; ++m) {
    for (int k = 0; k < m; ++k) EXPECT_NEAR(stencil_power_sum(m, 2.0 * k), 0.0, 1e-9);
    EXPECT_GT(std::abs(stencil_power_sum(m, 2.0 * m)), 1.0);
  }
}

TEST(ExpectedQv, OuClosedForm) {
  const auto ou = unit_matern(0.5);
  for (std::int64_t n : {4, 16, 100, 1000}) {
    const auto g = GridSpec::cube(1, n, n + 2);
    EXPECT_NEAR(expected_qv(ou, g, stencil(1, {1}), 1.0), oracle::ou_expected_q1(n), 1e-12);
    EXPECT_NEAR(expected_qv_direct(ou, g, stencil(1, {1}), 1.0), oracle::ou_expected_q1(n), 1e-11);
  }
}

TEST(ExpectedQv, ConstantCovarianceGivesZero) {
  GenCovParams constant{0.0, 0.2, 0.0, 0.4, {2.5}};
  const auto g = GridSpec::cube(2, 20, 25);
  for (int m = 1; m <= 3; ++m) EXPECT_NEAR(expected_qv(constant, g, stencil(m, {1, 1}), 0.2), 0.0, 1e-12);
}

TEST(ExpectedQv, SeriesRouteMatchesExtendedPrecisionSum) {
  for (double nu : {0.5, 1.25, 1.75, 2.5}) {
    const auto model = unit_matern(nu);
    for (int m : {static_cast<int>(nu) + 2, static_cast<int>(nu) + 3}) {
      for (std::int64_t n : {8, 64, 512}) {
        const auto g = GridSpec::cube(1, n, n + m + 1);
        const long double ref = oracle::stencil_quadratic_form(
            m, static_cast<long double>(n), 2.0L * nu, [&](long double t) { return oracle::matern_unit_ld(nu, t); });
        const double got = expected_qv(model, g, stencil(m, {1}), 2.0 * nu);
        // Rounding of the long double sum: eps * sum |d_i d_j| * n^(2 nu).
        const double oracle_err = 10.0 * std::numeric_limits<long double>::epsilon() * std::pow(4.0, m) *
                                  std::pow(static_cast<double>(n), 2.0 * nu);
        const double tol = std::max(1e-8 * std::abs(static_cast<double>(ref)), oracle_err);
        EXPECT_NEAR(got, static_cast<double>(ref), tol) << nu << " " << m << " " << n;
      }
    }
  }
}

TEST(ExpectedQv, OuSecondOrderLimit) {
  // sum d_i d_j e^(-|i-j| x) = 4x - (4/3) x^3 + O(x^4) for m = 2.
  const auto ou = unit_matern(0.5);
  const std::int64_t n = 4096;
  const auto g = GridSpec::cube(1, n, n + 3);
  const double q = expected_qv(ou, g, stencil(2, {1}), 1.0);
  EXPECT_NEAR(static_cast<double>(n) * n * (q - 4.0), -4.0 / 3.0, 1e-3 * 4.0 / 3.0);
}

TEST(ExpectedQv, LemmaOneRemainder) {
  for (double nu : {0.5, 1.75}) {
    const int m = std::max(2, static_cast<int>(std::ceil(nu)) + 2);
    const std::int64_t n = 4096;
    const auto g = GridSpec::cube(1, n, n + m + 1);
    const double q = expected_qv(unit_matern(nu), g, stencil(m, {1}), 2.0 * nu);
    const double lhs = static_cast<double>(n) * n * (q - coeff_A(nu, m));
    EXPECT_NEAR(lhs / coeff_B(nu, m), 1.0, 1e-3) << nu;
  }
}

TEST(ExpectedQv, AnisotropicDirectionUsesMappedNorm) {
  Eigen::MatrixXd M(2, 2);
  M << 1.2, 0.5, 0.0, 1.0 / 1.2;
  MaternParams aniso{1.5, 0.8, 1.75, M};
  const std::int64_t n = 55;
  const auto g = GridSpec::cube(2, n, 60);
  const LatticeVector h{-1, 1};
  const double r = (M * Eigen::Vector2d(-1, 1)).norm();
  const long double ref = oracle::stencil_quadratic_form(3, static_cast<long double>(n), 3.5L, [&](long double t) {
    return 2.25L * oracle::matern_unit_ld(1.75L, 0.8L * r * t);
  });
  EXPECT_NEAR(expected_qv(aniso, g, stencil(3, h), 3.5), static_cast<double>(ref), 1e-9 * static_cast<double>(ref));
}

TEST(SelectPq, Examples) {
  EXPECT_EQ(select_pq(0.5, 5), (IndexPair{3, 4}));
  EXPECT_EQ(select_pq(1.75, 5).p, 4);
  EXPECT_GT(select_pq(1.75, 5).q, 4);
  EXPECT_THROW(select_pq(0.5, 3), NoValidPairError);
  EXPECT_THROW(select_pq(0.5, 4), NoValidPairError);
}

TEST(SelectPq, SatisfiesThresholds) {
  for (double nu : {0.3, 0.5, 1.0, 1.75, 2.5, 3.2}) {
    for (int d : {5, 6, 9}) {
      const auto pq = select_pq(nu, d);
      EXPECT_GT(pq.p, nu + 1.0);
      EXPECT_GT(2.0 * pq.p - 2.0 * nu, 4.0);
      EXPECT_FALSE(pq.p - 1 > nu + 1.0 && 2.0 * (pq.p - 1) - 2.0 * nu > 4.0);
      EXPECT_GT(pq.q, pq.p);
      EXPECT_LE(pq.q, pq.p + kPairSearchSpan);
      EXPECT_GT(std::abs(b_combination(nu, pq)), kPairNonvanishingTol * std::abs(coeff_B(nu, pq.p)));
    }
  }
}

TEST(SelectPq, FromCallerP) {
  const auto pq = select_pq_from(0.5, 2);
  EXPECT_EQ(pq.p, 2);
  EXPECT_EQ(pq.q, 3);
  EXPECT_THROW(select_pq_from(0.5, 1), OrderTooSmallError);
}

TEST(FindPartner, ReportsNothingWhenCombinationVanishes) {
  const auto none = find_partner(2, 1.0, [](int, int) { return 0.0; });
  EXPECT_FALSE(none.has_value());
  const auto third = find_partner(2, 1.0, [](int, int q) { return q == 5 ? 1.0 : 1e-12; });
  ASSERT_TRUE(third.has_value());
  EXPECT_EQ(third->q, 5);
}
