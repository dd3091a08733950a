#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <vector>

#include "dwtsum/wavelet.hpp"
#include "synthetic_corpus.hpp"

using namespace dwtsum;
using Catch::Matchers::WithinAbs;

namespace {

const double kSqrt2 = std::sqrt(2.0);

std::vector<double> random_signal(testing::SplitMix64& rng, std::size_t n) {
  std::vector<double> x(n);
  for (auto& v : x) v = rng.normal();
  return x;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

void require_close(const std::vector<double>& got, const std::vector<double>& want, double tol) {
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    INFO("index " << i);
    REQUIRE_THAT(got[i], WithinAbs(want[i], tol));
  }
}

// Oracle: the one-level periodic analysis written as an explicit dense
// matrix. Row k of the low-pass block has h[t] at column (2k + t - s) mod n.
std::pair<std::vector<double>, std::vector<double>> dense_periodic_oracle(const std::vector<double>& x,
                                                                           const std::vector<double>& h,
                                                                           const std::vector<double>& g) {
  const std::size_t n = x.size();
  const std::size_t half = n / 2;
  const long long s = static_cast<long long>(h.size() / 2) - 1;
  std::vector<std::vector<double>> lo(half, std::vector<double>(n, 0.0)), hi = lo;
  for (std::size_t k = 0; k < half; ++k) {
    for (std::size_t t = 0; t < h.size(); ++t) {
      long long col = (static_cast<long long>(2 * k + t) - s) % static_cast<long long>(n);
      if (col < 0) col += static_cast<long long>(n);
      lo[k][static_cast<std::size_t>(col)] += h[t];
      hi[k][static_cast<std::size_t>(col)] += g[t];
    }
  }
  std::vector<double> a(half, 0.0), d(half, 0.0);
  for (std::size_t k = 0; k < half; ++k) {
    for (std::size_t c = 0; c < n; ++c) {
      a[k] += lo[k][c] * x[c];
      d[k] += hi[k][c] * x[c];
    }
  }
  return {a, d};
}

}  // namespace

TEST_CASE("make_filter: Haar taps", "[wavelet][filter]") {
  const auto f = make_filter("db1");
  require_close(f.dec_lo, {1 / kSqrt2, 1 / kSqrt2}, 1e-15);
  require_close(f.dec_hi, {1 / kSqrt2, -1 / kSqrt2}, 1e-15);
}

TEST_CASE("make_filter: db2 matches the closed form", "[wavelet][filter]") {
  const double r3 = std::sqrt(3.0);
  const double denom = 4.0 * kSqrt2;
  const std::vector<double> closed = {(1 + r3) / denom, (3 + r3) / denom, (3 - r3) / denom, (1 - r3) / denom};
  const auto f = make_filter("db2");
  require_close(f.dec_lo, closed, 1e-15);

  // Closed-form checks done independently of the table.
  REQUIRE_THAT(std::accumulate(closed.begin(), closed.end(), 0.0), WithinAbs(kSqrt2, 1e-12));
  double first_moment = 0.0;
  for (std::size_t n = 0; n < 4; ++n) first_moment += static_cast<double>(n) * f.dec_hi[n];
  REQUIRE_THAT(first_moment, WithinAbs(0.0, 1e-12));
}

TEST_CASE("make_filter: invariants hold for every order", "[wavelet][filter]") {
  for (int order = 1; order <= 8; ++order) {
    INFO("db" << order);
    const auto f = make_filter(WaveletFamily(order));
    const std::size_t len = f.length();
    REQUIRE(len == static_cast<std::size_t>(2 * order));
    REQUIRE(f.dec_hi.size() == len);
    REQUIRE(f.rec_lo.size() == len);
    REQUIRE(f.rec_hi.size() == len);
    REQUIRE_THAT(std::accumulate(f.dec_lo.begin(), f.dec_lo.end(), 0.0), WithinAbs(kSqrt2, 1e-12));
    REQUIRE_THAT(std::accumulate(f.dec_hi.begin(), f.dec_hi.end(), 0.0), WithinAbs(0.0, 1e-12));
    double sq = 0.0;
    for (double v : f.dec_lo) sq += v * v;
    REQUIRE_THAT(std::sqrt(sq), WithinAbs(1.0, 1e-12));
    for (std::size_t n = 0; n < len; ++n) {
      const double sign = n % 2 == 0 ? 1.0 : -1.0;
      REQUIRE(f.dec_hi[n] == sign * f.dec_lo[len - 1 - n]);
      REQUIRE(f.rec_lo[n] == f.dec_lo[len - 1 - n]);
    }
    // Even-shift orthogonality of the low-pass filter.
    for (std::size_t m = 1; 2 * m < len; ++m) {
      double acc = 0.0;
      for (std::size_t n = 0; n + 2 * m < len; ++n) acc += f.dec_lo[n] * f.dec_lo[n + 2 * m];
      REQUIRE_THAT(acc, WithinAbs(0.0, 1e-12));
    }
    // dbK has K vanishing moments; scale tolerance with the size of n^p.
    for (int p = 0; p < order; ++p) {
      double moment = 0.0, scale = 0.0;
      for (std::size_t n = 0; n < len; ++n) {
        const double w = std::pow(static_cast<double>(n), p);
        moment += w * f.dec_hi[n];
        scale += w * std::abs(f.dec_hi[n]);
      }
      INFO("moment " << p);
      REQUIRE(std::abs(moment) <= 1e-9 * std::max(1.0, scale));
    }
  }
}

TEST_CASE("make_filter: unknown family is a configuration error", "[wavelet][filter]") {
  REQUIRE_THROWS_AS(make_filter("db9"), Error);
  REQUIRE_THROWS_AS(make_filter("sym4"), Error);
  try {
    make_filter("haar");
  } catch (const Error& e) {
    REQUIRE(e.kind() == ErrorKind::config);
  }
}

TEST_CASE("dwt_step: constant signal has zero detail", "[wavelet][dwt]") {
  const std::vector<double> x = {1, 1, 1, 1};
  const auto s = dwt_step(x, make_filter("db1"), BoundaryMode::periodic);
  require_close(s.approx, {kSqrt2, kSqrt2}, 1e-15);
  require_close(s.detail, {0, 0}, 1e-15);
}

TEST_CASE("dwt_step: Haar ramp", "[wavelet][dwt]") {
  const std::vector<double> x = {1, 2, 3, 4};
  const auto f = make_filter("db1");
  const auto s = dwt_step(x, f, BoundaryMode::periodic);
  // cD_k = (x[2k] - x[2k+1]) / sqrt 2
  require_close(s.approx, {3 / kSqrt2, 7 / kSqrt2}, 1e-15);
  require_close(s.detail, {-1 / kSqrt2, -1 / kSqrt2}, 1e-15);
  const auto [a, d] = dense_periodic_oracle(x, f.dec_lo, f.dec_hi);
  require_close(s.approx, a, 1e-15);
  require_close(s.detail, d, 1e-15);
}

TEST_CASE("dwt_step: agrees with the dense-matrix oracle", "[wavelet][dwt]") {
  testing::SplitMix64 rng(7);
  for (int order = 1; order <= 8; ++order) {
    for (std::size_t n : {2u, 4u, 6u, 10u, 16u, 34u}) {
      const auto f = make_filter(WaveletFamily(order));
      const auto x = random_signal(rng, n);
      const auto s = dwt_step(x, f, BoundaryMode::periodic);
      const auto [a, d] = dense_periodic_oracle(x, f.dec_lo, f.dec_hi);
      INFO("db" << order << " n=" << n);
      require_close(s.approx, a, 1e-12);
      require_close(s.detail, d, 1e-12);
    }
  }
}

// Expected values computed with PyWavelets 1.x, pywt.dwt(x, w, mode=...), an
// independent implementation; "periodization" there is our periodic mode.
TEST_CASE("dwt_step: matches PyWavelets reference values", "[wavelet][dwt]") {
  const std::vector<double> x = {3, -1, 4, 1, -5, 9, 2, 6};

  SECTION("db2 periodic") {
    const auto s = dwt_step(x, make_filter("db2"), BoundaryMode::periodic);
    require_close(s.approx, {4.665544431833574, 3.7342937826050124, -1.9411428382689062, 6.976333466374722}, 1e-12);
    require_close(s.detail, {-4.217256695749548, 2.4841649198436855, 7.55403072501001, 1.9572356439478753}, 1e-12);
  }
  SECTION("db2 symmetric") {
    const auto s = dwt_step(x, make_filter("db2"), BoundaryMode::symmetric);
    require_close(s.approx, {2.8284271247461903, 1.3795383853125878, 0.4829629131445341, 4.785662768694065,
                             7.071067811865476},
                  1e-12);
    require_close(s.detail, {2.4494897427831783, 2.69901760219493, -9.271029695236903, -2.5949920710134076,
                             2.449489742783178},
                  1e-12);
  }
  SECTION("db4 periodic, filter longer than half the signal") {
    const auto s = dwt_step(x, make_filter("db4"), BoundaryMode::periodic);
    require_close(s.approx, {7.60069711986804, 2.717501326449759, 1.9436834067623123, 1.173146989464291}, 1e-12);
    require_close(s.detail, {-0.04379357843392544, 9.654347997920624, 1.0590632011369716, -2.891443027571648}, 1e-12);
  }
  SECTION("db4 symmetric") {
    const auto s = dwt_step(x, make_filter("db4"), BoundaryMode::symmetric);
    require_close(s.approx, {-0.5930814487105902, 1.9039208472297524, 2.8576984321154284, 3.686754279415218,
                             -1.7828180066061798, 5.663996995074192, 6.632125308557688},
                  1e-12);
    require_close(s.detail, {1.3582780615756644, 3.564071533451154, -6.573011317569943, -5.179090657658963,
                             1.4409054277737003, 7.096775587068904, 3.0365102730949864},
                  1e-12);
  }
}

TEST_CASE("dwt_step: degenerate input", "[wavelet][dwt]") {
  const std::vector<double> x = {5};
  try {
    dwt_step(x, make_filter("db2"), BoundaryMode::periodic);
    FAIL("expected an error");
  } catch (const Error& e) {
    REQUIRE(e.kind() == ErrorKind::degenerate_input);
  }
}

TEST_CASE("dwt_step: output lengths", "[wavelet][dwt]") {
  testing::SplitMix64 rng(3);
  for (std::size_t n = 2; n < 40; ++n) {
    const auto x = random_signal(rng, n);
    for (int order : {1, 2, 5}) {
      const auto f = make_filter(WaveletFamily(order));
      REQUIRE(dwt_step(x, f, BoundaryMode::periodic).approx.size() == (n + 1) / 2);
      REQUIRE(dwt_step(x, f, BoundaryMode::symmetric).approx.size() == (n + f.length() - 1) / 2);
    }
  }
}

TEST_CASE("idwt_step: inverse of the constant case", "[wavelet][idwt]") {
  const std::vector<double> a = {kSqrt2, kSqrt2}, d = {0, 0};
  require_close(idwt_step(a, d, make_filter("db1"), BoundaryMode::periodic, 4), {1, 1, 1, 1}, 1e-15);
}

TEST_CASE("idwt_step: random round trips", "[wavelet][idwt]") {
  testing::SplitMix64 rng(20240611);
  SECTION("64 normal samples, db2") {
    const auto x = random_signal(rng, 64);
    const auto f = make_filter("db2");
    const auto s = dwt_step(x, f, BoundaryMode::periodic);
    REQUIRE(max_abs_diff(idwt_step(s.approx, s.detail, f, BoundaryMode::periodic, 64), x) < 1e-10);
  }
  SECTION("odd length 7 is padded then truncated") {
    const auto x = random_signal(rng, 7);
    for (int order = 1; order <= 8; ++order) {
      const auto f = make_filter(WaveletFamily(order));
      const auto s = dwt_step(x, f, BoundaryMode::periodic);
      REQUIRE(s.approx.size() == 4);
      const auto y = idwt_step(s.approx, s.detail, f, BoundaryMode::periodic, 7);
      REQUIRE(y.size() == 7);
      REQUIRE(max_abs_diff(y, x) < 1e-10);
    }
  }
  SECTION("symmetric mode, every order, odd and even lengths") {
    for (int order = 1; order <= 8; ++order) {
      for (std::size_t n : {2u, 3u, 5u, 8u, 13u, 32u}) {
        const auto x = random_signal(rng, n);
        const auto f = make_filter(WaveletFamily(order));
        const auto s = dwt_step(x, f, BoundaryMode::symmetric);
        INFO("db" << order << " n=" << n);
        REQUIRE(max_abs_diff(idwt_step(s.approx, s.detail, f, BoundaryMode::symmetric, n), x) < 1e-10);
      }
    }
  }
}

TEST_CASE("idwt_step: shape errors", "[wavelet][idwt]") {
  const std::vector<double> a = {1, 2}, d = {1};
  try {
    idwt_step(a, d, make_filter("db1"), BoundaryMode::periodic, 4);
    FAIL("expected an error");
  } catch (const Error& e) {
    REQUIRE(e.kind() == ErrorKind::shape);
  }
  const std::vector<double> d2 = {1, 2};
  REQUIRE_THROWS_AS(idwt_step(a, d2, make_filter("db1"), BoundaryMode::periodic, 9), Error);
}

TEST_CASE("wavedec: constant signal", "[wavelet][wavedec]") {
  const std::vector<double> x(8, 1.0);
  const auto p = wavedec(x, make_filter("db1"), 3, BoundaryMode::periodic);
  require_close(p.approx, {2 * kSqrt2}, 1e-14);
  REQUIRE(p.details.size() == 3);
  for (const auto& d : p.details) {
    for (double v : d) REQUIRE(std::abs(v) < 1e-14);
  }
}

TEST_CASE("wavedec: 64 samples at level 3 keep 8 coefficients", "[wavelet][wavedec]") {
  testing::SplitMix64 rng(1);
  const auto x = random_signal(rng, 64);
  const auto p = wavedec(x, make_filter("db2"), 3, BoundaryMode::periodic);
  REQUIRE(p.approx.size() == 8);
  REQUIRE(p.details[0].size() == 8);
  REQUIRE(p.details[1].size() == 16);
  REQUIRE(p.details[2].size() == 32);
  REQUIRE(p.original_length == 64);
}

TEST_CASE("wavedec: level overflow names the maximum", "[wavelet][wavedec]") {
  const std::vector<double> x(8, 1.0);
  try {
    wavedec(x, make_filter("db1"), 4, BoundaryMode::periodic);
    FAIL("expected an error");
  } catch (const Error& e) {
    REQUIRE(e.kind() == ErrorKind::level_overflow);
    REQUIRE(std::string(e.what()).find("max feasible level is 3") != std::string::npos);
  }
  REQUIRE_THROWS_AS(wavedec(x, make_filter("db1"), 0, BoundaryMode::periodic), Error);
}

TEST_CASE("wavedec: matches PyWavelets multilevel output", "[wavelet][wavedec]") {
  const std::vector<double> y = {1.5, -0.5, -1.0, 1.5, 1.0, 2.0, 3.0, 2.5, 2.0, 4.5,
                                 5.5, 3.5, 6.0, 5.5, 5.0, 9.0, 7.0, 6.5, 9.0, 8.5};
  const auto f = make_filter("db3");
  SECTION("periodic") {
    const auto p = wavedec(y, f, 2, BoundaryMode::periodic);
    require_close(p.approx, {17.04841439817358, 3.075758794598808, 2.948055984713254, 7.356830123155932,
                             10.570940699358424},
                  1e-12);
    require_close(p.details[0], {-0.17747754904601298, -0.7634094257060946, 0.02370618687839119,
                                 1.6933778934598074, 3.458883801287272},
                  1e-12);
    require_close(p.details[1], {-0.23518766272374014, -0.4031360288690045, 0.6271677402481638, -1.231852445330416,
                                 1.2533676266941942, 1.114467463410519, -1.8061807477500158, -0.6467858904501818,
                                 1.445145904248941, -2.9454330842246494},
                  1e-12);
    REQUIRE(max_abs_diff(waverec(p, f), y) < 1e-10);
  }
  SECTION("symmetric") {
    const auto p = wavedec(y, f, 2, BoundaryMode::symmetric);
    require_close(p.approx, {0.9853427619196237, -0.6577335924845243, 0.7320010415676614, 1.2138193860928368,
                             5.054099059692001, 8.694221972650185, 13.420862740615648, 16.83896362623486},
                  1e-12);
    require_close(p.details[0], {-1.232645865205542, -1.5483572695934669, 1.2093467523376655, 0.9702540510387937,
                                 -1.295549312308988, -1.0342685498031683, 0.6714520803389767, 1.4148380251616592},
                  1e-12);
    REQUIRE(p.details[1].size() == 12);
    REQUIRE(max_abs_diff(waverec(p, f), y) < 1e-10);
  }
}

TEST_CASE("properties: reconstruction, energy, annihilation, length law", "[wavelet][property]") {
  testing::SplitMix64 rng(99);
  for (int trial = 0; trial < 60; ++trial) {
    const int order = 1 + static_cast<int>(rng.below(8));
    const std::size_t n = 2 * (1 + rng.below(100));
    const auto f = make_filter(WaveletFamily(order));
    const auto x = random_signal(rng, n);
    INFO("db" << order << " n=" << n);

    const auto s = dwt_step(x, f, BoundaryMode::periodic);
    REQUIRE(s.approx.size() == n / 2);
    const auto y = idwt_step(s.approx, s.detail, f, BoundaryMode::periodic, n);
    REQUIRE(max_abs_diff(y, x) < 1e-10);

    double ex = 0.0, ec = 0.0;
    for (double v : x) ex += v * v;
    for (double v : s.approx) ec += v * v;
    for (double v : s.detail) ec += v * v;
    REQUIRE(std::abs(ex - ec) / ex < 1e-9);

    const std::vector<double> c(n, rng.normal() * 10);
    for (double v : dwt_step(c, f, BoundaryMode::periodic).detail) REQUIRE(std::abs(v) < 1e-12 * std::max(1.0, std::abs(c[0])));

    const int levels = std::min(max_level(n), 1 + static_cast<int>(rng.below(5)));
    const auto p = wavedec(x, f, levels, BoundaryMode::periodic);
    std::size_t len = n;
    for (int j = 0; j < levels; ++j) len = (len + 1) / 2;
    REQUIRE(p.approx.size() == len);
    REQUIRE(max_abs_diff(waverec(p, f), x) < 1e-10);
  }
}

TEST_CASE("dwt_matrix: per-column equivalence", "[wavelet][matrix]") {
  testing::SplitMix64 rng(5);
  Matrix m(24, 5);
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) m(r, c) = rng.normal();
  const auto f = make_filter("db3");
  for (auto mode : {BoundaryMode::periodic, BoundaryMode::symmetric}) {
    const auto mp = dwt_matrix(m, f, 3, mode);
    for (std::size_t c = 0; c < m.cols(); ++c) {
      const auto p = wavedec(m.column(c), f, 3, mode);
      REQUIRE(mp.approx.column(c) == p.approx);
      for (std::size_t i = 0; i < p.details.size(); ++i) REQUIRE(mp.details[i].column(c) == p.details[i]);
    }
    const auto back = idwt_matrix(mp, f);
    for (std::size_t r = 0; r < m.rows(); ++r)
      for (std::size_t c = 0; c < m.cols(); ++c) REQUIRE(std::abs(back(r, c) - m(r, c)) < 1e-10);
  }
}

TEST_CASE("dwt_matrix: Haar 4x2 example", "[wavelet][matrix]") {
  const auto m = Matrix::from_rows({{1, 0}, {2, 0}, {3, 1}, {4, 1}});
  const auto p = dwt_matrix(m, make_filter("db1"), 1, BoundaryMode::periodic);
  REQUIRE(p.approx.rows() == 2);
  REQUIRE_THAT(p.approx(0, 0), WithinAbs(3 / kSqrt2, 1e-15));
  REQUIRE_THAT(p.approx(0, 1), WithinAbs(0.0, 1e-15));
  REQUIRE_THAT(p.approx(1, 0), WithinAbs(7 / kSqrt2, 1e-15));
  REQUIRE_THAT(p.approx(1, 1), WithinAbs(kSqrt2, 1e-15));
}

TEST_CASE("dwt_matrix: identical rows", "[wavelet][matrix]") {
  const std::vector<double> row = {0.3, -1.2, 2.0};
  Matrix m(16, 3);
  for (std::size_t r = 0; r < 16; ++r)
    for (std::size_t c = 0; c < 3; ++c) m(r, c) = row[c];
  const int levels = 2;
  const auto p = dwt_matrix(m, make_filter("db2"), levels, BoundaryMode::periodic);
  REQUIRE(p.approx.rows() == 4);
  for (std::size_t r = 0; r < p.approx.rows(); ++r)
    for (std::size_t c = 0; c < 3; ++c) REQUIRE_THAT(p.approx(r, c), WithinAbs(row[c] * 2.0, 1e-12));
  for (const auto& d : p.details)
    for (std::size_t r = 0; r < d.rows(); ++r) REQUIRE(norm2(d.row(r)) < 1e-12);
}

TEST_CASE("dwt_matrix: column permutation commutes", "[wavelet][matrix]") {
  testing::SplitMix64 rng(11);
  Matrix m(20, 4);
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) m(r, c) = rng.normal();
  const std::vector<std::size_t> perm = {2, 0, 3, 1};
  Matrix permuted(20, 4);
  for (std::size_t c = 0; c < 4; ++c) permuted.set_column(c, m.column(perm[c]));
  const auto f = make_filter("db2");
  const auto a = dwt_matrix(m, f, 2, BoundaryMode::periodic);
  const auto b = dwt_matrix(permuted, f, 2, BoundaryMode::periodic);
  for (std::size_t c = 0; c < 4; ++c) {
    REQUIRE(b.approx.column(c) == a.approx.column(perm[c]));
    REQUIRE(b.details[1].column(c) == a.details[1].column(perm[c]));
  }
}

TEST_CASE("dwt_matrix: empty input", "[wavelet][matrix]") {
  try {
    dwt_matrix(Matrix{}, make_filter("db1"), 1, BoundaryMode::periodic);
    FAIL("expected an error");
  } catch (const Error& e) {
    REQUIRE(e.kind() == ErrorKind::degenerate_input);
  }
}
