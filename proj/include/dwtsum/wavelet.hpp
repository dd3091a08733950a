#pragma once

// Multi-level Daubechies DWT over scalar signals and over the row axis of an
// embedding matrix.
//
// Analysis is written as a strided correlation with the low-pass taps h and
// high-pass taps g:
//
//   cA[k] = sum_n h[n] * x[2k + n - shift]
//   cD[k] = sum_n g[n] * x[2k + n - shift]
//
// with shift = L_f/2 - 1 and indices taken mod N in periodic mode, and
// shift = L_f - 2 over a half-sample symmetric extension in symmetric mode.
// Both phases agree with PyWavelets' "periodization" and "symmetric" modes.
// Synthesis is the adjoint of that map, which is its inverse because the
// filter bank is orthonormal.

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dwtsum/error.hpp"
#include "dwtsum/matrix.hpp"

namespace dwtsum {

enum class BoundaryMode { periodic, symmetric };

inline std::string_view to_string(BoundaryMode mode) {
  return mode == BoundaryMode::periodic ? "periodic" : "symmetric";
}

inline BoundaryMode parse_boundary(std::string_view text) {
  if (text == "periodic") return BoundaryMode::periodic;
  if (text == "symmetric") return BoundaryMode::symmetric;
  throw Error(ErrorKind::config, "unknown boundary mode '" + std::string(text) + "'");
}

/// Daubechies order K, db1..db8. db1 is Haar.
class WaveletFamily {
 public:
  static constexpr int kMinOrder = 1;
  static constexpr int kMaxOrder = 8;

  constexpr WaveletFamily() = default;
  explicit WaveletFamily(int order) : order_(order) {
    if (order < kMinOrder || order > kMaxOrder) {
      throw Error(ErrorKind::config, "unsupported Daubechies order db" + std::to_string(order) +
                                         " (supported: db1..db8)");
    }
  }

  static WaveletFamily parse(std::string_view id) {
    if (id.size() == 3 && id.substr(0, 2) == "db" && id[2] >= '0' && id[2] <= '9') {
      return WaveletFamily(id[2] - '0');
    }
    throw Error(ErrorKind::config, "unknown wavelet family '" + std::string(id) + "'");
  }

  constexpr int order() const noexcept { return order_; }
  constexpr std::size_t taps() const noexcept { return static_cast<std::size_t>(2 * order_); }
  std::string id() const { return "db" + std::to_string(order_); }

  friend constexpr bool operator==(WaveletFamily, WaveletFamily) = default;

 private:
  int order_ = 2;
};

struct WaveletFilter {
  WaveletFamily family;
  std::vector<double> dec_lo;
  std::vector<double> dec_hi;
  std::vector<double> rec_lo;
  std::vector<double> rec_hi;

  std::size_t length() const noexcept { return dec_lo.size(); }
};

namespace detail {

// Analysis low-pass taps h; db2 starts with (1 + sqrt 3) / (4 sqrt 2).
inline std::span<const double> daubechies_lowpass(int order) {
  static const std::array<double, 2> db1 = {0.7071067811865476, 0.7071067811865476};
  static const std::array<double, 4> db2 = {0.48296291314453416, 0.8365163037378079,
                                            0.2241438680420134, -0.12940952255126037};
  static const std::array<double, 6> db3 = {0.33267055295008263,  0.8068915093110925,
                                            0.45987750211849154,  -0.13501102001025458,
                                            -0.08544127388202666, 0.03522629188570953};
  static const std::array<double, 8> db4 = {
      0.2303778133088965,   0.7148465705529157,    0.6308807679298589,
      -0.027983769416859854, -0.18703481171909309, 0.030841381835560764,
      0.0328830116668852,   -0.010597401785069032};
  static const std::array<double, 10> db5 = {
      0.16010239797419293,   0.6038292697971896,   0.7243085284377729,
      0.13842814590132074,   -0.24229488706638203, -0.032244869584638375,
      0.07757149384004572,   -0.006241490212798274, -0.012580751999081999,
      0.0033357252854737712};
  static const std::array<double, 12> db6 = {
      0.11154074335010947,  0.49462389039845306,  0.7511339080210954,
      0.31525035170919763,  -0.22626469396543983, -0.12976686756726194,
      0.09750160558732304,  0.027522865530305727, -0.03158203931748603,
      0.0005538422011614961, 0.004777257510945511, -0.0010773010853084796};
  static const std::array<double, 14> db7 = {
      0.07785205408500918,   0.3965393194819173,    0.7291320908462351,
      0.4697822874051931,    -0.14390600392856498,  -0.22403618499387498,
      0.07130921926683026,   0.08061260915108308,   -0.03802993693501441,
      -0.01657454163066688,  0.01255099855609984,   0.0004295779729213665,
      -0.0018016407040474908, 0.00035371379997452024};
  static const std::array<double, 16> db8 = {
      0.05441584224310401,    0.31287159091429995,   0.6756307362972898,
      0.5853546836542067,     -0.015829105256349306, -0.2840155429615469,
      0.0004724845739132828,  0.12874742662047847,   -0.017369301001807547,
      -0.044088253930794755,  0.013981027917398282,  0.008746094047405777,
      -0.004870352993451574,  -0.00039174037337694705, 0.0006754494064505693,
      -0.00011747678412476953};
  switch (order) {
    case 1: return db1;
    case 2: return db2;
    case 3: return db3;
    case 4: return db4;
    case 5: return db5;
    case 6: return db6;
    case 7: return db7;
    case 8: return db8;
    default: break;
  }
  throw Error(ErrorKind::config, "unsupported Daubechies order db" + std::to_string(order));
}

// Half-sample symmetric reflection of an arbitrary integer index into [0, n).
inline std::size_t reflect_index(long long i, std::size_t n) {
  const long long period = 2 * static_cast<long long>(n);
  long long m = i % period;
  if (m < 0) m += period;
  return static_cast<std::size_t>(m < static_cast<long long>(n) ? m : period - 1 - m);
}

inline std::size_t wrap_index(long long i, std::size_t n) {
  long long m = i % static_cast<long long>(n);
  if (m < 0) m += static_cast<long long>(n);
  return static_cast<std::size_t>(m);
}

}  // namespace detail

inline WaveletFilter make_filter(WaveletFamily family) {
  const auto lo = detail::daubechies_lowpass(family.order());
  WaveletFilter f;
  f.family = family;
  f.dec_lo.assign(lo.begin(), lo.end());
  const std::size_t len = f.dec_lo.size();
  f.dec_hi.resize(len);
  for (std::size_t n = 0; n < len; ++n) {
    const double sign = (n % 2 == 0) ? 1.0 : -1.0;
    f.dec_hi[n] = sign * f.dec_lo[len - 1 - n];
  }
  f.rec_lo.assign(f.dec_lo.rbegin(), f.dec_lo.rend());
  f.rec_hi.assign(f.dec_hi.rbegin(), f.dec_hi.rend());
  return f;
}

inline WaveletFilter make_filter(std::string_view family_id) {
  return make_filter(WaveletFamily::parse(family_id));
}

/// Output length of one analysis step.
inline std::size_t dwt_output_length(std::size_t n, std::size_t filter_length, BoundaryMode mode) {
  if (mode == BoundaryMode::periodic) return (n + 1) / 2;
  return (n + filter_length - 1) / 2;
}

/// floor(log2(n)), the deepest decomposition accepted by wavedec.
inline int max_level(std::size_t n) {
  int level = 0;
  while (n >= 2) {
    n /= 2;
    ++level;
  }
  return level;
}

struct DwtStep {
  std::vector<double> approx;
  std::vector<double> detail;
};

inline DwtStep dwt_step(std::span<const double> signal, const WaveletFilter& filter,
                        BoundaryMode mode) {
  if (signal.size() < 2) {
    throw Error(ErrorKind::degenerate_input,
                "dwt_step needs at least 2 samples, got " + std::to_string(signal.size()));
  }
  const std::size_t taps = filter.length();
  DwtStep out;

  if (mode == BoundaryMode::periodic) {
    // Odd lengths repeat the final sample once.
    std::vector<double> padded(signal.begin(), signal.end());
    if (padded.size() % 2 != 0) padded.push_back(padded.back());
    const std::size_t n = padded.size();
    const std::size_t m = n / 2;
    const long long shift = static_cast<long long>(taps / 2) - 1;
    out.approx.assign(m, 0.0);
    out.detail.assign(m, 0.0);
    for (std::size_t k = 0; k < m; ++k) {
      double a = 0.0;
      double d = 0.0;
      for (std::size_t t = 0; t < taps; ++t) {
        const double x = padded[detail::wrap_index(static_cast<long long>(2 * k + t) - shift, n)];
        a += filter.dec_lo[t] * x;
        d += filter.dec_hi[t] * x;
      }
      out.approx[k] = a;
      out.detail[k] = d;
    }
    return out;
  }

  const std::size_t n = signal.size();
  const std::size_t m = dwt_output_length(n, taps, mode);
  const long long shift = static_cast<long long>(taps) - 2;
  out.approx.assign(m, 0.0);
  out.detail.assign(m, 0.0);
  for (std::size_t k = 0; k < m; ++k) {
    double a = 0.0;
    double d = 0.0;
    for (std::size_t t = 0; t < taps; ++t) {
      const long long pos = static_cast<long long>(2 * k + t) - shift;
      const double x = signal[detail::reflect_index(pos, n)];
      a += filter.dec_lo[t] * x;
      d += filter.dec_hi[t] * x;
    }
    out.approx[k] = a;
    out.detail[k] = d;
  }
  return out;
}

/// Inverse of dwt_step; returns exactly `original_length` samples.
inline std::vector<double> idwt_step(std::span<const double> approx, std::span<const double> detail,
                                     const WaveletFilter& filter, BoundaryMode mode,
                                     std::size_t original_length) {
  if (approx.size() != detail.size()) {
    throw Error(ErrorKind::shape, "idwt_step: approximation has " + std::to_string(approx.size()) +
                                      " coefficients but detail has " +
                                      std::to_string(detail.size()));
  }
  if (approx.empty()) throw Error(ErrorKind::shape, "idwt_step: empty coefficient vectors");
  const std::size_t m = approx.size();
  const std::size_t taps = filter.length();
  if (dwt_output_length(original_length, taps, mode) != m) {
    throw Error(ErrorKind::shape, "idwt_step: " + std::to_string(m) +
                                      " coefficients cannot come from a signal of length " +
                                      std::to_string(original_length));
  }

  if (mode == BoundaryMode::periodic) {
    const std::size_t n = 2 * m;
    const long long shift = static_cast<long long>(taps / 2) - 1;
    std::vector<double> y(n, 0.0);
    for (std::size_t k = 0; k < m; ++k) {
      for (std::size_t t = 0; t < taps; ++t) {
        y[detail::wrap_index(static_cast<long long>(2 * k + t) - shift, n)] +=
            filter.dec_lo[t] * approx[k] + filter.dec_hi[t] * detail[k];
      }
    }
    y.resize(original_length);
    return y;
  }

  // Symmetric mode: every output sample in [0, original_length) is covered by
  // coefficients computed from the same extended signal, so the adjoint sum
  // restricted to that range reconstructs it.
  const long long shift = static_cast<long long>(taps) - 2;
  std::vector<double> y(original_length, 0.0);
  for (std::size_t k = 0; k < m; ++k) {
    for (std::size_t t = 0; t < taps; ++t) {
      const long long pos = static_cast<long long>(2 * k + t) - shift;
      if (pos < 0 || pos >= static_cast<long long>(original_length)) continue;
      y[static_cast<std::size_t>(pos)] +=
          filter.dec_lo[t] * approx[k] + filter.dec_hi[t] * detail[k];
    }
  }
  return y;
}

/// {cA_L, cD_L, ..., cD_1} for one scalar channel.
struct CoefficientPyramid {
  int levels = 0;
  std::vector<double> approx;
  std::vector<std::vector<double>> details;  // coarsest first
  std::size_t original_length = 0;
  std::vector<std::size_t> input_lengths;  // signal length entering each level, finest first
  WaveletFamily family;
  BoundaryMode mode = BoundaryMode::periodic;
};

inline void check_levels(std::size_t n, int levels) {
  if (levels < 1) {
    throw Error(ErrorKind::level_overflow, "decomposition level must be >= 1, got " +
                                               std::to_string(levels));
  }
  const int max = max_level(n);
  if (levels > max) {
    throw Error(ErrorKind::level_overflow,
                "level " + std::to_string(levels) + " too deep for " + std::to_string(n) +
                    " samples; max feasible level is " + std::to_string(max));
  }
}

inline CoefficientPyramid wavedec(std::span<const double> signal, const WaveletFilter& filter,
                                  int levels, BoundaryMode mode) {
  if (signal.size() < 2) {
    throw Error(ErrorKind::degenerate_input,
                "wavedec needs at least 2 samples, got " + std::to_string(signal.size()));
  }
  check_levels(signal.size(), levels);

  CoefficientPyramid p;
  p.levels = levels;
  p.original_length = signal.size();
  p.family = filter.family;
  p.mode = mode;

  std::vector<double> current(signal.begin(), signal.end());
  std::vector<std::vector<double>> fine_first;
  for (int j = 0; j < levels; ++j) {
    p.input_lengths.push_back(current.size());
    auto step = dwt_step(current, filter, mode);
    fine_first.push_back(std::move(step.detail));
    current = std::move(step.approx);
  }
  p.approx = std::move(current);
  p.details.assign(std::make_move_iterator(fine_first.rbegin()),
                   std::make_move_iterator(fine_first.rend()));
  return p;
}

inline std::vector<double> waverec(const CoefficientPyramid& p, const WaveletFilter& filter) {
  if (static_cast<int>(p.details.size()) != p.levels ||
      static_cast<int>(p.input_lengths.size()) != p.levels) {
    throw Error(ErrorKind::shape, "waverec: pyramid level bookkeeping is inconsistent");
  }
  std::vector<double> current = p.approx;
  for (int j = p.levels - 1; j >= 0; --j) {
    const auto& detail = p.details[static_cast<std::size_t>(p.levels - 1 - j)];
    current = idwt_step(current, detail, filter, p.mode, p.input_lengths[static_cast<std::size_t>(j)]);
  }
  return current;
}

/// Column-wise pyramid of an n x d matrix. approx is m x d; details[i] is the
/// detail matrix of level L - i.
struct MatrixPyramid {
  int levels = 0;
  Matrix approx;
  std::vector<Matrix> details;  // coarsest first
  std::size_t original_rows = 0;
  std::vector<std::size_t> input_lengths;
  WaveletFamily family;
  BoundaryMode mode = BoundaryMode::periodic;

  /// Decomposition level that produced details[i].
  int detail_level(std::size_t i) const { return levels - static_cast<int>(i); }
};

inline MatrixPyramid dwt_matrix(const Matrix& matrix, const WaveletFilter& filter, int levels,
                                BoundaryMode mode) {
  if (matrix.empty()) throw Error(ErrorKind::degenerate_input, "dwt_matrix: empty matrix");
  if (matrix.rows() < 2) {
    throw Error(ErrorKind::degenerate_input, "dwt_matrix needs at least 2 rows, got " +
                                                 std::to_string(matrix.rows()));
  }
  check_levels(matrix.rows(), levels);

  MatrixPyramid out;
  out.levels = levels;
  out.original_rows = matrix.rows();
  out.family = filter.family;
  out.mode = mode;

  const std::size_t d = matrix.cols();
  for (std::size_t c = 0; c < d; ++c) {
    const auto column = matrix.column(c);
    const auto p = wavedec(column, filter, levels, mode);
    if (c == 0) {
      out.input_lengths = p.input_lengths;
      out.approx = Matrix(p.approx.size(), d);
      for (const auto& det : p.details) out.details.emplace_back(det.size(), d);
    }
    out.approx.set_column(c, p.approx);
    for (std::size_t i = 0; i < p.details.size(); ++i) out.details[i].set_column(c, p.details[i]);
  }
  return out;
}

inline Matrix idwt_matrix(const MatrixPyramid& p, const WaveletFilter& filter) {
  Matrix out(p.original_rows, p.approx.cols());
  for (std::size_t c = 0; c < p.approx.cols(); ++c) {
    CoefficientPyramid col;
    col.levels = p.levels;
    col.approx = p.approx.column(c);
    for (const auto& det : p.details) col.details.push_back(det.column(c));
    col.original_length = p.original_rows;
    col.input_lengths = p.input_lengths;
    col.family = p.family;
    col.mode = p.mode;
    out.set_column(c, waverec(col, filter));
  }
  return out;
}

}  // namespace dwtsum
