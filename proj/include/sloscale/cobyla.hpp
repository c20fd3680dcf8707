/* Copyright 2026 The sloscale Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Constrained Optimization BY Linear Approximations, after M. J. D. Powell's
// 1992 Fortran routine. Minimizes f(x) subject to c_k(x) >= 0 using linear
// models interpolated on a simplex of n + 1 points whose size rho shrinks
// from rho_begin to rho_end.
//
// The control flow follows the original closely, labels included, so the
// routine can be checked line by line against it. Arrays are stored 0-based
// and accessed through 1-based helpers.

#ifndef SLOSCALE_COBYLA_HPP_
#define SLOSCALE_COBYLA_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

namespace sloscale::cobyla {

enum class Status {
  kConverged,        // rho reached rho_end
  kMaxEvaluations,   // evaluation budget exhausted
  kRoundingErrors,   // simplex inverse lost accuracy
};

struct Options {
  double rho_begin = 1.0;
  double rho_end = 1e-4;
  int max_evaluations = 1000;
};

struct Result {
  std::vector<double> x;
  double f = 0.0;
  double max_violation = 0.0;
  int evaluations = 0;
  Status status = Status::kConverged;
};

/// f(x), writing c(x) into `con`.
using Function =
    std::function<double(std::span<const double> x, std::span<double> con)>;

namespace detail {

struct Matrix {
  int rows = 0;
  std::vector<double> data;
  Matrix(int r, int c) : rows(r), data(static_cast<std::size_t>(r) * c, 0.0) {}
  double& operator()(int i, int j) {
    return data[static_cast<std::size_t>(j - 1) * rows + (i - 1)];
  }
};

struct Vector {
  std::vector<double> data;
  explicit Vector(int n) : data(static_cast<std::size_t>(n), 0.0) {}
  double& operator()(int i) { return data[static_cast<std::size_t>(i - 1)]; }
};

struct IntVector {
  std::vector<int> data;
  explicit IntVector(int n) : data(static_cast<std::size_t>(n), 0) {}
  int& operator()(int i) { return data[static_cast<std::size_t>(i - 1)]; }
};

// Computes the trust-region step dx: first the shortest step minimizing the
// largest violation of A(.,k)^T dx >= b(k), k <= m, within |dx| <= rho; with
// any remaining freedom, the step that decreases the linear objective whose
// negated gradient is column m + 1 without raising that violation. Returns
// false when a degeneracy stops dx short of the trust-region boundary.
inline bool trust_region_step(int n, int m, Matrix& a, Vector& b, double rho,
                              Vector& dx) {
  Matrix z(n, n);
  Vector zdota(n + 1), vmultc(m + 1), sdirn(n), dxnew(n), vmultd(m + 1);
  IntVector iact(m + 1);

  bool full = true;
  int mcon = m;
  int nact = 0;
  int icon = 0;
  int nactx = 0;
  int icount = 0;
  int kk = 0;
  int k = 0;
  double resmax = 0.0;
  double resold = 0.0;
  double optold = 0.0;
  double optnew = 0.0;
  double temp = 0.0;
  double ratio = 0.0;
  double step = 0.0;
  double stpful = 0.0;

  auto significant = [](double abs_sum, double value) {
    const double acca = abs_sum + 0.1 * std::fabs(value);
    const double accb = abs_sum + 0.2 * std::fabs(value);
    return abs_sum < acca && acca < accb;
  };

  for (int i = 1; i <= n; ++i) {
    for (int j = 1; j <= n; ++j) z(i, j) = 0.0;
    z(i, i) = 1.0;
    dx(i) = 0.0;
  }
  if (m >= 1) {
    for (k = 1; k <= m; ++k) {
      if (b(k) > resmax) {
        resmax = b(k);
        icon = k;
      }
    }
    for (k = 1; k <= m; ++k) {
      iact(k) = k;
      vmultc(k) = resmax - b(k);
    }
  }
  if (resmax == 0.0) goto L480;
  for (int i = 1; i <= n; ++i) sdirn(i) = 0.0;

L60:
  optold = 0.0;
  icount = 0;

L70:
  // End the current stage when the objective stalls for three iterations.
  if (mcon == m) {
    optnew = resmax;
  } else {
    optnew = 0.0;
    for (int i = 1; i <= n; ++i) optnew -= dx(i) * a(i, mcon);
  }
  if (icount == 0 || optnew < optold) {
    optold = optnew;
    nactx = nact;
    icount = 3;
  } else if (nact > nactx) {
    nactx = nact;
    icount = 3;
  } else {
    --icount;
    if (icount == 0) goto L490;
  }

  if (icon <= nact) goto L260;

  // Add constraint icon to the active set, updating Z by Givens rotations.
  kk = iact(icon);
  for (int i = 1; i <= n; ++i) dxnew(i) = a(i, kk);
  {
    double tot = 0.0;
    for (k = n; k > nact; --k) {
      double sp = 0.0;
      double spabs = 0.0;
      for (int i = 1; i <= n; ++i) {
        temp = z(i, k) * dxnew(i);
        sp += temp;
        spabs += std::fabs(temp);
      }
      if (!significant(spabs, sp)) sp = 0.0;
      if (tot == 0.0) {
        tot = sp;
      } else {
        const int kp = k + 1;
        temp = std::sqrt(sp * sp + tot * tot);
        const double alpha = sp / temp;
        const double beta = tot / temp;
        tot = temp;
        for (int i = 1; i <= n; ++i) {
          temp = alpha * z(i, k) + beta * z(i, kp);
          z(i, kp) = alpha * z(i, kp) - beta * z(i, k);
          z(i, k) = temp;
        }
      }
    }
    if (tot != 0.0) {
      ++nact;
      zdota(nact) = tot;
      vmultc(icon) = vmultc(nact);
      vmultc(nact) = 0.0;
      goto L210;
    }
  }

  // The new gradient is dependent on the active ones: find the step along
  // the multipliers that frees one constraint and exchange it for icon.
  ratio = -1.0;
  for (k = nact; k > 0; --k) {
    double zdotv = 0.0;
    double zdvabs = 0.0;
    for (int i = 1; i <= n; ++i) {
      temp = z(i, k) * dxnew(i);
      zdotv += temp;
      zdvabs += std::fabs(temp);
    }
    if (significant(zdvabs, zdotv)) {
      temp = zdotv / zdota(k);
      if (temp > 0.0 && iact(k) <= m) {
        const double tempa = vmultc(k) / temp;
        if (ratio < 0.0 || tempa < ratio) ratio = tempa;
      }
      if (k >= 2) {
        const int kw = iact(k);
        for (int i = 1; i <= n; ++i) dxnew(i) -= temp * a(i, kw);
      }
      vmultd(k) = temp;
    } else {
      vmultd(k) = 0.0;
    }
  }
  if (ratio < 0.0) goto L490;

  for (k = 1; k <= nact; ++k) {
    vmultc(k) = std::max(0.0, vmultc(k) - ratio * vmultd(k));
  }
  if (icon < nact) {
    const int isave = iact(icon);
    const double vsave = vmultc(icon);
    k = icon;
    do {
      const int kp = k + 1;
      const int kw = iact(kp);
      double sp = 0.0;
      for (int i = 1; i <= n; ++i) sp += z(i, k) * a(i, kw);
      temp = std::sqrt(sp * sp + zdota(kp) * zdota(kp));
      const double alpha = zdota(kp) / temp;
      const double beta = sp / temp;
      zdota(kp) = alpha * zdota(k);
      zdota(k) = temp;
      for (int i = 1; i <= n; ++i) {
        temp = alpha * z(i, kp) + beta * z(i, k);
        z(i, kp) = alpha * z(i, k) - beta * z(i, kp);
        z(i, k) = temp;
      }
      iact(k) = kw;
      vmultc(k) = vmultc(kp);
      k = kp;
    } while (k < nact);
    iact(k) = isave;
    vmultc(k) = vsave;
  }
  temp = 0.0;
  for (int i = 1; i <= n; ++i) temp += z(i, nact) * a(i, kk);
  if (temp == 0.0) goto L490;
  zdota(nact) = temp;
  vmultc(icon) = 0.0;
  vmultc(nact) = ratio;

L210:
  iact(icon) = iact(nact);
  iact(nact) = kk;
  if (mcon > m && kk != mcon) {
    k = nact - 1;
    double sp = 0.0;
    for (int i = 1; i <= n; ++i) sp += z(i, k) * a(i, kk);
    temp = std::sqrt(sp * sp + zdota(nact) * zdota(nact));
    const double alpha = zdota(nact) / temp;
    const double beta = sp / temp;
    zdota(nact) = alpha * zdota(k);
    zdota(k) = temp;
    for (int i = 1; i <= n; ++i) {
      temp = alpha * z(i, nact) + beta * z(i, k);
      z(i, nact) = alpha * z(i, k) - beta * z(i, nact);
      z(i, k) = temp;
    }
    iact(nact) = iact(k);
    iact(k) = kk;
    std::swap(vmultc(k), vmultc(nact));
  }

  if (mcon > m) goto L320;
  kk = iact(nact);
  temp = 0.0;
  for (int i = 1; i <= n; ++i) temp += sdirn(i) * a(i, kk);
  temp = (temp - 1.0) / zdota(nact);
  for (int i = 1; i <= n; ++i) sdirn(i) -= temp * z(i, nact);
  goto L340;

L260:
  // Remove constraint icon from the active set.
  if (icon < nact) {
    const int isave = iact(icon);
    const double vsave = vmultc(icon);
    k = icon;
    do {
      const int kp = k + 1;
      kk = iact(kp);
      double sp = 0.0;
      for (int i = 1; i <= n; ++i) sp += z(i, k) * a(i, kk);
      temp = std::sqrt(sp * sp + zdota(kp) * zdota(kp));
      const double alpha = zdota(kp) / temp;
      const double beta = sp / temp;
      zdota(kp) = alpha * zdota(k);
      zdota(k) = temp;
      for (int i = 1; i <= n; ++i) {
        temp = alpha * z(i, kp) + beta * z(i, k);
        z(i, kp) = alpha * z(i, k) - beta * z(i, kp);
        z(i, k) = temp;
      }
      iact(k) = kk;
      vmultc(k) = vmultc(kp);
      k = kp;
    } while (k < nact);
    iact(k) = isave;
    vmultc(k) = vsave;
  }
  --nact;

  if (mcon > m) goto L320;
  temp = 0.0;
  for (int i = 1; i <= n; ++i) temp += sdirn(i) * z(i, nact + 1);
  for (int i = 1; i <= n; ++i) sdirn(i) -= temp * z(i, nact + 1);
  goto L340;

L320:
  temp = 1.0 / zdota(nact);
  for (int i = 1; i <= n; ++i) sdirn(i) = temp * z(i, nact);

L340:
  // Step length along sdirn to the trust-region boundary.
  {
    double dd = rho * rho;
    double sd = 0.0;
    double ss = 0.0;
    for (int i = 1; i <= n; ++i) {
      if (std::fabs(dx(i)) >= 1e-6 * rho) dd -= dx(i) * dx(i);
      sd += dx(i) * sdirn(i);
      ss += sdirn(i) * sdirn(i);
    }
    if (dd <= 0.0) goto L490;
    temp = std::sqrt(ss * dd);
    if (std::fabs(sd) >= 1e-6 * temp) temp = std::sqrt(ss * dd + sd * sd);
    stpful = dd / (temp + sd);
    step = stpful;
  }
  if (mcon == m) {
    const double acca = step + 0.1 * resmax;
    const double accb = step + 0.2 * resmax;
    if (step >= acca || acca >= accb) goto L480;
    step = std::min(step, resmax);
  }

  for (int i = 1; i <= n; ++i) dxnew(i) = dx(i) + step * sdirn(i);
  if (mcon == m) {
    resold = resmax;
    resmax = 0.0;
    for (k = 1; k <= nact; ++k) {
      kk = iact(k);
      temp = b(kk);
      for (int i = 1; i <= n; ++i) temp -= a(i, kk) * dxnew(i);
      resmax = std::max(resmax, temp);
    }
  }

  // Multipliers of the active constraints at dxnew.
  for (k = nact; k >= 1; --k) {
    double zdotw = 0.0;
    double zdwabs = 0.0;
    for (int i = 1; i <= n; ++i) {
      temp = z(i, k) * dxnew(i);
      zdotw += temp;
      zdwabs += std::fabs(temp);
    }
    if (!significant(zdwabs, zdotw)) zdotw = 0.0;
    vmultd(k) = zdotw / zdota(k);
    if (k >= 2) {
      kk = iact(k);
      for (int i = 1; i <= n; ++i) dxnew(i) -= vmultd(k) * a(i, kk);
    }
  }
  if (mcon > m) vmultd(nact) = std::max(0.0, vmultd(nact));

  // Residuals of the inactive constraints at the trial point.
  for (int i = 1; i <= n; ++i) dxnew(i) = dx(i) + step * sdirn(i);
  for (k = nact + 1; k <= mcon; ++k) {
    kk = iact(k);
    double sum = resmax - b(kk);
    double sumabs = resmax + std::fabs(b(kk));
    for (int i = 1; i <= n; ++i) {
      temp = a(i, kk) * dxnew(i);
      sum += temp;
      sumabs += std::fabs(temp);
    }
    if (!significant(sumabs, sum)) sum = 0.0;
    vmultd(k) = sum;
  }

  // Largest fraction of the step that keeps every multiplier and residual
  // non-negative.
  ratio = 1.0;
  icon = 0;
  for (k = 1; k <= mcon; ++k) {
    if (vmultd(k) < 0.0) {
      temp = vmultc(k) / (vmultc(k) - vmultd(k));
      if (temp < ratio) {
        ratio = temp;
        icon = k;
      }
    }
  }

  temp = 1.0 - ratio;
  for (int i = 1; i <= n; ++i) dx(i) = temp * dx(i) + ratio * dxnew(i);
  for (k = 1; k <= mcon; ++k) {
    vmultc(k) = std::max(0.0, temp * vmultc(k) + ratio * vmultd(k));
  }
  if (mcon == m) resmax = resold + ratio * (resmax - resold);

  if (icon > 0) goto L70;
  if (step == stpful) return full;

L480:
  // Switch to the second stage: treat the objective as constraint m + 1.
  mcon = m + 1;
  icon = mcon;
  iact(mcon) = mcon;
  vmultc(mcon) = 0.0;
  goto L60;

L490:
  if (mcon == m) goto L480;
  full = false;
  return full;
}

}  // namespace detail

/// Minimize f subject to c_k(x) >= 0 for k < m. The callback is invoked at
/// most `options.max_evaluations` times.
inline Result minimize(const Function& calcfc, std::vector<double> x0, int m,
                       const Options& options = {}) {
  using detail::Matrix;
  using detail::Vector;

  const int n = static_cast<int>(x0.size());
  if (n < 1) throw std::invalid_argument("cobyla needs at least one variable");
  if (m < 0) throw std::invalid_argument("constraint count must be >= 0");
  if (!(options.rho_begin > 0.0) || !(options.rho_end > 0.0) ||
      options.rho_end > options.rho_begin) {
    throw std::invalid_argument("need 0 < rho_end <= rho_begin");
  }
  if (options.max_evaluations < n + 2) {
    throw std::invalid_argument("evaluation budget must exceed n + 1");
  }

  const int np = n + 1;
  const int mp = m + 1;
  const int mpp = m + 2;
  constexpr double kAlpha = 0.25;
  constexpr double kBeta = 2.1;
  constexpr double kGamma = 0.5;
  constexpr double kDelta = 1.1;

  Vector x(n);
  for (int i = 1; i <= n; ++i) x(i) = x0[static_cast<std::size_t>(i - 1)];
  Vector con(mpp);
  Matrix sim(n, np);
  Matrix simi(n, n);
  Matrix datmat(mpp, np);
  Matrix a(n, mp);
  Vector vsig(n), veta(n), sigbar(n), dx(n), w(n);

  Result result;
  double rho = options.rho_begin;
  double parmu = 0.0;
  int nfvals = 0;
  int jdrop = np;
  bool branch = false;
  bool well_shaped = true;
  bool full = false;
  double f = 0.0;
  double resmax = 0.0;
  double temp = 0.0;
  double prerec = 0.0;
  double prerem = 0.0;
  double parsig = 0.0;
  double pareta = 0.0;
  double sum = 0.0;

  auto evaluate = [&]() {
    ++nfvals;
    f = calcfc(std::span<const double>(x.data.data(), x.data.size()),
               std::span<double>(con.data.data(), static_cast<std::size_t>(m)));
    resmax = 0.0;
    for (int k = 1; k <= m; ++k) resmax = std::max(resmax, -con(k));
    con(mp) = f;
    con(mpp) = resmax;
  };

  // Replace simplex vertex jdrop by sim(.,np) + dx and update the inverse.
  auto replace_vertex = [&]() {
    temp = 0.0;
    for (int i = 1; i <= n; ++i) {
      sim(i, jdrop) = dx(i);
      temp += simi(jdrop, i) * dx(i);
    }
    for (int i = 1; i <= n; ++i) simi(jdrop, i) /= temp;
    for (int j = 1; j <= n; ++j) {
      if (j == jdrop) continue;
      temp = 0.0;
      for (int i = 1; i <= n; ++i) temp += simi(j, i) * dx(i);
      for (int i = 1; i <= n; ++i) simi(j, i) -= temp * simi(jdrop, i);
    }
  };

  temp = 1.0 / rho;
  for (int i = 1; i <= n; ++i) {
    sim(i, np) = x(i);
    for (int j = 1; j <= n; ++j) simi(i, j) = 0.0;
    sim(i, i) = rho;
    simi(i, i) = temp;
  }

L40:
  if (nfvals >= options.max_evaluations && nfvals > 0) {
    result.status = Status::kMaxEvaluations;
    goto L600;
  }
  evaluate();
  if (branch) goto L440;

  // Building the initial simplex one vertex at a time.
  for (int k = 1; k <= mpp; ++k) datmat(k, jdrop) = con(k);
  if (nfvals > np) goto L130;
  if (jdrop <= n) {
    if (datmat(mp, np) <= f) {
      x(jdrop) = sim(jdrop, np);
    } else {
      sim(jdrop, np) = x(jdrop);
      for (int k = 1; k <= mpp; ++k) {
        datmat(k, jdrop) = datmat(k, np);
        datmat(k, np) = con(k);
      }
      for (int k = 1; k <= jdrop; ++k) {
        sim(jdrop, k) = -rho;
        temp = 0.0;
        for (int i = k; i <= jdrop; ++i) temp -= simi(i, k);
        simi(jdrop, k) = temp;
      }
    }
  }
  if (nfvals <= n) {
    jdrop = nfvals;
    x(jdrop) += rho;
    goto L40;
  }

L130:
  branch = true;

L140:
  // Move the vertex with the best merit value to position np.
  {
    double phimin = datmat(mp, np) + parmu * datmat(mpp, np);
    int nbest = np;
    for (int j = 1; j <= n; ++j) {
      temp = datmat(mp, j) + parmu * datmat(mpp, j);
      if (temp < phimin) {
        nbest = j;
        phimin = temp;
      } else if (temp == phimin && parmu == 0.0 &&
                 datmat(mpp, j) < datmat(mpp, nbest)) {
        nbest = j;
      }
    }
    if (nbest <= n) {
      for (int i = 1; i <= mpp; ++i) std::swap(datmat(i, np), datmat(i, nbest));
      for (int i = 1; i <= n; ++i) {
        temp = sim(i, nbest);
        sim(i, nbest) = 0.0;
        sim(i, np) += temp;
        double tempa = 0.0;
        for (int k = 1; k <= n; ++k) {
          sim(i, k) -= temp;
          tempa -= simi(k, i);
        }
        simi(nbest, i) = tempa;
      }
    }
  }

  {
    double error = 0.0;
    for (int i = 1; i <= n; ++i) {
      for (int j = 1; j <= n; ++j) {
        temp = i == j ? -1.0 : 0.0;
        for (int k = 1; k <= n; ++k) temp += simi(i, k) * sim(k, j);
        error = std::max(error, std::fabs(temp));
      }
    }
    if (error > 0.1) {
      result.status = Status::kRoundingErrors;
      goto L600;
    }
  }

  // Linear models: con(k) holds minus the constraint values at the best
  // vertex, a(.,k) the gradients (negated for the objective).
  for (int k = 1; k <= mp; ++k) {
    con(k) = -datmat(k, np);
    for (int j = 1; j <= n; ++j) w(j) = datmat(k, j) + con(k);
    for (int i = 1; i <= n; ++i) {
      temp = 0.0;
      for (int j = 1; j <= n; ++j) temp += w(j) * simi(j, i);
      a(i, k) = k == mp ? -temp : temp;
    }
  }

  // Is the simplex acceptable?
  well_shaped = true;
  parsig = kAlpha * rho;
  pareta = kBeta * rho;
  for (int j = 1; j <= n; ++j) {
    double wsig = 0.0;
    double weta = 0.0;
    for (int i = 1; i <= n; ++i) {
      wsig += simi(j, i) * simi(j, i);
      weta += sim(i, j) * sim(i, j);
    }
    vsig(j) = 1.0 / std::sqrt(wsig);
    veta(j) = std::sqrt(weta);
    if (vsig(j) < parsig || veta(j) > pareta) well_shaped = false;
  }

  if (branch || well_shaped) goto L370;

  // Improve the simplex geometry by replacing its worst vertex.
  jdrop = 0;
  temp = pareta;
  for (int j = 1; j <= n; ++j) {
    if (veta(j) > temp) {
      jdrop = j;
      temp = veta(j);
    }
  }
  if (jdrop == 0) {
    for (int j = 1; j <= n; ++j) {
      if (vsig(j) < temp) {
        jdrop = j;
        temp = vsig(j);
      }
    }
  }

  temp = kGamma * rho * vsig(jdrop);
  for (int i = 1; i <= n; ++i) dx(i) = temp * simi(jdrop, i);
  {
    double cvmaxp = 0.0;
    double cvmaxm = 0.0;
    for (int k = 1; k <= mp; ++k) {
      sum = 0.0;
      for (int i = 1; i <= n; ++i) sum += a(i, k) * dx(i);
      if (k < mp) {
        temp = datmat(k, np);
        cvmaxp = std::max(cvmaxp, -sum - temp);
        cvmaxm = std::max(cvmaxm, sum - temp);
      }
    }
    const double dxsign = parmu * (cvmaxp - cvmaxm) > sum + sum ? -1.0 : 1.0;
    for (int i = 1; i <= n; ++i) dx(i) *= dxsign;
  }
  replace_vertex();
  for (int j = 1; j <= n; ++j) x(j) = sim(j, np) + dx(j);
  goto L40;

L370:
  full = detail::trust_region_step(n, m, a, con, rho, dx);
  if (!full) {
    temp = 0.0;
    for (int i = 1; i <= n; ++i) temp += dx(i) * dx(i);
    if (temp < 0.25 * rho * rho) {
      branch = true;
      goto L550;
    }
  }

  // Predicted reductions in the largest violation and in the objective,
  // and the penalty parameter that makes the step worthwhile.
  {
    double resnew = 0.0;
    con(mp) = 0.0;
    for (int k = 1; k <= mp; ++k) {
      sum = con(k);
      for (int i = 1; i <= n; ++i) sum -= a(i, k) * dx(i);
      if (k < mp) resnew = std::max(resnew, sum);
    }
    double barmu = 0.0;
    prerec = datmat(mpp, np) - resnew;
    if (prerec > 0.0) barmu = sum / prerec;
    if (parmu < 1.5 * barmu) {
      parmu = 2.0 * barmu;
      const double phi = datmat(mp, np) + parmu * datmat(mpp, np);
      for (int j = 1; j <= n; ++j) {
        temp = datmat(mp, j) + parmu * datmat(mpp, j);
        if (temp < phi) goto L140;
        if (temp == phi && parmu == 0.0 && datmat(mpp, j) < datmat(mpp, np)) {
          goto L140;
        }
      }
    }
    prerem = parmu * prerec - sum;
  }

  for (int i = 1; i <= n; ++i) x(i) = sim(i, np) + dx(i);
  branch = true;
  goto L40;

L440:
  // Compare actual and predicted merit reduction, then decide which vertex
  // the new point replaces.
  {
    const double vmold = datmat(mp, np) + parmu * datmat(mpp, np);
    const double vmnew = f + parmu * resmax;
    double trured = vmold - vmnew;
    if (parmu == 0.0 && f == datmat(mp, np)) {
      prerem = prerec;
      trured = datmat(mpp, np) - resmax;
    }

    double ratio = trured <= 0.0 ? 1.0 : 0.0;
    jdrop = 0;
    for (int j = 1; j <= n; ++j) {
      temp = 0.0;
      for (int i = 1; i <= n; ++i) temp += simi(j, i) * dx(i);
      temp = std::fabs(temp);
      if (temp > ratio) {
        jdrop = j;
        ratio = temp;
      }
      sigbar(j) = temp * vsig(j);
    }

    double edgmax = kDelta * rho;
    int l = 0;
    for (int j = 1; j <= n; ++j) {
      if (sigbar(j) >= parsig || sigbar(j) >= vsig(j)) {
        temp = veta(j);
        if (trured > 0.0) {
          temp = 0.0;
          for (int i = 1; i <= n; ++i) {
            const double diff = dx(i) - sim(i, j);
            temp += diff * diff;
          }
          temp = std::sqrt(temp);
        }
        if (temp > edgmax) {
          l = j;
          edgmax = temp;
        }
      }
    }
    if (l > 0) jdrop = l;
    if (jdrop == 0) goto L550;

    replace_vertex();
    for (int k = 1; k <= mpp; ++k) datmat(k, jdrop) = con(k);

    if (trured > 0.0 && trured >= 0.1 * prerem) goto L140;
  }

L550:
  if (!well_shaped) {
    branch = false;
    goto L140;
  }

  // Shrink the trust region, adjusting the penalty parameter.
  if (rho > options.rho_end) {
    rho *= 0.5;
    if (rho <= 1.5 * options.rho_end) rho = options.rho_end;
    if (parmu > 0.0) {
      double denom = 0.0;
      double cmin = 0.0;
      double cmax = 0.0;
      for (int k = 1; k <= mp; ++k) {
        cmin = datmat(k, np);
        cmax = cmin;
        for (int i = 1; i <= n; ++i) {
          cmin = std::min(cmin, datmat(k, i));
          cmax = std::max(cmax, datmat(k, i));
        }
        if (k <= m && cmin < 0.5 * cmax) {
          temp = std::max(cmax, 0.0) - cmin;
          denom = denom <= 0.0 ? temp : std::min(denom, temp);
        }
      }
      if (denom == 0.0) {
        parmu = 0.0;
      } else if (cmax - cmin < parmu * denom) {
        parmu = (cmax - cmin) / denom;
      }
    }
    goto L140;
  }

  result.status = Status::kConverged;
  if (full) goto L620;

L600:
  for (int i = 1; i <= n; ++i) x(i) = sim(i, np);
  f = datmat(mp, np);
  resmax = datmat(mpp, np);

L620:
  result.x = x.data;
  result.f = f;
  result.max_violation = resmax;
  result.evaluations = nfvals;
  return result;
}

}  // namespace sloscale::cobyla

#endif  // SLOSCALE_COBYLA_HPP_
