#include "delaypmp/catalog.hpp"

#include <cmath>

#include "delaypmp/errors.hpp"

namespace delaypmp::catalog {

namespace {

std::vector<Mat> pad(std::vector<Mat> v, int slots, int rows, int cols) {
  if (static_cast<int>(v.size()) > slots) throw InvalidArgument("more coefficient matrices than delay slots");
  for (auto& M : v) {
    if (M.size() == 0) M = Mat::Zero(rows, cols);
    if (M.rows() != rows || M.cols() != cols) throw InvalidArgument("coefficient matrix has wrong shape");
  }
  while (static_cast<int>(v.size()) < slots) v.push_back(Mat::Zero(rows, cols));
  return v;
}

std::vector<Vec> pad(std::vector<Vec> v, int slots, int rows) {
  if (static_cast<int>(v.size()) > slots) throw InvalidArgument("more coefficient vectors than delay slots");
  for (auto& x : v) {
    if (x.size() == 0) x = Vec::Zero(rows);
    if (x.size() != rows) throw InvalidArgument("coefficient vector has wrong length");
  }
  while (static_cast<int>(v.size()) < slots) v.push_back(Vec::Zero(rows));
  return v;
}

}  // namespace

Dynamics linear_delay(std::vector<Mat> A, std::vector<Mat> B, int slots, Vec c) {
  if (A.empty() || A.front().size() == 0) throw InvalidArgument("linear_delay needs A_0");
  const int n = static_cast<int>(A.front().rows());
  const int m = B.empty() || B.front().size() == 0 ? 1 : static_cast<int>(B.front().cols());
  A = pad(std::move(A), slots, n, n);
  B = pad(std::move(B), slots, n, m);
  if (c.size() == 0) c = Vec::Zero(n);
  Dynamics f;
  f.value = [A, B, c](const DelayedArgs& a) {
    Vec out = c;
    for (std::size_t k = 0; k < A.size(); ++k) {
      out.noalias() += A[k] * a.x.col(static_cast<Eigen::Index>(k));
      out.noalias() += B[k] * a.u.col(static_cast<Eigen::Index>(k));
    }
    return out;
  };
  f.dx = [A](const DelayedArgs&, int k) { return A[static_cast<std::size_t>(k)]; };
  f.du = [B](const DelayedArgs&, int k) { return B[static_cast<std::size_t>(k)]; };
  return f;
}

double linear_lipschitz(const std::vector<Mat>& A) {
  double sq = 0.0;
  for (const auto& M : A) sq += M.squaredNorm();
  return std::sqrt(sq);
}

Dynamics scalar_logistic_delay(double r, double K, int delaySlot, std::vector<double> b, int slots) {
  if (K == 0.0) throw InvalidArgument("logistic carrying capacity must be non-zero");
  if (delaySlot < 0 || delaySlot >= slots) throw InvalidArgument("logistic delay slot out of range");
  if (static_cast<int>(b.size()) > slots) throw InvalidArgument("too many control coefficients");
  b.resize(static_cast<std::size_t>(slots), 0.0);
  const auto s = delaySlot;
  Dynamics f;
  f.value = [r, K, s, b](const DelayedArgs& a) {
    Vec out(1);
    out(0) = r * a.x(0, 0) * (1.0 - a.x(0, s) / K);
    for (std::size_t k = 0; k < b.size(); ++k) out(0) += b[k] * a.u(0, static_cast<Eigen::Index>(k));
    return out;
  };
  f.dx = [r, K, s](const DelayedArgs& a, int k) {
    Mat J = Mat::Zero(1, 1);
    if (k == 0) J(0, 0) += r * (1.0 - a.x(0, s) / K);
    if (k == s) J(0, 0) += -r * a.x(0, 0) / K;
    return J;
  };
  f.du = [b](const DelayedArgs&, int k) {
    Mat J(1, 1);
    J(0, 0) = b[static_cast<std::size_t>(k)];
    return J;
  };
  return f;
}

RunningCost quadratic_running(QuadraticRunningTerms t, int n, int m, int slots) {
  auto Q = pad(std::move(t.Q), slots, n, n);
  auto R = pad(std::move(t.R), slots, m, m);
  auto q = pad(std::move(t.q), slots, n);
  auto r = pad(std::move(t.r), slots, m);
  const double c = t.c;
  RunningCost L;
  L.value = [Q, R, q, r, c](const DelayedArgs& a) {
    double v = c;
    for (std::size_t k = 0; k < Q.size(); ++k) {
      const auto xk = a.x.col(static_cast<Eigen::Index>(k));
      const auto uk = a.u.col(static_cast<Eigen::Index>(k));
      v += 0.5 * xk.dot(Q[k] * xk) + 0.5 * uk.dot(R[k] * uk) + q[k].dot(xk) + r[k].dot(uk);
    }
    return v;
  };
  L.dx = [Q, q](const DelayedArgs& a, int k) {
    const auto kk = static_cast<std::size_t>(k);
    const Mat& M = Q[kk];
    return Vec(0.5 * (M + M.transpose()) * a.x.col(k) + q[kk]);
  };
  L.du = [R, r](const DelayedArgs& a, int k) {
    const auto kk = static_cast<std::size_t>(k);
    const Mat& M = R[kk];
    return Vec(0.5 * (M + M.transpose()) * a.u.col(k) + r[kk]);
  };
  return L;
}

RunningCost zero_running() {
  RunningCost L;
  L.value = [](const DelayedArgs&) { return 0.0; };
  L.dx = [](const DelayedArgs& a, int) { return Vec(Vec::Zero(a.x.rows())); };
  L.du = [](const DelayedArgs& a, int) { return Vec(Vec::Zero(a.u.rows())); };
  return L;
}

EndpointCost quadratic_endpoint(QuadraticEndpointTerms t, int n) {
  if (t.QS.size() == 0) t.QS = Mat::Zero(n, n);
  if (t.QT.size() == 0) t.QT = Mat::Zero(n, n);
  if (t.cS.size() == 0) t.cS = Vec::Zero(n);
  if (t.cT.size() == 0) t.cT = Vec::Zero(n);
  if (t.QS.rows() != n || t.QS.cols() != n || t.QT.rows() != n || t.QT.cols() != n ||
      t.cS.size() != n || t.cT.size() != n)
    throw InvalidArgument("endpoint cost terms have wrong shape");
  EndpointCost g;
  g.value = [t](const Vec& xS, const Vec& xT, double T) {
    const double dT = T - t.timeTarget;
    return 0.5 * xS.dot(t.QS * xS) + 0.5 * xT.dot(t.QT * xT) + t.cS.dot(xS) + t.cT.dot(xT) +
           t.timeLinear * T + 0.5 * t.timeWeight * dT * dT;
  };
  g.gradient = [t](const Vec& xS, const Vec& xT, double T) {
    EndpointGradient gr;
    gr.xS = 0.5 * (t.QS + t.QS.transpose()) * xS + t.cS;
    gr.xT = 0.5 * (t.QT + t.QT.transpose()) * xT + t.cT;
    gr.T = t.timeLinear + t.timeWeight * (T - t.timeTarget);
    return gr;
  };
  return g;
}

InitialCost zero_initial() {
  InitialCost c;
  c.value = [](double, const Vec&, const Vec&) { return 0.0; };
  c.gradient = [](double, const Vec& dx, const Vec& du) {
    return std::pair<Vec, Vec>{Vec::Zero(dx.size()), Vec::Zero(du.size())};
  };
  return c;
}

InitialCost quadratic_initial(Mat Wx, Mat Wu) {
  InitialCost c;
  c.value = [Wx, Wu](double, const Vec& dx, const Vec& du) {
    return 0.5 * dx.dot(Wx * dx) + 0.5 * du.dot(Wu * du);
  };
  c.gradient = [Wx, Wu](double, const Vec& dx, const Vec& du) {
    return std::pair<Vec, Vec>{0.5 * (Wx + Wx.transpose()) * dx, 0.5 * (Wu + Wu.transpose()) * du};
  };
  return c;
}

InitialCost abs_initial(double w) {
  InitialCost c;
  c.value = [w](double, const Vec& dx, const Vec& du) {
    return w * (dx.lpNorm<1>() + du.lpNorm<1>());
  };
  return c;
}

}  // namespace delaypmp::catalog
