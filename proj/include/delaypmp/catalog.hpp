#pragma once

#include <vector>

#include "delaypmp/model.hpp"

/// Builtin dynamics and cost families. Every member carries analytic
/// derivatives so the adjoint machinery can use it.
namespace delaypmp::catalog {

/// x' = sum_k A_k x(t - h_k) + sum_k B_k u(t - h_k) + c. Missing trailing
/// matrices are zero; `A` and `B` are padded to `slots` entries.
Dynamics linear_delay(std::vector<Mat> A, std::vector<Mat> B, int slots, Vec c = Vec());

/// Frobenius norm of [A_0 ... A_N]: a global Lipschitz modulus of the
/// linear family w.r.t. the stacked state slots.
double linear_lipschitz(const std::vector<Mat>& A);

/// Scalar x' = r x(t) (1 - x(t - h_s) / K) + sum_k b_k u(t - h_k).
Dynamics scalar_logistic_delay(double r, double K, int delaySlot, std::vector<double> b, int slots);

/// L = 1/2 sum x_k' Q_k x_k + 1/2 sum u_k' R_k u_k + sum q_k' x_k + sum r_k' u_k + c.
struct QuadraticRunningTerms {
  std::vector<Mat> Q, R;
  std::vector<Vec> q, r;
  double c = 0.0;
};
RunningCost quadratic_running(QuadraticRunningTerms terms, int n, int m, int slots);
RunningCost zero_running();

/// g = 1/2 xS' QS xS + 1/2 xT' QT xT + cS' xS + cT' xT + a T + 1/2 w (T - T*)^2.
struct QuadraticEndpointTerms {
  Mat QS, QT;
  Vec cS, cT;
  double timeLinear = 0.0;
  double timeWeight = 0.0;
  double timeTarget = 0.0;
};
EndpointCost quadratic_endpoint(QuadraticEndpointTerms terms, int n);

InitialCost zero_initial();
/// 1/2 dx' Wx dx + 1/2 du' Wu du.
InitialCost quadratic_initial(Mat Wx, Mat Wu);
/// w (|dx|_1 + |du|_1); not differentiable, so no gradient is attached.
InitialCost abs_initial(double w);

}  // namespace delaypmp::catalog
