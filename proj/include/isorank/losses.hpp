#pragma once

#include "isorank/matrix.hpp"

namespace isorank {

// ||M_{pi_hat^{-1}} - M_{pi_star^{-1}}||_F^2
double perm_loss(const Matrix& m, const Permutation& pi_hat, const Permutation& pi_star);

// sup_i || row i of the two rank-arranged matrices ||_2^2
double linf_loss(const Matrix& m, const Permutation& pi_hat, const Permutation& pi_star);

// max over inconsistently ordered pairs of ||M_i - M_j||_2^2; 0 when none.
double lerr_loss(const Matrix& m, const Permutation& pi_hat, const Permutation& pi_star);

}  // namespace isorank
