#include "isorank/losses.hpp"

#include <algorithm>
#include <stdexcept>

namespace isorank {

namespace {

void check_perms(const Matrix& m, const Permutation& a, const Permutation& b) {
    if (!is_permutation_of_n(a, m.rows()) || !is_permutation_of_n(b, m.rows()))
        throw std::invalid_argument("loss: arguments must be permutations of the experts");
}

}  // namespace

double perm_loss(const Matrix& m, const Permutation& pi_hat, const Permutation& pi_star) {
    check_perms(m, pi_hat, pi_star);
    Permutation inv_hat = inverse_permutation(pi_hat);
    Permutation inv_star = inverse_permutation(pi_star);
    double total = 0.0;
    for (int r = 0; r < m.rows(); ++r)
        if (inv_hat[r] != inv_star[r]) total += row_dist_sq(m, inv_hat[r], inv_star[r]);
    return total;
}

double linf_loss(const Matrix& m, const Permutation& pi_hat, const Permutation& pi_star) {
    check_perms(m, pi_hat, pi_star);
    Permutation inv_hat = inverse_permutation(pi_hat);
    Permutation inv_star = inverse_permutation(pi_star);
    double worst = 0.0;
    for (int r = 0; r < m.rows(); ++r)
        if (inv_hat[r] != inv_star[r]) worst = std::max(worst, row_dist_sq(m, inv_hat[r], inv_star[r]));
    return worst;
}

double lerr_loss(const Matrix& m, const Permutation& pi_hat, const Permutation& pi_star) {
    check_perms(m, pi_hat, pi_star);
    double worst = 0.0;
    const int n = m.rows();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (pi_hat[i] < pi_hat[j] && pi_star[i] > pi_star[j])
                worst = std::max(worst, row_dist_sq(m, i, j));
    return worst;
}

}  // namespace isorank
