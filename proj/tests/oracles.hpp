#pragma once

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace hodl::testing {

/// Accelerated proximal gradient with adaptive restart on
/// (1/2T)||Y - XB||^2 + alpha (||B||^2/4 + sum_j ||B_j.||/2),
/// working from the data directly.
inline Eigen::MatrixXd fista_enet(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, double alpha,
                                  int max_iter = 500000)
{
    const double T = double(X.rows());
    const Eigen::MatrixXd H = X.transpose() * X / T;
    const double L = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(H).eigenvalues().maxCoeff() + alpha / 2;
    const double step = 1.0 / L;
    auto smooth_value = [&](const Eigen::MatrixXd& B) {
        return (Y - X * B).squaredNorm() / (2 * T) + alpha * B.squaredNorm() / 4;
    };
    auto value = [&](const Eigen::MatrixXd& B) {
        return smooth_value(B) + alpha * B.rowwise().norm().sum() / 2;
    };
    auto prox = [&](Eigen::MatrixXd V) {
        const double cut = step * alpha / 2;
        for (Eigen::Index j = 0; j < V.rows(); ++j) {
            const double n = V.row(j).norm();
            V.row(j) *= n > cut ? (1 - cut / n) : 0.0;
        }
        return V;
    };
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(X.cols(), Y.cols());
    Eigen::MatrixXd Z = B;
    double t = 1;
    double last = value(B);
    int quiet = 0;
    for (int it = 0; it < max_iter; ++it) {
        const Eigen::MatrixXd grad = -X.transpose() * (Y - X * Z) / T + (alpha / 2) * Z;
        const Eigen::MatrixXd next = prox(Z - step * grad);
        const double v = value(next);
        if (v > last) {
            // restart momentum
            t = 1;
            Z = B;
            continue;
        }
        const double t_next = (1 + std::sqrt(1 + 4 * t * t)) / 2;
        Z = next + ((t - 1) / t_next) * (next - B);
        const double change = (next - B).cwiseAbs().maxCoeff();
        B = next;
        t = t_next;
        quiet = change < 1e-15 ? quiet + 1 : 0;
        last = v;
        if (quiet > 50) break;
    }
    return B;
}

} // namespace hodl::testing
