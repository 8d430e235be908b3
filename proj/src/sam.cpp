#include "ssfnet/sam.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "ssfnet/error.hpp"

namespace ssfnet {

SAMModel sam_fit(const Tensor& cube) {
    const Shape s = cube.shape;
    if (s.n != 1 || s.h * s.w < 1) throw DataError("sam_fit: expected a single non-empty cube");
    if (!cube.all_finite()) throw NumericalError("sam_fit: non-finite input");
    SAMModel m;
    m.height = s.h;
    m.width = s.w;
    const long rows = static_cast<long>(s.h) * s.w;
    m.S = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(cube.data.data(),
                                                                                                   rows, s.c);
    m.M = (m.S.transpose() * m.S) / static_cast<double>(rows);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m.M);
    if (eig.info() != Eigen::Success) throw NumericalError("sam_fit: eigendecomposition failed");
    m.eigenvalues = eig.eigenvalues();
    const double lambda_max = m.eigenvalues.size() > 0 ? m.eigenvalues.maxCoeff() : 0.0;
    const double cutoff = kSamEigenTolerance * lambda_max;
    Eigen::VectorXd inv_sqrt = Eigen::VectorXd::Zero(s.c);
    for (int k = 0; k < s.c; ++k) {
        if (lambda_max > 0.0 && m.eigenvalues(k) > cutoff) {
            inv_sqrt(k) = 1.0 / std::sqrt(m.eigenvalues(k));
            ++m.rank;
        }
    }
    const Eigen::MatrixXd& Q = eig.eigenvectors();
    m.M_inv_sqrt = Q * inv_sqrt.asDiagonal() * Q.transpose();
    m.M_inv_sqrt = 0.5 * (m.M_inv_sqrt + m.M_inv_sqrt.transpose());
    return m;
}

void sam_set_target(SAMModel& model, const std::vector<double>& target) {
    if (static_cast<long>(target.size()) != model.M.rows()) {
        throw DataError("sam target has " + std::to_string(target.size()) + " bands, cube has " +
                        std::to_string(model.M.rows()));
    }
    model.t = Eigen::Map<const Eigen::VectorXd>(target.data(), static_cast<long>(target.size()));
    model.t_white = model.M_inv_sqrt * model.t;
}

double sam_score(const SAMModel& model, int i, int j) {
    if (i < 0 || i >= model.height || j < 0 || j >= model.width) {
        throw DataError("sam_score: location (" + std::to_string(i) + "," + std::to_string(j) + ") out of range");
    }
    if (model.t_white.size() == 0) throw DataError("sam_score: target spectrum not set");
    const Eigen::VectorXd s = model.M_inv_sqrt * model.S.row(static_cast<long>(i) * model.width + j).transpose();
    const double ns = s.norm();
    const double nt = model.t_white.norm();
    if (ns < 1e-12 || nt < 1e-12) return 0.0;
    return std::clamp(s.dot(model.t_white) / (ns * nt), -1.0, 1.0);
}

Tensor sam_map(const SAMModel& model) {
    Tensor out(Shape{1, model.height, model.width, 1});
    for (int i = 0; i < model.height; ++i)
        for (int j = 0; j < model.width; ++j) out.at(0, i, j, 0) = sam_score(model, i, j);
    return out;
}

}  // namespace ssfnet
