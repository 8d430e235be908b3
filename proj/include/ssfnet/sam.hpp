#pragma once

// Classic whitened spectral angle mapper, used as a standalone detector and as
// an oracle for the learned affinity branch.

#include <Eigen/Core>
#include <vector>

#include "ssfnet/tensor.hpp"

namespace ssfnet {

struct SAMModel {
    int height = 0;
    int width = 0;
    Eigen::MatrixXd S;           // [HW, C] flattened spectra
    Eigen::MatrixXd M;           // (1/HW) S^T S
    Eigen::MatrixXd M_inv_sqrt;  // Q V^{-1/2} Q^T over eigenvalues above tolerance
    Eigen::VectorXd eigenvalues;
    Eigen::VectorXd t;           // target spectrum
    Eigen::VectorXd t_white;     // M_inv_sqrt * t
    int rank = 0;
};

/// Relative eigenvalue cutoff for the pseudo-inverse square root.
inline constexpr double kSamEigenTolerance = 1e-10;

/// Fits the second-moment whitening of cube [1,H,W,C].
SAMModel sam_fit(const Tensor& cube);
void sam_set_target(SAMModel& model, const std::vector<double>& target);
/// Cosine between whitened S(i,j,:) and whitened target; 0 when either
/// whitened vector has norm below 1e-12.
double sam_score(const SAMModel& model, int i, int j);
/// Cosine map [1,H,W,1].
Tensor sam_map(const SAMModel& model);

}  // namespace ssfnet
