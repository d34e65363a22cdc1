#include "tlsuff/transfer.hpp"

#include <cmath>
#include <string>

namespace tlsuff {

Matrix make_features(const Matrix& B, const Matrix& X) {
  if (X.cols() != B.rows()) {
    throw DimensionMismatch("make_features: X has " + std::to_string(X.cols()) +
                            " columns but B has " + std::to_string(B.rows()) + " rows");
  }
  return X * B;
}

namespace {

TransferFit fit_with_matrix(const Matrix& B, const TargetDataset& data, const FitOptions& opts) {
  if (static_cast<Eigen::Index>(B.cols()) >= data.n()) {
    throw TooFewSamples("transfer fit: K = " + std::to_string(B.cols()) +
                        " must be smaller than n = " + std::to_string(data.n()));
  }
  TargetDataset working;
  working.X = make_features(B, data.X);
  working.y = data.y;
  auto fit = fit_binary_logistic(working, opts);

  TransferFit out;
  out.gamma = std::move(fit.theta);
  out.theta = B * out.gamma;
  out.Z = std::move(working.X);
  out.diagnostics = fit.diagnostics;
  return out;
}

}  // namespace

TransferFit fit_transfer(const SourceModel& source, const TargetDataset& data,
                         const FitOptions& opts) {
  if (source.p() != data.p()) {
    throw DimensionMismatch("fit_transfer: model has p = " + std::to_string(source.p()) +
                            " but data has p = " + std::to_string(data.p()));
  }
  return fit_with_matrix(source.B, data, opts);
}

TransferFit oracle_fit(const Matrix& B_true, const TargetDataset& data, const FitOptions& opts) {
  if (B_true.rows() != data.p()) {
    throw DimensionMismatch("oracle_fit: B has " + std::to_string(B_true.rows()) +
                            " rows but data has p = " + std::to_string(data.p()));
  }
  return fit_with_matrix(B_true, data, opts);
}

double mse(const Vector& theta_hat, const Vector& theta_true) {
  if (theta_hat.size() != theta_true.size()) {
    throw DimensionMismatch("mse: vector lengths differ");
  }
  return (theta_hat - theta_true).squaredNorm() / static_cast<double>(theta_hat.size());
}

double direction_se(const SourceModel& source, const TransferFit& fit, const Vector& v) {
  if (v.size() != source.p()) {
    throw DimensionMismatch("direction_se: direction length != p");
  }
  const Eigen::Index n = fit.Z.rows(), K = fit.Z.cols();
  Matrix info = Matrix::Zero(K, K);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mu = sigmoid(fit.Z.row(i).dot(fit.gamma));
    info.noalias() += (mu * (1.0 - mu)) * fit.Z.row(i).transpose() * fit.Z.row(i);
  }
  info /= static_cast<double>(n);
  const Vector u = source.B.transpose() * v;
  const double var = u.dot(info.ldlt().solve(u));
  return std::sqrt(std::max(var, 0.0));
}

}  // namespace tlsuff
