#include "tlsuff/types.hpp"

#include <string>
#include <vector>

namespace tlsuff {

void TargetDataset::validate() const {
  if (X.rows() < 1 || X.cols() < 1) {
    throw DimensionMismatch("target dataset: need n >= 1 and p >= 1");
  }
  if (y.size() != X.rows()) {
    throw DimensionMismatch("target dataset: label count " + std::to_string(y.size()) +
                            " != row count " + std::to_string(X.rows()));
  }
  if (!X.allFinite()) {
    throw ParseError("target dataset: non-finite feature value");
  }
  bool has0 = false, has1 = false;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y[i] == 0) {
      has0 = true;
    } else if (y[i] == 1) {
      has1 = true;
    } else {
      throw ParseError("target dataset: label " + std::to_string(y[i]) + " at row " +
                       std::to_string(i) + " is not in {0,1}");
    }
  }
  if (!has0 || !has1) {
    throw DegenerateLabels("target dataset: labels must contain both 0 and 1");
  }
}

void SourceDataset::validate() const {
  if (K < 1) {
    throw DimensionMismatch("source dataset: K must be >= 1");
  }
  if (Xs.rows() < 1 || Xs.cols() < 1) {
    throw DimensionMismatch("source dataset: need N >= 1 and p >= 1");
  }
  if (ys.size() != Xs.rows()) {
    throw DimensionMismatch("source dataset: label count " + std::to_string(ys.size()) +
                            " != row count " + std::to_string(Xs.rows()));
  }
  if (!Xs.allFinite()) {
    throw ParseError("source dataset: non-finite feature value");
  }
  std::vector<char> seen(static_cast<size_t>(K) + 1, 0);
  for (Eigen::Index i = 0; i < ys.size(); ++i) {
    if (ys[i] < 0 || ys[i] > K) {
      throw ParseError("source dataset: label " + std::to_string(ys[i]) + " at row " +
                       std::to_string(i) + " outside {0,...," + std::to_string(K) + "}");
    }
    seen[static_cast<size_t>(ys[i])] = 1;
  }
  for (int k = 0; k <= K; ++k) {
    if (!seen[static_cast<size_t>(k)]) {
      throw MissingClass(k, "source dataset: class " + std::to_string(k) +
                                " never appears in the labels");
    }
  }
}

}  // namespace tlsuff
