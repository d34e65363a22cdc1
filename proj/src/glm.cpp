#include "tlsuff/glm.hpp"

#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace tlsuff {

namespace {

constexpr double kSeparationNorm = 1e6;
constexpr int kMaxHalvings = 30;

void check_separation(double coef_norm, bool finite) {
  if (!finite || coef_norm > kSeparationNorm) {
    throw SeparationDiverged(
        "coefficient norm exceeded 1e6 or became non-finite; the labels are "
        "likely (quasi-)completely separated");
  }
}

double rel_change(double ll_new, double ll_old) {
  return std::fabs(ll_new - ll_old) / (std::fabs(ll_old) + 1.0);
}

// Limited-memory BFGS minimization with Armijo backtracking. `eval` fills the
// gradient and returns the objective. Convergence is declared on the gradient
// sup-norm or on the relative objective change, matching the Newton path.
struct LbfgsOutcome {
  Vector x;
  FitDiagnostics diag;  // final_loglik holds -objective
};

LbfgsOutcome lbfgs_minimize(const std::function<double(const Vector&, Vector&)>& eval,
                            Vector x0, const FitOptions& opts,
                            const std::function<bool(const Vector&)>& diverged = {}) {
  const Eigen::Index d = x0.size();
  const int m = std::max(1, opts.lbfgs_history);
  std::vector<Vector> s_hist, y_hist;
  std::vector<double> rho_hist;

  Vector x = std::move(x0);
  Vector g(d), g_new(d), x_new(d);
  double f = eval(x, g);

  LbfgsOutcome out;
  for (int iter = 0; iter < opts.max_iter; ++iter) {
    const double gnorm = g.lpNorm<Eigen::Infinity>();
    if (gnorm <= opts.grad_tol) {
      out.x = x;
      out.diag = {iter, gnorm, -f, true};
      return out;
    }

    // Two-loop recursion.
    Vector q = g;
    const int h = static_cast<int>(s_hist.size());
    std::vector<double> alpha(static_cast<size_t>(h));
    for (int j = h - 1; j >= 0; --j) {
      alpha[j] = rho_hist[j] * s_hist[j].dot(q);
      q -= alpha[j] * y_hist[j];
    }
    if (h > 0) {
      const double gamma = s_hist[h - 1].dot(y_hist[h - 1]) / y_hist[h - 1].squaredNorm();
      q *= gamma;
    }
    for (int j = 0; j < h; ++j) {
      const double beta = rho_hist[j] * y_hist[j].dot(q);
      q += (alpha[j] - beta) * s_hist[j];
    }
    Vector dir = -q;
    double dg = dir.dot(g);
    if (!(dg < 0.0)) {  // not a descent direction; fall back to steepest descent
      dir = -g;
      dg = -g.squaredNorm();
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
    }

    // Armijo backtracking.
    double step = 1.0;
    double f_new = f;
    bool accepted = false;
    for (int halve = 0; halve <= kMaxHalvings; ++halve) {
      x_new = x + step * dir;
      f_new = eval(x_new, g_new);
      if (std::isfinite(f_new) && f_new <= f + 1e-4 * step * dg) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      out.x = x;
      out.diag = {iter, gnorm, -f, gnorm <= opts.grad_tol};
      return out;
    }
    check_separation(x_new.norm(), x_new.allFinite() && std::isfinite(f_new));
    if (diverged && diverged(x_new)) {
      throw SeparationDiverged(
          "quasi-Newton fit: iterate strictly separates the labels; the MLE diverges");
    }

    Vector s = x_new - x;
    Vector yv = g_new - g;
    const double sy = s.dot(yv);
    if (sy > 1e-12 * s.norm() * yv.norm()) {
      if (static_cast<int>(s_hist.size()) == m) {
        s_hist.erase(s_hist.begin());
        y_hist.erase(y_hist.begin());
        rho_hist.erase(rho_hist.begin());
      }
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(yv));
      rho_hist.push_back(1.0 / sy);
    }

    const double rc = rel_change(-f_new, -f);
    x.swap(x_new);
    g.swap(g_new);
    f = f_new;
    if (rc <= opts.rel_tol) {
      out.x = x;
      out.diag = {iter + 1, g.lpNorm<Eigen::Infinity>(), -f, true};
      return out;
    }
  }
  throw NotConverged("quasi-Newton fit: max_iter = " + std::to_string(opts.max_iter) +
                     " reached with gradient sup-norm " +
                     std::to_string(g.lpNorm<Eigen::Infinity>()) + " > grad_tol");
}

}  // namespace

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log1pexp(double x) {
  if (x > 0.0) {
    return x + std::log1p(std::exp(-x));
  }
  return std::log1p(std::exp(x));
}

double binary_loglik(const TargetDataset& data, const Vector& theta) {
  if (theta.size() != data.p()) {
    throw DimensionMismatch("binary_loglik: theta has length " + std::to_string(theta.size()) +
                            " but X has " + std::to_string(data.p()) + " columns");
  }
  const Vector eta = data.X * theta;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    ll += (data.y[i] != 0 ? eta[i] : 0.0) - log1pexp(eta[i]);
  }
  return ll;
}

double multinomial_loglik(const SourceDataset& data, const Matrix& B) {
  if (B.rows() != data.p()) {
    throw DimensionMismatch("multinomial_loglik: B has " + std::to_string(B.rows()) +
                            " rows but X has " + std::to_string(data.p()) + " columns");
  }
  if (B.cols() != data.K) {
    throw DimensionMismatch("multinomial_loglik: B has " + std::to_string(B.cols()) +
                            " columns but K = " + std::to_string(data.K));
  }
  const Matrix logits = data.Xs * B;  // N x K, base class logit 0
  double ll = 0.0;
  for (Eigen::Index i = 0; i < data.N(); ++i) {
    const int yi = data.ys[i];
    if (yi < 0 || yi > data.K) {
      throw ParseError("multinomial_loglik: label " + std::to_string(yi) + " at row " +
                       std::to_string(i) + " outside {0,...," + std::to_string(data.K) + "}");
    }
    double mx = 0.0;
    for (Eigen::Index k = 0; k < data.K; ++k) {
      mx = std::max(mx, logits(i, k));
    }
    double sum = std::exp(-mx);  // base class
    for (Eigen::Index k = 0; k < data.K; ++k) {
      sum += std::exp(logits(i, k) - mx);
    }
    const double lse = mx + std::log(sum);
    ll += (yi > 0 ? logits(i, yi - 1) : 0.0) - lse;
  }
  return ll;
}

Matrix multinomial_probs(const Matrix& X, const Matrix& B) {
  if (B.rows() != X.cols()) {
    throw DimensionMismatch("multinomial_probs: B rows != X columns");
  }
  const Eigen::Index N = X.rows(), K = B.cols();
  const Matrix logits = X * B;
  Matrix P(N, K + 1);
  for (Eigen::Index i = 0; i < N; ++i) {
    double mx = 0.0;
    for (Eigen::Index k = 0; k < K; ++k) {
      mx = std::max(mx, logits(i, k));
    }
    double sum = std::exp(-mx);
    P(i, 0) = sum;
    for (Eigen::Index k = 0; k < K; ++k) {
      const double e = std::exp(logits(i, k) - mx);
      P(i, k + 1) = e;
      sum += e;
    }
    P.row(i) /= sum;
  }
  return P;
}

Vector binary_loglik_gradient(const TargetDataset& data, const Vector& theta) {
  if (theta.size() != data.p()) {
    throw DimensionMismatch("binary_loglik_gradient: theta length != feature count");
  }
  const Vector eta = data.X * theta;
  Vector resid(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    resid[i] = static_cast<double>(data.y[i]) - sigmoid(eta[i]);
  }
  return data.X.transpose() * resid;
}

Matrix multinomial_loglik_gradient(const SourceDataset& data, const Matrix& B) {
  Matrix P = multinomial_probs(data.Xs, B);  // N x (K+1)
  Matrix R = P.rightCols(data.K);
  for (Eigen::Index i = 0; i < data.N(); ++i) {
    const int yi = data.ys[i];
    if (yi > 0) {
      R(i, yi - 1) -= 1.0;
    }
  }
  return -(data.Xs.transpose() * R);
}

namespace {

// A strictly separating coefficient vector certifies that the unpenalized
// MLE diverges: the likelihood increases to its supremum along the ray.
bool strictly_separates(const TargetDataset& data, const Vector& theta) {
  const Vector eta = data.X * theta;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    if (data.y[i] == 1 ? !(eta[i] > 0.0) : !(eta[i] < 0.0)) {
      return false;
    }
  }
  return true;
}

bool strictly_separates_multinomial(const SourceDataset& data, const Matrix& B) {
  const Matrix logits = data.Xs * B;
  for (Eigen::Index i = 0; i < data.N(); ++i) {
    const int yi = data.ys[i];
    const double own = yi > 0 ? logits(i, yi - 1) : 0.0;
    if (yi > 0 && !(own > 0.0)) {
      return false;
    }
    for (Eigen::Index k = 0; k < data.K; ++k) {
      if (k + 1 != yi && !(own > logits(i, k))) {
        return false;
      }
    }
  }
  return true;
}

}  // namespace

BinaryFitResult fit_binary_logistic(const TargetDataset& data, const FitOptions& opts,
                                    const Vector* warm_start) {
  data.validate();
  const Eigen::Index n = data.n(), p = data.p();

  Vector theta = (warm_start != nullptr) ? *warm_start : Vector::Zero(p);
  if (theta.size() != p) {
    throw DimensionMismatch("fit_binary_logistic: warm start has wrong length");
  }
  const double ridge = opts.ridge;
  auto penloglik = [&](const Vector& th) {
    return binary_loglik(data, th) - 0.5 * ridge * th.squaredNorm();
  };

  double ll = penloglik(theta);
  Vector eta(n), mu(n), g(p);
  FitDiagnostics diag;
  for (int iter = 0; iter < opts.max_iter; ++iter) {
    eta.noalias() = data.X * theta;
    for (Eigen::Index i = 0; i < n; ++i) {
      mu[i] = sigmoid(eta[i]);
    }
    g.noalias() = data.X.transpose() * (data.y.cast<double>() - mu);
    g -= ridge * theta;
    const double gnorm = g.lpNorm<Eigen::Infinity>();
    if (gnorm <= opts.grad_tol) {
      return {theta, {iter, gnorm, ll, true}};
    }

    Vector w = (mu.array() * (1.0 - mu.array())).matrix();
    Matrix H = data.X.transpose() * w.asDiagonal() * data.X;
    if (ridge > 0.0) {
      H.diagonal().array() += ridge;
    }
    Vector step = H.ldlt().solve(g);
    if (!step.allFinite()) {
      throw SeparationDiverged("fit_binary_logistic: Newton step is non-finite");
    }

    double t = 1.0;
    double ll_new = ll;
    Vector theta_new = theta;
    bool accepted = false;
    for (int halve = 0; halve <= kMaxHalvings; ++halve) {
      theta_new = theta + t * step;
      ll_new = penloglik(theta_new);
      if (std::isfinite(ll_new) && ll_new >= ll) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    check_separation(theta_new.norm(), theta_new.allFinite() && std::isfinite(ll_new));
    if (!accepted) {
      // Step-halving exhausted: the likelihood cannot be improved from here.
      return {theta, {iter, gnorm, ll, gnorm <= opts.grad_tol}};
    }

    const double rc = rel_change(ll_new, ll);
    theta.swap(theta_new);
    ll = ll_new;
    if (ridge == 0.0 && strictly_separates(data, theta)) {
      throw SeparationDiverged(
          "fit_binary_logistic: iterate strictly separates the labels; the MLE diverges");
    }
    if (rc <= opts.rel_tol) {
      eta.noalias() = data.X * theta;
      for (Eigen::Index i = 0; i < n; ++i) {
        mu[i] = sigmoid(eta[i]);
      }
      g.noalias() = data.X.transpose() * (data.y.cast<double>() - mu);
      g -= ridge * theta;
      return {theta, {iter + 1, g.lpNorm<Eigen::Infinity>(), ll, true}};
    }
  }
  throw NotConverged("fit_binary_logistic: max_iter = " + std::to_string(opts.max_iter) +
                     " reached with gradient above tolerance");
}

namespace {

// Shared workspace for the multinomial objective: returns the penalized
// negative log-likelihood and its gradient with respect to vec(B)
// (columns stacked).
struct MultinomialObjective {
  const SourceDataset& data;
  double ridge;
  Matrix logits, P;  // N x K each
  Vector logdenom;   // N

  explicit MultinomialObjective(const SourceDataset& d, double r)
      : data(d), ridge(r), logits(d.N(), d.K), P(d.N(), d.K), logdenom(d.N()) {}

  double operator()(const Vector& bvec, Vector& grad) {
    const Eigen::Index N = data.N(), p = data.p(), K = data.K;
    const Eigen::Map<const Matrix> B(bvec.data(), p, K);
    logits.noalias() = data.Xs * B;

    double nll = 0.5 * ridge * bvec.squaredNorm();
    for (Eigen::Index i = 0; i < N; ++i) {
      double mx = 0.0;
      for (Eigen::Index k = 0; k < K; ++k) {
        mx = std::max(mx, logits(i, k));
      }
      double sum = std::exp(-mx);
      for (Eigen::Index k = 0; k < K; ++k) {
        const double e = std::exp(logits(i, k) - mx);
        P(i, k) = e;
        sum += e;
      }
      const double inv = 1.0 / sum;
      for (Eigen::Index k = 0; k < K; ++k) {
        P(i, k) *= inv;
      }
      logdenom[i] = mx + std::log(sum);
      const int yi = data.ys[i];
      nll += logdenom[i] - (yi > 0 ? logits(i, yi - 1) : 0.0);
      if (yi > 0) {
        P(i, yi - 1) -= 1.0;  // P now holds the per-sample residual
      }
    }
    grad.resize(p * K);
    Eigen::Map<Matrix> G(grad.data(), p, K);
    G.noalias() = data.Xs.transpose() * P;
    G += ridge * B;
    // Restore P to probabilities for Hessian reuse by the Newton path.
    for (Eigen::Index i = 0; i < N; ++i) {
      const int yi = data.ys[i];
      if (yi > 0) {
        P(i, yi - 1) += 1.0;
      }
    }
    return nll;
  }
};

SourceModel fit_multinomial_newton(const SourceDataset& data, const FitOptions& opts,
                                   Vector bvec) {
  const Eigen::Index N = data.N(), p = data.p(), K = data.K;
  const Eigen::Index dim = p * K;
  MultinomialObjective obj(data, opts.ridge);

  Vector grad(dim), step(dim), bvec_new(dim);
  double nll = obj(bvec, grad);
  Matrix H(dim, dim);
  Matrix weighted(N, p);

  for (int iter = 0; iter < opts.max_iter; ++iter) {
    const double gnorm = grad.lpNorm<Eigen::Infinity>();
    if (gnorm <= opts.grad_tol) {
      SourceModel m;
      m.B = Eigen::Map<const Matrix>(bvec.data(), p, K);
      m.diagnostics = {iter, gnorm, -nll, true};
      m.n_source = N;
      return m;
    }

    // Hessian of the negative log-likelihood, block (k,l) = X' diag(w) X
    // with w_i = P_ik (1(k=l) - P_il), assembled from probabilities left in
    // obj.P by the last evaluation.
    for (Eigen::Index k = 0; k < K; ++k) {
      for (Eigen::Index l = k; l < K; ++l) {
        Vector w;
        if (k == l) {
          w = (obj.P.col(k).array() * (1.0 - obj.P.col(k).array())).matrix();
        } else {
          w = (-obj.P.col(k).array() * obj.P.col(l).array()).matrix();
        }
        weighted.noalias() = w.asDiagonal() * data.Xs;
        H.block(k * p, l * p, p, p).noalias() = data.Xs.transpose() * weighted;
        if (l != k) {
          H.block(l * p, k * p, p, p) = H.block(k * p, l * p, p, p).transpose();
        }
      }
    }
    if (opts.ridge > 0.0) {
      H.diagonal().array() += opts.ridge;
    }
    step = H.ldlt().solve(-grad);
    if (!step.allFinite()) {
      throw SeparationDiverged("fit_multinomial_logistic: Newton step is non-finite");
    }

    double t = 1.0;
    double nll_new = nll;
    bool accepted = false;
    Vector grad_new(dim);
    for (int halve = 0; halve <= kMaxHalvings; ++halve) {
      bvec_new = bvec + t * step;
      nll_new = obj(bvec_new, grad_new);
      if (std::isfinite(nll_new) && nll_new <= nll) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    check_separation(bvec_new.norm(), bvec_new.allFinite() && std::isfinite(nll_new));
    if (!accepted) {
      SourceModel m;
      m.B = Eigen::Map<const Matrix>(bvec.data(), p, K);
      m.diagnostics = {iter, gnorm, -nll, gnorm <= opts.grad_tol};
      m.n_source = N;
      return m;
    }

    const double rc = rel_change(-nll_new, -nll);
    bvec.swap(bvec_new);
    grad.swap(grad_new);
    nll = nll_new;
    if (opts.ridge == 0.0 &&
        strictly_separates_multinomial(data, Eigen::Map<const Matrix>(bvec.data(), p, K))) {
      throw SeparationDiverged(
          "fit_multinomial_logistic: iterate strictly separates the classes; the MLE "
          "diverges");
    }
    if (rc <= opts.rel_tol) {
      SourceModel m;
      m.B = Eigen::Map<const Matrix>(bvec.data(), p, K);
      m.diagnostics = {iter + 1, grad.lpNorm<Eigen::Infinity>(), -nll, true};
      m.n_source = N;
      return m;
    }
  }
  throw NotConverged("fit_multinomial_logistic: max_iter = " + std::to_string(opts.max_iter) +
                     " reached with gradient above tolerance");
}

}  // namespace

SourceModel fit_multinomial_logistic(const SourceDataset& data, const FitOptions& opts,
                                     const Matrix* warm_start) {
  data.validate();
  const Eigen::Index p = data.p(), K = data.K;

  Vector bvec = Vector::Zero(p * K);
  if (warm_start != nullptr) {
    if (warm_start->rows() != p || warm_start->cols() != K) {
      throw DimensionMismatch("fit_multinomial_logistic: warm start has wrong shape");
    }
    bvec = Eigen::Map<const Vector>(warm_start->data(), p * K);
  }

  const bool use_newton = opts.solver == Solver::exact_newton ||
                          (opts.solver == Solver::automatic &&
                           p * K <= static_cast<Eigen::Index>(opts.dense_hessian_cap));
  if (use_newton) {
    return fit_multinomial_newton(data, opts, std::move(bvec));
  }

  MultinomialObjective obj(data, opts.ridge);
  std::function<bool(const Vector&)> diverged;
  if (opts.ridge == 0.0) {
    // The certificate costs a full N x K logit pass, so only probe once the
    // coefficients have grown past any plausible interior optimum.
    diverged = [&data, p, K](const Vector& x) {
      return x.norm() > 30.0 &&
             strictly_separates_multinomial(data, Eigen::Map<const Matrix>(x.data(), p, K));
    };
  }
  auto outcome = lbfgs_minimize(
      [&obj](const Vector& x, Vector& g) { return obj(x, g); }, std::move(bvec), opts,
      diverged);
  SourceModel m;
  m.B = Eigen::Map<const Matrix>(outcome.x.data(), p, K);
  m.diagnostics = outcome.diag;
  m.n_source = data.N();
  return m;
}

FisherPreconditioner::FisherPreconditioner(const SourceDataset& data, const Matrix& B_ref,
                                           double ridge, Eigen::Index max_rows) {
  data.validate();
  const Eigen::Index p = data.p(), K = data.K;
  if (B_ref.rows() != p || B_ref.cols() != K) {
    throw DimensionMismatch("FisherPreconditioner: reference coefficient has wrong shape");
  }
  const Eigen::Index M = std::min(data.N(), std::max<Eigen::Index>(max_rows, 1));
  dim_ = p * K;

  const Matrix X = data.Xs.topRows(M);
  const Matrix P = multinomial_probs(X, B_ref).rightCols(K);

  Matrix H(dim_, dim_);
  Matrix weighted(M, p);
  for (Eigen::Index k = 0; k < K; ++k) {
    for (Eigen::Index l = k; l < K; ++l) {
      Vector w;
      if (k == l) {
        w = (P.col(k).array() * (1.0 - P.col(k).array())).matrix();
      } else {
        w = (-P.col(k).array() * P.col(l).array()).matrix();
      }
      weighted.noalias() = w.asDiagonal() * X;
      H.block(k * p, l * p, p, p).noalias() = X.transpose() * weighted;
      if (l != k) {
        H.block(l * p, k * p, p, p) = H.block(k * p, l * p, p, p).transpose();
      }
    }
  }
  // Subsampled blocks estimate M/N of the full-sample curvature.
  H *= static_cast<double>(data.N()) / static_cast<double>(M);
  if (ridge > 0.0) {
    H.diagonal().array() += ridge;
  }
  ldlt_.compute(H);
}

Vector FisherPreconditioner::solve(const Vector& g) const { return ldlt_.solve(g); }

SourceModel fit_multinomial_scoring(const SourceDataset& data, const FitOptions& opts,
                                    const FisherPreconditioner& pre, const Matrix& warm_start) {
  data.validate();
  const Eigen::Index N = data.N(), p = data.p(), K = data.K;
  const Eigen::Index dim = p * K;
  if (!pre.ready() || pre.dim() != dim) {
    throw DimensionMismatch("fit_multinomial_scoring: preconditioner dimension mismatch");
  }
  if (warm_start.rows() != p || warm_start.cols() != K) {
    throw DimensionMismatch("fit_multinomial_scoring: warm start has wrong shape");
  }

  MultinomialObjective obj(data, opts.ridge);
  Vector bvec = Eigen::Map<const Vector>(warm_start.data(), dim);
  Vector grad(dim), grad_new(dim), step(dim), bvec_new(dim);
  double nll = obj(bvec, grad);

  for (int iter = 0; iter < opts.max_iter; ++iter) {
    const double gnorm = grad.lpNorm<Eigen::Infinity>();
    if (gnorm <= opts.grad_tol) {
      SourceModel m;
      m.B = Eigen::Map<const Matrix>(bvec.data(), p, K);
      m.diagnostics = {iter, gnorm, -nll, true};
      m.n_source = N;
      return m;
    }

    step = -pre.solve(grad);
    if (!step.allFinite()) {
      throw SeparationDiverged("fit_multinomial_scoring: preconditioned step is non-finite");
    }

    double t = 1.0;
    double nll_new = nll;
    bool accepted = false;
    for (int halve = 0; halve <= kMaxHalvings; ++halve) {
      bvec_new = bvec + t * step;
      nll_new = obj(bvec_new, grad_new);
      if (std::isfinite(nll_new) && nll_new <= nll) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    check_separation(bvec_new.norm(), bvec_new.allFinite() && std::isfinite(nll_new));
    if (!accepted) {
      throw NotConverged(
          "fit_multinomial_scoring: no descent along the preconditioned direction");
    }

    const double rc = rel_change(-nll_new, -nll);
    bvec.swap(bvec_new);
    grad.swap(grad_new);
    nll = nll_new;
    if (opts.ridge == 0.0 && bvec.norm() > 30.0 &&
        strictly_separates_multinomial(data, Eigen::Map<const Matrix>(bvec.data(), p, K))) {
      throw SeparationDiverged(
          "fit_multinomial_scoring: iterate strictly separates the classes; the MLE "
          "diverges");
    }
    if (rc <= opts.rel_tol) {
      SourceModel m;
      m.B = Eigen::Map<const Matrix>(bvec.data(), p, K);
      m.diagnostics = {iter + 1, grad.lpNorm<Eigen::Infinity>(), -nll, true};
      m.n_source = N;
      return m;
    }
  }
  throw NotConverged("fit_multinomial_scoring: max_iter = " + std::to_string(opts.max_iter) +
                     " reached with gradient above tolerance");
}

}  // namespace tlsuff
