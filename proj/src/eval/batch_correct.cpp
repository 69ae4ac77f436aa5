#include "eval/batch_correct.hpp"

#include <cmath>
#include <map>

#include <Eigen/Eigenvalues>

#include "util/error.hpp"

namespace cellclip::eval {

void ScreenEmbeddings::push_back(std::string id, std::string batch_id, bool is_control,
                                 std::span<const double> v) {
  table.push_back(std::move(id), v);
  batch.push_back(std::move(batch_id));
  control.push_back(is_control);
}

KernelType parse_kernel(std::string_view s) {
  if (s == "linear") return KernelType::linear;
  if (s == "rbf") return KernelType::rbf;
  if (s == "polynomial" || s == "poly") return KernelType::polynomial;
  fail(Errc::invalid_argument, "unknown kernel '{}' (linear, rbf, polynomial)", s);
}

std::string_view kernel_name(KernelType k) {
  switch (k) {
    case KernelType::linear: return "linear";
    case KernelType::rbf: return "rbf";
    case KernelType::polynomial: return "polynomial";
  }
  return "linear";
}

Eigen::MatrixXd to_matrix(const EmbeddingTable& t) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(t.size()), static_cast<Eigen::Index>(t.dim));
  for (std::size_t i = 0; i < t.size(); ++i)
    for (std::size_t j = 0; j < t.dim; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = t.values[i * t.dim + j];
  return m;
}

Eigen::MatrixXd KernelPca::kernel(const Eigen::MatrixXd& a) const {
  Eigen::MatrixXd dot = a * fit_x_.transpose();
  switch (config_.type) {
    case KernelType::linear:
      return dot;
    case KernelType::polynomial:
      return ((gamma_ * dot).array() + config_.coef0).pow(config_.degree).matrix();
    case KernelType::rbf: {
      const Eigen::VectorXd an = a.rowwise().squaredNorm();
      const Eigen::VectorXd bn = fit_x_.rowwise().squaredNorm();
      Eigen::MatrixXd d2 = (-2.0 * dot).colwise() + an;
      d2.rowwise() += bn.transpose();
      return (-gamma_ * d2.array().max(0.0)).exp().matrix();
    }
  }
  return dot;
}

void KernelPca::fit(const Eigen::MatrixXd& x, const KernelConfig& config) {
  if (x.rows() < 2) fail(Errc::invalid_argument, "kernel PCA needs at least two fit samples");
  config_ = config;
  gamma_ = config.gamma > 0.0 ? config.gamma : 1.0 / static_cast<double>(x.cols());
  fit_x_ = x;
  const Eigen::MatrixXd k = kernel(x);
  fit_col_mean_ = k.colwise().mean().transpose();
  fit_mean_ = k.mean();
  Eigen::MatrixXd kc = k;
  kc.rowwise() -= fit_col_mean_.transpose();
  kc.colwise() -= fit_col_mean_;
  kc.array() += fit_mean_;
  kc = 0.5 * (kc + kc.transpose());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(kc);
  if (eig.info() != Eigen::Success) fail(Errc::numeric, "kernel PCA eigendecomposition failed");
  const Eigen::VectorXd& values = eig.eigenvalues();  // ascending
  const double top = values.size() ? values(values.size() - 1) : 0.0;
  if (!(top > 0.0)) fail(Errc::numeric, "kernel matrix of the controls is singular");

  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = values.size() - 1; i >= 0; --i) {
    if (values(i) <= 1e-9 * top) break;
    keep.push_back(i);
    if (config.components && keep.size() == config.components) break;
  }
  coef_.resize(x.rows(), static_cast<Eigen::Index>(keep.size()));
  lambda_.resize(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c) {
    const auto col = static_cast<Eigen::Index>(c);
    lambda_(col) = values(keep[c]);
    coef_.col(col) = eig.eigenvectors().col(keep[c]) / std::sqrt(values(keep[c]));
  }
  // Sign convention on the fit samples' own scores.
  const Eigen::MatrixXd scores = kc * coef_;
  for (Eigen::Index c = 0; c < coef_.cols(); ++c) {
    Eigen::Index arg = 0;
    for (Eigen::Index r = 1; r < scores.rows(); ++r)
      if (std::abs(scores(r, c)) > std::abs(scores(arg, c))) arg = r;
    if (scores(arg, c) < 0.0) coef_.col(c) *= -1.0;
  }
}

Eigen::MatrixXd KernelPca::transform(const Eigen::MatrixXd& x) const {
  if (x.cols() != fit_x_.cols()) fail(Errc::shape, "kernel PCA fit on width {}, got {}", fit_x_.cols(), x.cols());
  Eigen::MatrixXd k = kernel(x);
  const Eigen::VectorXd row_mean = k.rowwise().mean();
  k.rowwise() -= fit_col_mean_.transpose();
  k.colwise() -= row_mean;
  k.array() += fit_mean_;
  return k * coef_;
}

ScreenEmbeddings batch_correct(const ScreenEmbeddings& in, const KernelConfig& config) {
  const Eigen::MatrixXd all = to_matrix(in.table);
  std::vector<Eigen::Index> controls;
  std::map<std::string, std::vector<Eigen::Index>> batch_controls;
  std::map<std::string, std::size_t> batch_members;
  for (std::size_t i = 0; i < in.size(); ++i) {
    ++batch_members[in.batch[i]];
    if (in.control[i]) {
      controls.push_back(static_cast<Eigen::Index>(i));
      batch_controls[in.batch[i]].push_back(static_cast<Eigen::Index>(i));
    }
  }
  for (const auto& [batch, n] : batch_members) {
    const auto it = batch_controls.find(batch);
    const std::size_t have = it == batch_controls.end() ? 0 : it->second.size();
    if (have < 2) fail(Errc::validation, "batch '{}' has {} controls, batch correction needs at least 2", batch, have);
  }
  Eigen::MatrixXd fit(static_cast<Eigen::Index>(controls.size()), all.cols());
  for (std::size_t r = 0; r < controls.size(); ++r) fit.row(static_cast<Eigen::Index>(r)) = all.row(controls[r]);

  KernelPca pca;
  pca.fit(fit, config);
  Eigen::MatrixXd z = pca.transform(all);

  for (const auto& [batch, rows] : batch_controls) {
    Eigen::MatrixXd c(static_cast<Eigen::Index>(rows.size()), z.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) c.row(static_cast<Eigen::Index>(r)) = z.row(rows[r]);
    const Eigen::RowVectorXd mean = c.colwise().mean();
    Eigen::RowVectorXd sd = ((c.rowwise() - mean).array().square().colwise().mean()).sqrt().matrix();
    for (Eigen::Index j = 0; j < sd.size(); ++j)
      if (!(sd(j) > 1e-12)) sd(j) = 1.0;
    for (std::size_t i = 0; i < in.size(); ++i) {
      if (in.batch[i] != batch) continue;
      const auto r = static_cast<Eigen::Index>(i);
      z.row(r) = ((z.row(r) - mean).array() / sd.array()).matrix();
    }
  }

  ScreenEmbeddings out;
  out.batch = in.batch;
  out.control = in.control;
  out.table.ids = in.table.ids;
  out.table.dim = static_cast<std::size_t>(z.cols());
  out.table.values.resize(in.size() * out.table.dim);
  for (std::size_t i = 0; i < in.size(); ++i)
    for (std::size_t j = 0; j < out.table.dim; ++j)
      out.table.values[i * out.table.dim + j] = z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  for (double v : out.table.values)
    if (!std::isfinite(v)) fail(Errc::numeric, "batch correction produced a non-finite value");
  return out;
}

}  // namespace cellclip::eval
