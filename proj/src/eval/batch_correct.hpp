#pragma once

// Control-fit kernel PCA followed by per-batch standardization.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "eval/retrieval.hpp"

namespace cellclip::eval {

// One embedding per (perturbation, batch) well group, with control flags.
struct ScreenEmbeddings {
  EmbeddingTable table;  // ids are perturbation ids, repeated across batches
  std::vector<std::string> batch;
  std::vector<bool> control;

  std::size_t size() const { return table.size(); }
  void push_back(std::string id, std::string batch_id, bool is_control, std::span<const double> v);
};

enum class KernelType { linear, rbf, polynomial };

KernelType parse_kernel(std::string_view s);
std::string_view kernel_name(KernelType k);

struct KernelConfig {
  KernelType type = KernelType::linear;
  double gamma = 0.0;  // rbf and polynomial; 0 means 1 / dim
  int degree = 3;
  double coef0 = 1.0;
  std::size_t components = 0;  // 0 keeps every component above the eigenvalue floor
};

class KernelPca {
 public:
  // Throws Errc::numeric if the centered kernel matrix has no positive
  // eigenvalue. Components with eigenvalue below 1e-9 of the largest are dropped.
  void fit(const Eigen::MatrixXd& x, const KernelConfig& config);
  // Rows of x projected on the retained components. Each component's sign is
  // chosen so that the fit sample with the largest |score| scores positive.
  Eigen::MatrixXd transform(const Eigen::MatrixXd& x) const;

  std::size_t components() const { return static_cast<std::size_t>(coef_.cols()); }
  const Eigen::VectorXd& eigenvalues() const { return lambda_; }

 private:
  Eigen::MatrixXd kernel(const Eigen::MatrixXd& a) const;

  KernelConfig config_;
  double gamma_ = 0.0;
  Eigen::MatrixXd fit_x_;
  Eigen::VectorXd fit_col_mean_;
  double fit_mean_ = 0.0;
  Eigen::MatrixXd coef_;  // m×k, eigenvectors scaled by 1/sqrt(lambda) and sign
  Eigen::VectorXd lambda_;
};

// Fits kernel PCA on all controls, transforms every embedding, then z-scores
// each batch with the mean and population std of that batch's transformed
// controls (a zero std leaves the coordinate unscaled). Throws if any batch
// has fewer than two controls.
ScreenEmbeddings batch_correct(const ScreenEmbeddings& in, const KernelConfig& config);

Eigen::MatrixXd to_matrix(const EmbeddingTable& t);

}  // namespace cellclip::eval
