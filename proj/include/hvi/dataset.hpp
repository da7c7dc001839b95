#ifndef HVI_DATASET_HPP
#define HVI_DATASET_HPP

#include <iosfwd>
#include <string>

#include "hvi/common.hpp"

namespace hvi {

/// Immutable observation matrix (one row per observation) with cached
/// sufficient statistics: per-dimension mean and sum of squares. The cache
/// makes per-latent log-joint and gradient evaluations O(d) instead of O(Nd).
class Dataset {
 public:
  explicit Dataset(Mat rows);

  Eigen::Index n() const { return rows_.rows(); }
  Eigen::Index dim() const { return rows_.cols(); }
  const Mat& rows() const { return rows_; }
  Vec row(Eigen::Index i) const { return rows_.row(i).transpose(); }
  const Vec& mean() const { return mean_; }
  /// Per-dimension sum over rows of x^2.
  const Vec& sum_sq() const { return sum_sq_; }

  static Dataset load_csv(const std::string& path);
  void save_csv(const std::string& path) const;

  // Binary dump: magic "HVID", u32 N, u32 d, then N*d little-endian f64
  // in row-major order.
  static Dataset load_binary(const std::string& path);
  void save_binary(const std::string& path) const;

 private:
  Mat rows_;
  Vec mean_;
  Vec sum_sq_;
};

}  // namespace hvi

#endif  // HVI_DATASET_HPP
