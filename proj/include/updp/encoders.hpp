#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <vector>

#include "updp/linalg.hpp"
#include "updp/textkit.hpp"

namespace updp {

/// Grayscale image with values in [0, 1], stored row-major.
class ImageGray {
 public:
  static constexpr std::size_t kMinSide = 8;

  ImageGray() = default;
  /// Throws std::invalid_argument if a side is below 8, the pixel count does
  /// not match, or a value lies outside [0, 1].
  ImageGray(std::size_t height, std::size_t width, std::vector<double> pixels);
  /// Constant image.
  ImageGray(std::size_t height, std::size_t width, double value);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  double at(std::size_t r, std::size_t c) const { return pixels_[r * width_ + c]; }
  const std::vector<double>& pixels() const { return pixels_; }

  bool operator==(const ImageGray&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> pixels_;
};

/// Block means over a grid x grid partition (row-major, length grid^2). Block
/// r covers rows [r*H/grid, (r+1)*H/grid).
Vector block_mean_pool(const ImageGray& image, std::size_t grid);

/// Frozen text/image encoder pair. Outputs are unit-norm features.
class Encoder {
 public:
  virtual ~Encoder() = default;

  virtual std::size_t dim() const = 0;
  virtual FeatureVec encode_text(const SoftPrompt& prompt) const = 0;
  virtual FeatureVec encode_image(const ImageGray& image) const = 0;

  /// Vector-Jacobian product: returns d(v . encode_text(H)) / dH.
  virtual Matrix text_vjp(const SoftPrompt& prompt, const Vector& v) const = 0;
};

/// Linear maps followed by l2 normalization:
///   text:  normalize(W_T * mean of prompt rows)
///   image: normalize(W_I * block_mean_pool(x, g))
class ReferenceEncoder final : public Encoder {
 public:
  /// Weights i.i.d. normal with variance 1/D, drawn from `seed`.
  ReferenceEncoder(std::size_t dim, std::size_t pool_grid, std::uint64_t seed);
  ReferenceEncoder(Matrix text_weights, Matrix image_weights, std::size_t pool_grid, std::uint64_t seed);

  std::size_t dim() const override { return static_cast<std::size_t>(text_weights_.rows()); }
  std::size_t pool_grid() const { return pool_grid_; }
  std::uint64_t seed() const { return seed_; }
  const Matrix& text_weights() const { return text_weights_; }
  const Matrix& image_weights() const { return image_weights_; }

  FeatureVec encode_text(const SoftPrompt& prompt) const override;
  FeatureVec encode_image(const ImageGray& image) const override;
  Matrix text_vjp(const SoftPrompt& prompt, const Vector& v) const override;

  /// Header `D g seed`, then W_T (D x D) and W_I (D x g^2) as row-major
  /// little-endian float32. A header alone regenerates from the seed.
  static ReferenceEncoder read(std::istream& in);
  void write(std::ostream& out) const;

 private:
  Matrix text_weights_;
  Matrix image_weights_;
  std::size_t pool_grid_ = 0;
  std::uint64_t seed_ = 0;
};

/// u.v / (|u||v|) clamped to [-1, 1]. Throws DegenerateInputError on a zero vector.
double cosine(const Vector& u, const Vector& v);

/// 1 - cos(E_T(H), f_img), in [0, 2].
double alignment_loss(const SoftPrompt& prompt, const FeatureVec& image_feature, const Encoder& enc);

/// Exact gradient of alignment_loss with respect to every prompt entry.
Matrix alignment_grad(const SoftPrompt& prompt, const FeatureVec& image_feature, const Encoder& enc);

}  // namespace updp
