#include "updp/encoders.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

#include "updp/errors.hpp"
#include "updp/rng.hpp"

namespace updp {
namespace {

Matrix gaussian(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
  std::normal_distribution<double> normal(0.0, stddev);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = normal(rng);
  }
  return m;
}

FeatureVec normalized(const Vector& z, const char* what) {
  const double n = z.norm();
  if (!std::isfinite(n)) throw DegenerateInputError(std::string(what) + ": non-finite vector before normalization");
  if (!(n > 0.0)) {
    throw DegenerateInputError(std::string(what) + ": zero vector before normalization");
  }
  return z / n;
}

void write_matrix(std::ostream& out, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(m(i, j)));
      char buf[4];
      for (int k = 0; k < 4; ++k) buf[k] = static_cast<char>((bits >> (8 * k)) & 0xFF);
      out.write(buf, 4);
    }
  }
}

Matrix read_matrix(std::istream& in, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      unsigned char buf[4];
      if (!in.read(reinterpret_cast<char*>(buf), 4)) throw ParseError(0, "encoder weights: truncated payload");
      std::uint32_t bits = 0;
      for (int k = 0; k < 4; ++k) bits |= static_cast<std::uint32_t>(buf[k]) << (8 * k);
      m(i, j) = static_cast<double>(std::bit_cast<float>(bits));
    }
  }
  return m;
}

}  // namespace

ImageGray::ImageGray(std::size_t height, std::size_t width, std::vector<double> pixels)
    : height_(height), width_(width), pixels_(std::move(pixels)) {
  if (height_ < kMinSide || width_ < kMinSide) {
    throw std::invalid_argument("image sides must be at least 8 pixels (got " + std::to_string(height_) +
                                "x" + std::to_string(width_) + ")");
  }
  if (pixels_.size() != height_ * width_) {
    throw std::invalid_argument("image has " + std::to_string(pixels_.size()) + " values, expected " +
                                std::to_string(height_ * width_));
  }
  for (std::size_t i = 0; i < pixels_.size(); ++i) {
    if (!(pixels_[i] >= 0.0 && pixels_[i] <= 1.0)) {
      throw std::invalid_argument("pixel " + std::to_string(i) + " value " + std::to_string(pixels_[i]) +
                                  " outside [0,1]");
    }
  }
}

ImageGray::ImageGray(std::size_t height, std::size_t width, double value)
    : ImageGray(height, width, std::vector<double>(height * width, value)) {}

Vector block_mean_pool(const ImageGray& image, std::size_t grid) {
  if (grid < 1 || image.height() < grid || image.width() < grid) {
    throw std::invalid_argument("image smaller than the pooling grid");
  }
  Vector out(static_cast<Eigen::Index>(grid * grid));
  for (std::size_t br = 0; br < grid; ++br) {
    const std::size_t r0 = br * image.height() / grid;
    const std::size_t r1 = (br + 1) * image.height() / grid;
    for (std::size_t bc = 0; bc < grid; ++bc) {
      const std::size_t c0 = bc * image.width() / grid;
      const std::size_t c1 = (bc + 1) * image.width() / grid;
      double sum = 0.0;
      for (std::size_t r = r0; r < r1; ++r) {
        for (std::size_t c = c0; c < c1; ++c) sum += image.at(r, c);
      }
      out(static_cast<Eigen::Index>(br * grid + bc)) = sum / static_cast<double>((r1 - r0) * (c1 - c0));
    }
  }
  return out;
}

ReferenceEncoder::ReferenceEncoder(std::size_t dim, std::size_t pool_grid, std::uint64_t seed)
    : pool_grid_(pool_grid), seed_(seed) {
  if (dim < 2) throw std::invalid_argument("encoder dimension must be at least 2");
  if (pool_grid < 2) throw std::invalid_argument("pool grid must be at least 2");
  Rng rng(seed);
  const double stddev = 1.0 / std::sqrt(static_cast<double>(dim));
  text_weights_ = gaussian(dim, dim, stddev, rng);
  image_weights_ = gaussian(dim, pool_grid * pool_grid, stddev, rng);
}

ReferenceEncoder::ReferenceEncoder(Matrix text_weights, Matrix image_weights, std::size_t pool_grid,
                                   std::uint64_t seed)
    : text_weights_(std::move(text_weights)),
      image_weights_(std::move(image_weights)),
      pool_grid_(pool_grid),
      seed_(seed) {
  if (pool_grid_ < 2) throw std::invalid_argument("pool grid must be at least 2");
  if (text_weights_.rows() < 2 || text_weights_.rows() != text_weights_.cols()) {
    throw std::invalid_argument("text weights must be a square D x D matrix with D >= 2");
  }
  if (image_weights_.rows() != text_weights_.rows() ||
      image_weights_.cols() != static_cast<Eigen::Index>(pool_grid_ * pool_grid_)) {
    throw std::invalid_argument("image weights must be D x g^2");
  }
  if (!text_weights_.allFinite() || !image_weights_.allFinite()) {
    throw std::invalid_argument("encoder weights must be finite");
  }
}

FeatureVec ReferenceEncoder::encode_text(const SoftPrompt& prompt) const {
  if (prompt.dim() != dim()) {
    throw std::invalid_argument("prompt has " + std::to_string(prompt.dim()) + " columns, encoder expects " +
                                std::to_string(dim()));
  }
  const Vector pooled = prompt.values.colwise().mean().transpose();
  return normalized(text_weights_ * pooled, "encode_text");
}

FeatureVec ReferenceEncoder::encode_image(const ImageGray& image) const {
  return normalized(image_weights_ * block_mean_pool(image, pool_grid_), "encode_image");
}

Matrix ReferenceEncoder::text_vjp(const SoftPrompt& prompt, const Vector& v) const {
  if (prompt.dim() != dim() || v.size() != text_weights_.rows()) {
    throw std::invalid_argument("text_vjp: shape mismatch");
  }
  const Vector pooled = prompt.values.colwise().mean().transpose();
  const Vector z = text_weights_ * pooled;
  const double norm = z.norm();
  if (!std::isfinite(norm)) throw DegenerateInputError("encode_text: non-finite vector before normalization");
  if (!(norm > 0.0)) throw DegenerateInputError("encode_text: zero vector before normalization");
  const Vector f = z / norm;
  // d normalize(z) / dz = (I - f f^T) / |z|
  const Vector dz = (v - f * f.dot(v)) / norm;
  const Vector dpooled = text_weights_.transpose() * dz;
  const auto rows = prompt.values.rows();
  Matrix grad(rows, prompt.values.cols());
  grad.rowwise() = (dpooled / static_cast<double>(rows)).transpose();
  return grad;
}

ReferenceEncoder ReferenceEncoder::read(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw ParseError(1, "encoder weights: missing header");
  std::istringstream hs(header);
  std::size_t dim = 0;
  std::size_t grid = 0;
  std::uint64_t seed = 0;
  std::string extra;
  if (!(hs >> dim >> grid >> seed) || (hs >> extra)) {
    throw ParseError(1, "encoder weights: header must be 'D g seed'");
  }
  if (in.peek() == std::char_traits<char>::eof()) return ReferenceEncoder(dim, grid, seed);
  Matrix wt = read_matrix(in, dim, dim);
  Matrix wi = read_matrix(in, dim, grid * grid);
  if (in.peek() != std::char_traits<char>::eof()) throw ParseError(0, "encoder weights: trailing bytes");
  return ReferenceEncoder(std::move(wt), std::move(wi), grid, seed);
}

void ReferenceEncoder::write(std::ostream& out) const {
  out << dim() << ' ' << pool_grid_ << ' ' << seed_ << '\n';
  write_matrix(out, text_weights_);
  write_matrix(out, image_weights_);
}

double cosine(const Vector& u, const Vector& v) {
  if (u.size() != v.size()) throw std::invalid_argument("cosine: dimension mismatch");
  const double nu = u.norm();
  const double nv = v.norm();
  if (!(nu > 0.0) || !(nv > 0.0)) throw DegenerateInputError("cosine: zero-norm input");
  return std::clamp(u.dot(v) / (nu * nv), -1.0, 1.0);
}

double alignment_loss(const SoftPrompt& prompt, const FeatureVec& image_feature, const Encoder& enc) {
  return 1.0 - cosine(enc.encode_text(prompt), image_feature);
}

Matrix alignment_grad(const SoftPrompt& prompt, const FeatureVec& image_feature, const Encoder& enc) {
  const FeatureVec f = enc.encode_text(prompt);
  const double ng = image_feature.norm();
  if (!(ng > 0.0)) throw DegenerateInputError("alignment_grad: zero image feature");
  const Vector g = image_feature / ng;
  // L = 1 - f.g for unit f; the normalization Jacobian inside text_vjp removes
  // the component along f, so -g is a valid upstream gradient.
  return enc.text_vjp(prompt, -g);
}

}  // namespace updp
