#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace avec {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);

/// Storage precision. Reference mode keeps full 64-bit values; f32 rounds
/// every operation result to IEEE single precision (storage stays 8-byte).
/// f32 is opt-in and excluded from tolerance-critical checks.
enum class Precision { f64, f32 };

/// Dense tensor handle with shared storage. Copies alias the same values and
/// gradient slot; operations on a Tape produce fresh tensors. Values produced
/// by an operation are treated as immutable afterwards.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double v);
  static Tensor row(std::vector<double> values);  // rank-1

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const;

  std::span<const double> values() const;
  std::span<double> values_mut();
  double operator[](std::size_t i) const;
  double& mut(std::size_t i);
  double at(std::size_t i, std::size_t j) const;  // rank-2 convenience
  double item() const;                            // single-element tensors

  bool requires_grad() const;
  Tensor& set_requires_grad(bool v);
  bool has_grad() const;
  std::span<const double> grad() const;
  void ensure_grad();  // allocate zero gradient if absent
  void zero_grad();    // drop gradient storage
  void accumulate_grad(std::span<const double> g);

  Precision precision() const;
  Tensor& set_precision(Precision p);

  /// Identity of the underlying storage; used for parameter-sharing checks.
  const void* storage_id() const { return impl_.get(); }

 private:
  struct Impl {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;  // empty = absent
    bool requires_grad = false;
    Precision precision = Precision::f64;
  };
  std::shared_ptr<Impl> impl_;
  friend class Tape;
};

/// Records executed operations so the chain rule can be replayed in reverse.
/// One tape per forward pass; backward() may be called once. Construct with
/// recording=false for inference-only evaluation (no nodes are kept).
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  std::size_t node_count() const { return nodes_.size(); }
  bool recording() const { return recording_; }

  /// Seeds d(loss)/d(loss)=1 and replays all recorded operations in reverse,
  /// accumulating gradients into every tensor that requires them.
  void backward(const Tensor& loss);

  // --- arithmetic ---
  Tensor matmul(const Tensor& a, const Tensor& b);     // [m,k]x[k,n]
  Tensor matmul_nt(const Tensor& a, const Tensor& b);  // a * b^T, [m,k]x[n,k]
  Tensor add(const Tensor& a, const Tensor& b);        // same shape
  Tensor sub(const Tensor& a, const Tensor& b);
  Tensor mul(const Tensor& a, const Tensor& b);        // elementwise
  Tensor scale(const Tensor& a, double c);
  Tensor add_bias(const Tensor& x, const Tensor& bias);  // broadcast rank-1 over rows

  // --- elementwise maps ---
  Tensor exp(const Tensor& x);
  Tensor log(const Tensor& x);
  Tensor gelu(const Tensor& x);  // exact erf form

  // --- normalization ---
  /// Max-stabilized softmax along `axis`; slices sum to one.
  Tensor softmax(const Tensor& x, std::size_t axis);
  /// Normalizes over the last axis, then applies gamma * xhat + beta.
  Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                    double eps);
  /// Rows scaled to unit L2 norm; norms below eps are clamped to eps.
  Tensor row_l2_normalize(const Tensor& x, double eps);

  // --- reductions & shaping ---
  Tensor mean_pool(const Tensor& x);  // [tokens,d] -> [d]
  Tensor row_sum(const Tensor& x);    // [n,m] -> [n]
  Tensor sum(const Tensor& x);        // -> [1]
  Tensor reshape(const Tensor& x, Shape shape);
  Tensor concat_rows(std::span<const Tensor> parts);  // stack rank-1/rank-2 rows
  Tensor concat_cols(std::span<const Tensor> parts);  // rank-2, same row count
  Tensor gather_pairs(const Tensor& x,
                      std::span<const std::pair<std::size_t, std::size_t>> idx);
  Tensor diag(const Tensor& x);  // square rank-2 -> rank-1

 private:
  Tensor make_output(Shape shape, std::initializer_list<const Tensor*> inputs);
  void record(std::function<void()> fn);

  std::vector<std::function<void()>> nodes_;
  bool recording_ = true;
  bool replayed_ = false;
};

}  // namespace avec
