#pragma once

#include <string>
#include <vector>

#include "latformer/errors.hpp"

namespace latformer {

// Dimension sizes (l_1..l_m) of a hypercubic lattice. Cells are vectorized
// row-major: flat index k = ((i_1 * l_2) + i_2) * l_3 + ... (0-based here;
// formulas quoted from offset tables are 1-based and converted centrally in
// shift_vector).
class LatticeShape {
 public:
  explicit LatticeShape(std::vector<int> dims);

  const std::vector<int>& dims() const { return dims_; }
  int ndims() const { return static_cast<int>(dims_.size()); }
  int size() const { return n_; }

  int flatten(const std::vector<int>& idx) const;
  std::vector<int> unflatten(int flat) const;

  bool is_square_2d() const {
    return dims_.size() == 2 && dims_[0] == dims_[1];
  }

  bool operator==(const LatticeShape& o) const { return dims_ == o.dims_; }

 private:
  std::vector<int> dims_;
  int n_ = 1;
};

enum class ScaleDirection { Up, Down };

// Symbolic lattice symmetry action. Primitive variants map onto the shift
// table; Compose holds an ordered list applied in function-composition order:
// compose({a, b}) acts as a(b(x)), so its mask is M_a * M_b.
class LatticeAction {
 public:
  enum class Kind { Identity, Translate, Rotate90, Reflect, Scale, Compose };

  static LatticeAction identity();
  // Cyclic translation; one displacement per dimension, any integers.
  static LatticeAction translate(std::vector<int> delta);
  // Counterclockwise quarter turns on a square 2-D lattice; k in {1,2,3}.
  static LatticeAction rotate90(int quarter_turns = 1);
  // Per-dimension flips (axes[i] == true reverses dimension i).
  static LatticeAction reflect(std::vector<bool> axes);
  // Main-diagonal reflection (transpose) on a square 2-D lattice.
  static LatticeAction reflect_diagonal();
  // factors[i] >= 2 per dimension; Up replicates, Down subsamples.
  static LatticeAction scale(std::vector<int> factors, ScaleDirection dir);
  static LatticeAction compose(std::vector<LatticeAction> actions);

  Kind kind() const { return kind_; }
  bool is_primitive() const { return kind_ != Kind::Compose; }

  const std::vector<int>& delta() const { return ints_; }
  int quarter_turns() const { return ints_[0]; }
  const std::vector<bool>& axes() const { return flags_; }
  bool diagonal() const { return diagonal_; }
  const std::vector<int>& factors() const { return ints_; }
  ScaleDirection direction() const { return dir_; }
  const std::vector<LatticeAction>& children() const { return children_; }

  // Throws InvalidShape / InvalidFactor when the action cannot act on shape.
  void validate(const LatticeShape& shape) const;

  // Compact textual form, e.g. "translate:1,2", "rotate90:2", "reflect:diag",
  // "scale:up:2,3", "rotate90;reflect:v". Parse accepts what to_string emits.
  std::string to_string() const;
  static LatticeAction parse(const std::string& text);

 private:
  LatticeAction() = default;
  Kind kind_ = Kind::Identity;
  std::vector<int> ints_;
  std::vector<bool> flags_;
  bool diagonal_ = false;
  ScaleDirection dir_ = ScaleDirection::Up;
  std::vector<LatticeAction> children_;
};

// Source cell index (0-based, flattened) for every output cell under the
// action: out[k] = in[map[k]]. This is the brute-force permutation oracle's
// core; it manipulates multi-indices directly and never touches mask code.
std::vector<int> action_index_map(const LatticeAction& action,
                                  const LatticeShape& shape);

// g applied to a real tensor stored flat over shape (row-major).
std::vector<double> apply_action(const LatticeAction& action,
                                 const LatticeShape& shape,
                                 const std::vector<double>& tensor);

}  // namespace latformer
