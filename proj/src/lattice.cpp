#include "latformer/lattice.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace latformer {

LatticeShape::LatticeShape(std::vector<int> dims) : dims_(std::move(dims)) {
  if (dims_.empty()) throw InvalidShape("lattice needs at least one dimension");
  for (int d : dims_) {
    if (d < 1) throw InvalidShape("lattice dimensions must be >= 1");
    n_ *= d;
  }
}

int LatticeShape::flatten(const std::vector<int>& idx) const {
  int flat = 0;
  for (size_t d = 0; d < dims_.size(); ++d) flat = flat * dims_[d] + idx[d];
  return flat;
}

std::vector<int> LatticeShape::unflatten(int flat) const {
  std::vector<int> idx(dims_.size());
  for (size_t d = dims_.size(); d-- > 0;) {
    idx[d] = flat % dims_[d];
    flat /= dims_[d];
  }
  return idx;
}

LatticeAction LatticeAction::identity() {
  return LatticeAction();
}

LatticeAction LatticeAction::translate(std::vector<int> delta) {
  LatticeAction a;
  a.kind_ = Kind::Translate;
  a.ints_ = std::move(delta);
  return a;
}

LatticeAction LatticeAction::rotate90(int quarter_turns) {
  LatticeAction a;
  a.kind_ = Kind::Rotate90;
  a.ints_ = {quarter_turns};
  return a;
}

LatticeAction LatticeAction::reflect(std::vector<bool> axes) {
  LatticeAction a;
  a.kind_ = Kind::Reflect;
  a.flags_ = std::move(axes);
  return a;
}

LatticeAction LatticeAction::reflect_diagonal() {
  LatticeAction a;
  a.kind_ = Kind::Reflect;
  a.diagonal_ = true;
  return a;
}

LatticeAction LatticeAction::scale(std::vector<int> factors,
                                   ScaleDirection dir) {
  LatticeAction a;
  a.kind_ = Kind::Scale;
  a.ints_ = std::move(factors);
  a.dir_ = dir;
  return a;
}

LatticeAction LatticeAction::compose(std::vector<LatticeAction> actions) {
  LatticeAction a;
  a.kind_ = Kind::Compose;
  a.children_ = std::move(actions);
  return a;
}

void LatticeAction::validate(const LatticeShape& shape) const {
  switch (kind_) {
    case Kind::Identity:
      return;
    case Kind::Translate:
      if (static_cast<int>(ints_.size()) != shape.ndims())
        throw InvalidShape("translate: one displacement per dimension required");
      return;
    case Kind::Rotate90:
      if (!shape.is_square_2d())
        throw InvalidShape("rotate90 requires a square 2-D lattice");
      if (ints_[0] < 1 || ints_[0] > 3)
        throw InvalidShape("rotate90: quarter turns must be in {1,2,3}");
      return;
    case Kind::Reflect:
      if (diagonal_) {
        if (!shape.is_square_2d())
          throw InvalidShape("diagonal reflection requires a square 2-D lattice");
      } else if (static_cast<int>(flags_.size()) > shape.ndims()) {
        // missing trailing flags mean "leave that dimension alone"
        throw InvalidShape("reflect: more axis flags than dimensions");
      }
      return;
    case Kind::Scale:
      if (static_cast<int>(ints_.size()) != shape.ndims())
        throw InvalidShape("scale: one factor per dimension required");
      for (int h : ints_)
        if (h < 2) throw InvalidFactor("scale factors must be >= 2");
      return;
    case Kind::Compose:
      for (const auto& c : children_) c.validate(shape);
      return;
  }
}

namespace {

int mod_floor(int a, int m) {
  int r = a % m;
  return r < 0 ? r + m : r;
}

std::vector<int> identity_map(int n) {
  std::vector<int> m(n);
  std::iota(m.begin(), m.end(), 0);
  return m;
}

}  // namespace

std::vector<int> action_index_map(const LatticeAction& action,
                                  const LatticeShape& shape) {
  action.validate(shape);
  const int n = shape.size();
  std::vector<int> map(n);

  switch (action.kind()) {
    case LatticeAction::Kind::Identity:
      return identity_map(n);

    case LatticeAction::Kind::Translate: {
      const auto& delta = action.delta();
      for (int k = 0; k < n; ++k) {
        auto idx = shape.unflatten(k);
        for (size_t d = 0; d < idx.size(); ++d)
          idx[d] = mod_floor(idx[d] - delta[d], shape.dims()[d]);
        map[k] = shape.flatten(idx);
      }
      return map;
    }

    case LatticeAction::Kind::Rotate90: {
      const int l = shape.dims()[0];
      // One counterclockwise quarter turn: out(r,c) = in(c, l-1-r).
      auto turn = [&](const std::vector<int>& src) {
        std::vector<int> out(n);
        for (int r = 0; r < l; ++r)
          for (int c = 0; c < l; ++c)
            out[r * l + c] = src[c * l + (l - 1 - r)];
        return out;
      };
      auto m = identity_map(n);
      for (int t = 0; t < action.quarter_turns(); ++t) m = turn(m);
      return m;
    }

    case LatticeAction::Kind::Reflect: {
      if (action.diagonal()) {
        const int l = shape.dims()[0];
        for (int r = 0; r < l; ++r)
          for (int c = 0; c < l; ++c) map[r * l + c] = c * l + r;
        return map;
      }
      const auto& axes = action.axes();
      for (int k = 0; k < n; ++k) {
        auto idx = shape.unflatten(k);
        for (size_t d = 0; d < idx.size(); ++d)
          if (d < axes.size() && axes[d])
            idx[d] = shape.dims()[d] - 1 - idx[d];
        map[k] = shape.flatten(idx);
      }
      return map;
    }

    case LatticeAction::Kind::Scale: {
      const auto& factors = action.factors();
      for (int k = 0; k < n; ++k) {
        auto idx = shape.unflatten(k);
        for (size_t d = 0; d < idx.size(); ++d) {
          const int h = factors[d];
          const int l = shape.dims()[d];
          if (action.direction() == ScaleDirection::Up)
            idx[d] = idx[d] / h;
          else
            idx[d] = std::min(idx[d] * h, l - 1);
        }
        map[k] = shape.flatten(idx);
      }
      return map;
    }

    case LatticeAction::Kind::Compose: {
      auto total = identity_map(n);
      for (const auto& child : action.children()) {
        auto m = action_index_map(child, shape);
        for (int k = 0; k < n; ++k) total[k] = m[total[k]];
      }
      // children are listed outermost-first: compose({a,b}) = a(b(x)), so the
      // fold above walks a's map first, then b's.
      return total;
    }
  }
  return map;
}

std::vector<double> apply_action(const LatticeAction& action,
                                 const LatticeShape& shape,
                                 const std::vector<double>& tensor) {
  if (static_cast<int>(tensor.size()) != shape.size())
    throw InvalidShape("apply_action: tensor size does not match lattice");
  auto map = action_index_map(action, shape);
  std::vector<double> out(tensor.size());
  for (size_t k = 0; k < out.size(); ++k) out[k] = tensor[map[k]];
  return out;
}

std::string LatticeAction::to_string() const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::Identity:
      return "identity";
    case Kind::Translate: {
      os << "translate:";
      for (size_t i = 0; i < ints_.size(); ++i)
        os << (i ? "," : "") << ints_[i];
      return os.str();
    }
    case Kind::Rotate90:
      os << "rotate90:" << ints_[0];
      return os.str();
    case Kind::Reflect: {
      if (diagonal_) return "reflect:diag";
      os << "reflect:";
      bool first = true;
      for (size_t d = 0; d < flags_.size(); ++d)
        if (flags_[d]) {
          os << (first ? "" : ",") << d;
          first = false;
        }
      if (first) os << "none";
      return os.str();
    }
    case Kind::Scale: {
      os << "scale:" << (dir_ == ScaleDirection::Up ? "up" : "down") << ":";
      for (size_t i = 0; i < ints_.size(); ++i)
        os << (i ? "," : "") << ints_[i];
      return os.str();
    }
    case Kind::Compose: {
      for (size_t i = 0; i < children_.size(); ++i)
        os << (i ? ";" : "") << children_[i].to_string();
      return os.str();
    }
  }
  return "identity";
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

std::vector<int> parse_ints(const std::string& s) {
  std::vector<int> out;
  for (const auto& tok : split(s, ','))
    out.push_back(std::stoi(tok));
  return out;
}

LatticeAction parse_primitive(const std::string& text) {
  auto parts = split(text, ':');
  const std::string& head = parts[0];
  if (head == "identity") return LatticeAction::identity();
  if (head == "translate") {
    if (parts.size() != 2) throw ParseError("translate needs displacements");
    return LatticeAction::translate(parse_ints(parts[1]));
  }
  if (head == "rotate90") {
    int k = parts.size() > 1 ? std::stoi(parts[1]) : 1;
    return LatticeAction::rotate90(k);
  }
  if (head == "reflect") {
    if (parts.size() != 2) throw ParseError("reflect needs axes or 'diag'");
    const std::string& arg = parts[1];
    if (arg == "diag") return LatticeAction::reflect_diagonal();
    if (arg == "ud") return LatticeAction::reflect({true, false});
    if (arg == "lr") return LatticeAction::reflect({false, true});
    std::vector<bool> axes;
    for (int d : parse_ints(arg)) {
      if (d < 0) throw ParseError("reflect: negative axis");
      if (static_cast<size_t>(d) >= axes.size()) axes.resize(d + 1, false);
      axes[d] = true;
    }
    return LatticeAction::reflect(std::move(axes));
  }
  if (head == "scale") {
    if (parts.size() != 3) throw ParseError("scale needs direction and factors");
    ScaleDirection dir;
    if (parts[1] == "up")
      dir = ScaleDirection::Up;
    else if (parts[1] == "down")
      dir = ScaleDirection::Down;
    else
      throw ParseError("scale direction must be 'up' or 'down'");
    return LatticeAction::scale(parse_ints(parts[2]), dir);
  }
  throw ParseError("unknown action '" + text + "'");
}

}  // namespace

LatticeAction LatticeAction::parse(const std::string& text) {
  try {
    auto pieces = split(text, ';');
    if (pieces.size() == 1) return parse_primitive(pieces[0]);
    std::vector<LatticeAction> children;
    children.reserve(pieces.size());
    for (const auto& p : pieces) children.push_back(parse_primitive(p));
    return compose(std::move(children));
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError("cannot parse action '" + text + "': " + e.what());
  }
}

}  // namespace latformer
