#include "evtrace/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace evtrace {

bool is_registered_loss(std::string_view name) {
  return name == loss_names::kGeneration || name == loss_names::kAttention ||
         name == loss_names::kBagOfLabels || name == loss_names::kDomain;
}

void with_barrier(std::string_view loss_name, std::span<Parameter* const> params) {
  if (!is_registered_loss(loss_name)) {
    throw std::invalid_argument("with_barrier: unregistered loss '" +
                                std::string(loss_name) + "'");
  }
  for (Parameter* p : params) p->barriers.emplace(loss_name);
}

Parameter& ParameterStore::add(std::string name, Tensor value) {
  if (find(name) != nullptr) {
    throw std::invalid_argument("parameter '" + name + "' already exists");
  }
  params_.push_back(std::make_unique<Parameter>(std::move(name), std::move(value)));
  return *params_.back();
}

Parameter* ParameterStore::find(std::string_view name) {
  for (auto& p : params_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

const Parameter* ParameterStore::find(std::string_view name) const {
  for (const auto& p : params_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

std::vector<Tensor> ParameterStore::snapshot() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p->value);
  return out;
}

void ParameterStore::restore(const std::vector<Tensor>& values) {
  if (values.size() != params_.size()) {
    throw std::invalid_argument("restore: parameter count mismatch");
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i].shape() != params_[i]->value.shape()) {
      throw ShapeError("restore: shape mismatch for " + params_[i]->name);
    }
    params_[i]->value = values[i];
  }
}

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kConstant: return "constant";
    case OpKind::kParam: return "param";
    case OpKind::kMatmul: return "matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "elementwise_mul";
    case OpKind::kScale: return "scale";
    case OpKind::kConcat: return "concat";
    case OpKind::kSlice: return "slice";
    case OpKind::kStackRows: return "stack_rows";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kTanh: return "tanh";
    case OpKind::kExp: return "exp";
    case OpKind::kLog: return "log";
    case OpKind::kSoftmax: return "softmax_lastaxis";
    case OpKind::kSumAxis: return "sum_axis";
    case OpKind::kSumAll: return "sum_all";
    case OpKind::kEmbedding: return "embedding_lookup";
    case OpKind::kKlDiv: return "kl_div";
    case OpKind::kGradReverse: return "gradient_reversal";
  }
  return "unknown";
}

const Tensor& Var::value() const {
  if (!valid()) throw std::logic_error("Var: invalid handle");
  return tape->value(*this);
}

int Tape::check(Var v) const {
  if (v.tape != this || v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
    throw std::logic_error("Var does not belong to this tape");
  }
  return v.id;
}

Var record(Tape& tape, OpKind kind, std::vector<int> parents, Tensor value,
           Tensor aux, std::vector<std::size_t> ints, double scalar) {
  tape.nodes_.push_back(Tape::Node{kind, std::move(parents), std::move(value),
                                   std::move(aux), std::move(ints), scalar, nullptr});
  return Var{&tape, static_cast<int>(tape.nodes_.size() - 1)};
}

Var Tape::constant(Tensor value) {
  return record(*this, OpKind::kConstant, {}, std::move(value), {}, {}, 0.0);
}

Var Tape::param(Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) {
    return Var{this, it->second};
  }
  Var v = record(*this, OpKind::kParam, {}, p.value, {}, {}, 0.0);
  nodes_[v.id].param = &p;
  param_nodes_.emplace(&p, v.id);
  return v;
}

Tensor Tape::gradient(Var v) const {
  const int id = check(v);
  if (static_cast<std::size_t>(id) < last_grads_.size() && !last_grads_[id].empty()) {
    return last_grads_[id];
  }
  return Tensor::zeros_like(nodes_[id].value);
}

namespace {

Tape* same_tape(Var a, Var b, std::string_view op) {
  if (!a.valid() || !b.valid() || a.tape != b.tape) {
    throw std::logic_error(std::string(op) + ": operands on different tapes");
  }
  return a.tape;
}

[[noreturn]] void shape_fail(std::string_view op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_string(a) +
                   " and " + shape_string(b));
}

double sigmoid_value(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Accumulate g into grads[id], allocating on first touch.
void accumulate(std::vector<Tensor>& grads, int id, const Tensor& like,
                auto&& fn) {
  Tensor& g = grads[id];
  if (g.empty()) g = Tensor::zeros_like(like);
  fn(g);
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape* t = same_tape(a, b, "matmul");
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  // Normalize to (m x k) * (k x n).
  const std::size_t m = x.rank() == 2 ? x.shape()[0] : 1;
  const std::size_t k = x.rank() == 2 ? x.shape()[1] : x.shape()[0];
  const std::size_t k2 = y.shape()[0];
  const std::size_t n = y.rank() == 2 ? y.shape()[1] : 1;
  if (k != k2 || x.rank() > 2 || y.rank() > 2) shape_fail("matmul", x.shape(), y.shape());
  Shape out_shape;
  if (x.rank() == 2 && y.rank() == 2) out_shape = {m, n};
  else if (x.rank() == 2) out_shape = {m};
  else if (y.rank() == 2) out_shape = {n};
  else out_shape = {1};
  Tensor out(out_shape);
  const double* xp = x.data().data();
  const double* yp = y.data().data();
  double* op = out.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double xv = xp[i * k + p];
      if (xv == 0.0) continue;
      const double* yrow = yp + p * n;
      double* orow = op + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += xv * yrow[j];
    }
  }
  return record(*t, OpKind::kMatmul, {a.id, b.id}, std::move(out), {}, {m, k, n}, 0.0);
}

Var add(Var a, Var b) {
  Tape* t = same_tape(a, b, "add");
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  Tensor out = x;
  if (x.shape() == y.shape()) {
    out.add_inplace(y);
  } else if (x.rank() == 2 && y.rank() == 1 && y.size() == x.cols()) {
    for (std::size_t r = 0; r < x.rows(); ++r) {
      for (std::size_t c = 0; c < x.cols(); ++c) out.at(r, c) += y[c];
    }
  } else {
    shape_fail("add", x.shape(), y.shape());
  }
  return record(*t, OpKind::kAdd, {a.id, b.id}, std::move(out), {}, {}, 0.0);
}

Var sub(Var a, Var b) {
  Tape* t = same_tape(a, b, "sub");
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.shape() != y.shape()) shape_fail("sub", x.shape(), y.shape());
  Tensor out = x;
  out.add_inplace(y, -1.0);
  return record(*t, OpKind::kSub, {a.id, b.id}, std::move(out), {}, {}, 0.0);
}

Var mul(Var a, Var b) {
  Tape* t = same_tape(a, b, "elementwise_mul");
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.shape() != y.shape()) shape_fail("elementwise_mul", x.shape(), y.shape());
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= y[i];
  return record(*t, OpKind::kMul, {a.id, b.id}, std::move(out), {}, {}, 0.0);
}

Var scale(Var a, double factor) {
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= factor;
  return record(*a.tape, OpKind::kScale, {a.id}, std::move(out), {}, {}, factor);
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat: no operands");
  std::vector<double> values;
  std::vector<int> parents;
  for (const Var& p : parts) {
    if (p.tape != parts[0].tape) throw std::logic_error("concat: operands on different tapes");
    const Tensor& v = p.value();
    if (v.rank() != 1) throw ShapeError("concat: operand of shape " + shape_string(v.shape()) + " is not rank 1");
    values.insert(values.end(), v.values().begin(), v.values().end());
    parents.push_back(p.id);
  }
  return record(*parts[0].tape, OpKind::kConcat, std::move(parents),
                Tensor::vector(std::move(values)), {}, {}, 0.0);
}

Var concat(Var a, Var b) {
  const Var parts[] = {a, b};
  return concat(parts);
}

Var slice(Var a, std::size_t offset, std::size_t length) {
  const Tensor& x = a.value();
  if (x.rank() != 1 || length == 0 || offset + length > x.size()) {
    throw ShapeError("slice: [" + std::to_string(offset) + ", +" + std::to_string(length) +
                     ") out of range for " + shape_string(x.shape()));
  }
  std::vector<double> values(x.values().begin() + offset,
                             x.values().begin() + offset + length);
  return record(*a.tape, OpKind::kSlice, {a.id}, Tensor::vector(std::move(values)), {},
                {offset}, 0.0);
}

Var stack_rows(std::span<const Var> rows) {
  if (rows.empty()) throw ShapeError("stack_rows: no operands");
  const std::size_t width = rows[0].value().size();
  std::vector<double> values;
  values.reserve(width * rows.size());
  std::vector<int> parents;
  for (const Var& r : rows) {
    const Tensor& v = r.value();
    if (v.rank() != 1 || v.size() != width) {
      shape_fail("stack_rows", rows[0].value().shape(), v.shape());
    }
    values.insert(values.end(), v.values().begin(), v.values().end());
    parents.push_back(r.id);
  }
  return record(*rows[0].tape, OpKind::kStackRows, std::move(parents),
                Tensor::matrix(rows.size(), width, std::move(values)), {}, {}, 0.0);
}

Var sigmoid(Var a) {
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigmoid_value(out[i]);
  return record(*a.tape, OpKind::kSigmoid, {a.id}, std::move(out), {}, {}, 0.0);
}

Var tanh(Var a) {
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
  return record(*a.tape, OpKind::kTanh, {a.id}, std::move(out), {}, {}, 0.0);
}

Var exp(Var a) {
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(out[i]);
  return record(*a.tape, OpKind::kExp, {a.id}, std::move(out), {}, {}, 0.0);
}

Var log(Var a) {
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!(out[i] > 0.0)) {
      throw DomainError("log: non-positive input " + std::to_string(out[i]) +
                        " at index " + std::to_string(i));
    }
    out[i] = std::log(std::max(out[i], kProbabilityFloor));
  }
  return record(*a.tape, OpKind::kLog, {a.id}, std::move(out), {}, {}, 0.0);
}

Var softmax(Var a) {
  Tensor out = a.value();
  const std::size_t rows = out.rows();
  const std::size_t cols = out.cols();
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = out.data().data() + r * cols;
    const double mx = *std::max_element(row, row + cols);
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      row[c] = std::exp(row[c] - mx);
      total += row[c];
    }
    for (std::size_t c = 0; c < cols; ++c) row[c] /= total;
  }
  return record(*a.tape, OpKind::kSoftmax, {a.id}, std::move(out), {}, {}, 0.0);
}

Var sum_axis(Var a, std::size_t axis) {
  const Tensor& x = a.value();
  if (x.rank() == 1) {
    if (axis != 0) throw ShapeError("sum_axis: axis " + std::to_string(axis) + " invalid for " + shape_string(x.shape()));
    return sum_all(a);
  }
  if (axis > 1) throw ShapeError("sum_axis: axis " + std::to_string(axis) + " invalid for " + shape_string(x.shape()));
  Tensor out(Shape{axis == 0 ? x.cols() : x.rows()});
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) out[axis == 0 ? c : r] += x.at(r, c);
  }
  return record(*a.tape, OpKind::kSumAxis, {a.id}, std::move(out), {}, {axis}, 0.0);
}

Var sum_all(Var a) {
  double total = 0.0;
  for (double v : a.value().values()) total += v;
  return record(*a.tape, OpKind::kSumAll, {a.id}, Tensor::scalar(total), {}, {}, 0.0);
}

Var embedding_lookup(Var table, std::span<const std::size_t> ids) {
  const Tensor& w = table.value();
  if (w.rank() != 2) throw ShapeError("embedding_lookup: table shape " + shape_string(w.shape()) + " is not a matrix");
  if (ids.empty()) throw ShapeError("embedding_lookup: empty id list");
  const std::size_t d = w.cols();
  std::vector<double> values;
  values.reserve(ids.size() * d);
  for (std::size_t id : ids) {
    if (id >= w.rows()) {
      throw ShapeError("embedding_lookup: id " + std::to_string(id) + " out of range for " +
                       shape_string(w.shape()));
    }
    values.insert(values.end(), w.values().begin() + id * d, w.values().begin() + (id + 1) * d);
  }
  return record(*table.tape, OpKind::kEmbedding, {table.id},
                Tensor::matrix(ids.size(), d, std::move(values)), {},
                std::vector<std::size_t>(ids.begin(), ids.end()), 0.0);
}

double kl_divergence(std::span<const double> target, std::span<const double> approx) {
  if (target.size() != approx.size()) {
    throw ShapeError("kl_div: length mismatch " + std::to_string(target.size()) + " vs " +
                     std::to_string(approx.size()));
  }
  double total = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double p = target[i];
    if (p == 0.0) continue;
    total += p * std::log(p / std::max(approx[i], kProbabilityFloor));
  }
  return total;
}

Var kl_div(const Tensor& target, Var approx) {
  const Tensor& q = approx.value();
  if (target.size() != q.size()) {
    throw ShapeError("kl_div: incompatible shapes " + shape_string(target.shape()) + " and " +
                     shape_string(q.shape()));
  }
  for (double p : target.values()) {
    if (p < 0.0 || p > 1.0) throw DomainError("kl_div: target entry outside [0,1]");
  }
  const double value = kl_divergence(target.data(), q.data());
  return record(*approx.tape, OpKind::kKlDiv, {approx.id}, Tensor::scalar(value), target, {},
                0.0);
}

Var gradient_reversal(Var a, double lambda) {
  if (lambda < 0.0) throw DomainError("gradient_reversal: negative lambda");
  return record(*a.tape, OpKind::kGradReverse, {a.id}, a.value(), {}, {}, lambda);
}

void Tape::backward_node(int id, std::vector<Tensor>& grads,
                         const std::vector<char>* mask) const {
  const Node& node = nodes_[id];
  const Tensor& g = grads[id];
  auto wants = [&](int parent) { return mask == nullptr || (*mask)[parent]; };
  auto to = [&](int parent, auto&& fn) {
    if (wants(parent)) accumulate(grads, parent, nodes_[parent].value, fn);
  };

  switch (node.kind) {
    case OpKind::kConstant:
    case OpKind::kParam:
      break;
    case OpKind::kMatmul: {
      const std::size_t m = node.ints[0], k = node.ints[1], n = node.ints[2];
      const int pa = node.parents[0], pb = node.parents[1];
      const double* gp = g.data().data();
      to(pa, [&](Tensor& ga) {
        const double* yp = nodes_[pb].value.data().data();
        double* out = ga.data().data();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            double acc = 0.0;
            const double* yrow = yp + p * n;
            const double* grow = gp + i * n;
            for (std::size_t j = 0; j < n; ++j) acc += grow[j] * yrow[j];
            out[i * k + p] += acc;
          }
      });
      to(pb, [&](Tensor& gb) {
        const double* xp = nodes_[pa].value.data().data();
        double* out = gb.data().data();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            const double xv = xp[i * k + p];
            if (xv == 0.0) continue;
            const double* grow = gp + i * n;
            double* orow = out + p * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += xv * grow[j];
          }
      });
      break;
    }
    case OpKind::kAdd: {
      to(node.parents[0], [&](Tensor& ga) { ga.add_inplace(g); });
      to(node.parents[1], [&](Tensor& gb) {
        if (gb.size() == g.size()) {
          gb.add_inplace(g);
        } else {
          for (std::size_t r = 0; r < g.rows(); ++r)
            for (std::size_t c = 0; c < g.cols(); ++c) gb[c] += g.at(r, c);
        }
      });
      break;
    }
    case OpKind::kSub:
      to(node.parents[0], [&](Tensor& ga) { ga.add_inplace(g); });
      to(node.parents[1], [&](Tensor& gb) { gb.add_inplace(g, -1.0); });
      break;
    case OpKind::kMul: {
      const Tensor& x = nodes_[node.parents[0]].value;
      const Tensor& y = nodes_[node.parents[1]].value;
      to(node.parents[0], [&](Tensor& ga) {
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
      });
      to(node.parents[1], [&](Tensor& gb) {
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * x[i];
      });
      break;
    }
    case OpKind::kScale:
      to(node.parents[0], [&](Tensor& ga) { ga.add_inplace(g, node.scalar); });
      break;
    case OpKind::kConcat: {
      std::size_t offset = 0;
      for (int p : node.parents) {
        const std::size_t len = nodes_[p].value.size();
        to(p, [&](Tensor& gp) {
          for (std::size_t i = 0; i < len; ++i) gp[i] += g[offset + i];
        });
        offset += len;
      }
      break;
    }
    case OpKind::kSlice:
      to(node.parents[0], [&](Tensor& ga) {
        for (std::size_t i = 0; i < g.size(); ++i) ga[node.ints[0] + i] += g[i];
      });
      break;
    case OpKind::kStackRows: {
      const std::size_t width = g.cols();
      for (std::size_t r = 0; r < node.parents.size(); ++r) {
        to(node.parents[r], [&](Tensor& gp) {
          for (std::size_t c = 0; c < width; ++c) gp[c] += g.at(r, c);
        });
      }
      break;
    }
    case OpKind::kSigmoid:
      to(node.parents[0], [&](Tensor& ga) {
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double s = node.value[i];
          ga[i] += g[i] * s * (1.0 - s);
        }
      });
      break;
    case OpKind::kTanh:
      to(node.parents[0], [&](Tensor& ga) {
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double y = node.value[i];
          ga[i] += g[i] * (1.0 - y * y);
        }
      });
      break;
    case OpKind::kExp:
      to(node.parents[0], [&](Tensor& ga) {
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * node.value[i];
      });
      break;
    case OpKind::kLog: {
      const Tensor& x = nodes_[node.parents[0]].value;
      to(node.parents[0], [&](Tensor& ga) {
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (x[i] >= kProbabilityFloor) ga[i] += g[i] / x[i];
        }
      });
      break;
    }
    case OpKind::kSoftmax:
      to(node.parents[0], [&](Tensor& ga) {
        const std::size_t cols = g.cols();
        for (std::size_t r = 0; r < g.rows(); ++r) {
          double dot = 0.0;
          for (std::size_t c = 0; c < cols; ++c) dot += g[r * cols + c] * node.value[r * cols + c];
          for (std::size_t c = 0; c < cols; ++c) {
            const double y = node.value[r * cols + c];
            ga[r * cols + c] += y * (g[r * cols + c] - dot);
          }
        }
      });
      break;
    case OpKind::kSumAxis: {
      const std::size_t axis = node.ints[0];
      to(node.parents[0], [&](Tensor& ga) {
        for (std::size_t r = 0; r < ga.rows(); ++r)
          for (std::size_t c = 0; c < ga.cols(); ++c) ga.at(r, c) += g[axis == 0 ? c : r];
      });
      break;
    }
    case OpKind::kSumAll:
      to(node.parents[0], [&](Tensor& ga) {
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0];
      });
      break;
    case OpKind::kEmbedding:
      to(node.parents[0], [&](Tensor& ga) {
        const std::size_t d = ga.cols();
        for (std::size_t r = 0; r < node.ints.size(); ++r) {
          const std::size_t id = node.ints[r];
          for (std::size_t c = 0; c < d; ++c) ga.at(id, c) += g.at(r, c);
        }
      });
      break;
    case OpKind::kKlDiv: {
      const Tensor& q = nodes_[node.parents[0]].value;
      to(node.parents[0], [&](Tensor& ga) {
        for (std::size_t i = 0; i < q.size(); ++i) {
          const double p = node.aux[i];
          if (p == 0.0 || q[i] < kProbabilityFloor) continue;
          ga[i] -= g[0] * p / q[i];
        }
      });
      break;
    }
    case OpKind::kGradReverse:
      to(node.parents[0], [&](Tensor& ga) { ga.add_inplace(g, -node.scalar); });
      break;
  }
}

void Tape::propagate(std::vector<Tensor>& grads, const std::vector<char>* mask) const {
  for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
    if (grads[id].empty()) continue;
    if (mask != nullptr && !(*mask)[id]) continue;
    backward_node(id, grads, mask);
  }
}

void Tape::backward(Var loss) {
  const LossTerm term{"", loss, 1.0};
  backward(std::span<const LossTerm>(&term, 1));
}

void Tape::backward(std::span<const LossTerm> losses) {
  if (losses.empty()) throw std::invalid_argument("backward: no loss terms");
  for (const auto& term : losses) {
    const int id = check(term.node);
    if (!nodes_[id].value.is_scalar()) {
      throw ShapeError("backward: loss '" + term.name + "' is not a scalar but " +
                       shape_string(nodes_[id].value.shape()));
    }
  }

  auto seed = [&](std::vector<Tensor>& grads, auto&& include) {
    for (const auto& term : losses) {
      if (!include(term)) continue;
      accumulate(grads, term.node.id, nodes_[term.node.id].value,
                 [&](Tensor& g) { g[0] += term.weight; });
    }
  };

  // Parameters barred for at least one of the supplied losses get their
  // gradient from a separate pass restricted to their descendants.
  // Key: names of the losses still allowed to reach the parameter.
  std::map<std::vector<std::string>, std::vector<int>> barred_groups;
  std::vector<char> barred(nodes_.size(), 0);
  for (const auto& [param, id] : param_nodes_) {
    bool any = false;
    std::vector<std::string> allowed;
    for (const auto& term : losses) {
      if (param->barred_for(term.name)) any = true;
      else allowed.push_back(term.name);
    }
    if (!any) continue;
    barred[id] = 1;
    std::sort(allowed.begin(), allowed.end());
    allowed.erase(std::unique(allowed.begin(), allowed.end()), allowed.end());
    barred_groups[allowed].push_back(id);
  }

  auto flush = [&](const std::vector<Tensor>& grads, auto&& select) {
    for (const auto& [param, id] : param_nodes_) {
      if (!select(id) || grads[id].empty() || !param->trainable) continue;
      nodes_[id].param->grad.add_inplace(grads[id]);
    }
  };

  std::vector<Tensor> grads(nodes_.size());
  seed(grads, [](const LossTerm&) { return true; });
  propagate(grads, nullptr);
  flush(grads, [&](int id) { return !barred[id]; });
  last_grads_ = std::move(grads);

  for (const auto& [allowed, ids] : barred_groups) {
    if (allowed.empty()) continue;
    std::vector<char> mask(nodes_.size(), 0);
    for (int id : ids) mask[id] = 1;
    for (std::size_t id = 0; id < nodes_.size(); ++id) {
      for (int p : nodes_[id].parents) {
        if (mask[p]) {
          mask[id] = 1;
          break;
        }
      }
    }
    std::vector<Tensor> partial(nodes_.size());
    seed(partial, [&](const LossTerm& term) {
      return std::binary_search(allowed.begin(), allowed.end(), term.name);
    });
    propagate(partial, &mask);
    flush(partial, [&](int id) {
      return std::find(ids.begin(), ids.end(), id) != ids.end();
    });
  }
}

}  // namespace evtrace
