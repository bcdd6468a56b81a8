#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "rezero/error.hpp"
#include "rezero/rng.hpp"

namespace rezero {

using Index = Eigen::Index;
using Shape = std::vector<Index>;
using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using NodeId = std::size_t;
inline constexpr NodeId kNoNode = std::numeric_limits<NodeId>::max();

class Graph;

Index shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);
void check_shape(const Shape& shape);

namespace init {
struct Zeros {};
struct Ones {};
struct Constant {
  double value;
};
struct Normal {
  double mean;
  double stddev;
  SeededRng* rng;
};
struct Uniform {
  double lo;
  double hi;
  SeededRng* rng;
};
}  // namespace init

using Init = std::variant<init::Zeros, init::Ones, init::Constant, init::Normal, init::Uniform>;

/// Dense row-major array of doubles. The values are immutable once created
/// and shared between copies; a tensor may additionally carry a handle to the
/// graph node that produced it.
class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, Vector data);

  static Tensor create(const Shape& shape, const Init& how);
  static Tensor zeros(const Shape& shape) { return create(shape, init::Zeros{}); }
  static Tensor ones(const Shape& shape) { return create(shape, init::Ones{}); }
  static Tensor constant(const Shape& shape, double c) { return create(shape, init::Constant{c}); }
  static Tensor scalar(double v) { return constant({1}, v); }
  static Tensor from_matrix(const Eigen::Ref<const RowMatrix>& m);

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index dim(Index axis) const { return shape_.at(static_cast<std::size_t>(axis)); }
  Index size() const { return data_->size(); }
  bool is_scalar() const { return size() == 1; }

  const Vector& data() const { return *data_; }
  double operator[](Index i) const { return (*data_)[i]; }
  double item() const;

  /// Row-major view of a rank-2 tensor.
  Eigen::Map<const RowMatrix> matrix() const;

  Graph* graph() const { return graph_; }
  NodeId node() const { return node_; }
  bool on_graph() const { return graph_ != nullptr; }
  /// Same values, no graph handle.
  Tensor detached() const;

  std::shared_ptr<const Vector> shared_data() const { return data_; }

 private:
  friend class Graph;

  Shape shape_;
  std::shared_ptr<const Vector> data_;
  Graph* graph_ = nullptr;
  NodeId node_ = kNoNode;
};

enum class ParamGroup { Standard, ResidualWeight };

/// Trainable tensor plus its gradient. The group tag decides which learning
/// rate the optimizer applies and never changes after construction.
class Parameter {
 public:
  Parameter(std::string name, Tensor value, ParamGroup group = ParamGroup::Standard);

  const std::string& name() const { return name_; }
  ParamGroup group() const { return group_; }
  const Tensor& value() const { return value_; }
  const Shape& shape() const { return value_.shape(); }
  const Vector& grad() const { return grad_; }
  Vector& grad() { return grad_; }

  void set_value(Tensor value);
  void set_value(const Vector& data) { set_value(Tensor(value_.shape(), data)); }
  void zero_grad() { grad_.setZero(); }

 private:
  std::string name_;
  ParamGroup group_;
  Tensor value_;
  Vector grad_;
};

enum class OpKind {
  Variable,
  Constant,
  Parameter,
  MatMul,
  Add,
  Sub,
  Mul,
  Scale,
  AddScalar,
  Relu,
  Gelu,
  Sigmoid,
  Exp,
  Log,
  Softmax,
  Sum,
  Mean,
  Var,
  Transpose,
  Reshape,
  SliceCols,
  ConcatCols,
  AddRow,
  MulRow,
  NormalizeRows,
  CausalMask,
  GatherRows,
  CrossEntropy,
};

/// Receives the gradient contributions of one node's backward rule.
class GradSink {
 public:
  GradSink(Graph& graph, const std::vector<NodeId>& inputs) : graph_(graph), inputs_(inputs) {}

  bool wants(std::size_t k) const;
  void add(std::size_t k, const Vector& contribution);

 private:
  Graph& graph_;
  const std::vector<NodeId>& inputs_;
};

/// Append-only tape of operations (define-by-run). Nodes are stored in
/// creation order, which is also a topological order, so backward is a
/// single reverse sweep. A graph must outlive every tensor that points at it.
class Graph {
 public:
  using Backward = std::function<void(const Vector& grad_out, GradSink& sink)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Leaf whose gradient is wanted (model inputs for Jacobians).
  Tensor variable(const Tensor& value);
  Tensor constant(const Tensor& value);
  /// Registers a parameter once; later calls return the same node.
  Tensor parameter(Parameter& p);

  Tensor record(OpKind kind, Tensor value, const std::vector<Tensor>& inputs, Backward backward);

  /// Reverse sweep from a scalar loss. Afterwards every parameter registered
  /// on this graph holds d(loss)/d(value) in its grad field.
  void backward(const Tensor& loss);
  /// Reverse sweep seeded with an arbitrary cotangent of `output`.
  void backward(const Tensor& output, const Tensor& cotangent);

  /// Gradient of the last sweep with respect to `t` (zeros if unreached).
  Tensor gradient(const Tensor& t) const;

  std::size_t size() const { return nodes_.size(); }
  OpKind kind(NodeId id) const { return nodes_.at(id).kind; }
  const std::vector<NodeId>& inputs(NodeId id) const { return nodes_.at(id).inputs; }
  std::vector<Parameter*> parameters() const;
  /// Nodes whose backward rule ran during the last sweep, in visit order.
  const std::vector<NodeId>& last_visit_order() const { return visited_; }

 private:
  friend class GradSink;

  struct Node {
    OpKind kind;
    std::vector<NodeId> inputs;
    Backward backward;
    Index size = 0;
    bool requires_grad = false;
    Parameter* param = nullptr;
  };

  Tensor attach(Tensor value, NodeId id);
  NodeId adopt(const Tensor& t);
  void sweep(NodeId start, const Vector& seed);
  void accumulate(NodeId id, const Vector& contribution);

  std::vector<Node> nodes_;
  std::vector<Vector> grads_;
  std::vector<NodeId> visited_;
  std::vector<std::pair<Parameter*, NodeId>> params_;
  std::unordered_map<const Parameter*, NodeId> param_index_;
};

/// Tensor for `p` on graph `g`, or the bare value when there is no graph.
Tensor bind(Parameter& p, Graph* g);

}  // namespace rezero
