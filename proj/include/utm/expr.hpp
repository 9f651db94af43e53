#ifndef UTM_EXPR_HPP
#define UTM_EXPR_HPP

#include <cstddef>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace utm::expr {

enum class Op { Num, Var, Neg, Add, Sub, Mul, Div, Pow, Call };
enum class Fn { Exp, Sin, Cos, Sqrt, Log, Pow };

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
  Op op = Op::Num;
  double value = 0.0;  // Num
  std::string name;    // Var
  Fn fn = Fn::Exp;     // Call
  std::vector<NodePtr> args;
};

/// Immutable expression tree with value semantics.
class Expression {
public:
  Expression();
  explicit Expression(NodePtr n) : node_(std::move(n)) {}

  const Node& node() const { return *node_; }
  const NodePtr& ptr() const { return node_; }
  bool is_num() const { return node_->op == Op::Num; }
  bool is_num(double v) const { return is_num() && node_->value == v; }
  double num() const { return node_->value; }

private:
  NodePtr node_;
};

using Bindings = std::map<std::string, double, std::less<>>;

class ParseError : public std::runtime_error {
public:
  ParseError(std::size_t offset, const std::string& msg);
  std::size_t offset() const { return offset_; }

private:
  std::size_t offset_;
};

class EvalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

Expression parse(std::string_view text);
double eval(const Expression& e, const Bindings& b);
Expression differentiate(const Expression& e, std::string_view var);
std::string print(const Expression& e);

/// Recursively folds constant subtrees and drops neutral elements.
Expression fold(const Expression& e);
bool equal(const Expression& a, const Expression& b);
bool depends_on(const Expression& e, std::string_view var);
std::vector<std::string> variables(const Expression& e);
std::size_t node_count(const Expression& e);

// Simplifying constructors.
Expression num(double v);
Expression var(std::string name);
Expression neg(const Expression& a);
Expression add(const Expression& a, const Expression& b);
Expression sub(const Expression& a, const Expression& b);
Expression mul(const Expression& a, const Expression& b);
Expression div(const Expression& a, const Expression& b);
Expression pow(const Expression& a, const Expression& b);
Expression call(Fn fn, const Expression& a);
/// Substitutes `value` for every occurrence of `name`.
Expression substitute(const Expression& e, std::string_view name, const Expression& value);

/// Flat stack program over a fixed variable order; much faster than tree walking.
class Compiled {
public:
  Compiled() = default;
  Compiled(const Expression& e, std::vector<std::string> vars);

  double operator()(std::span<const double> vals) const;
  double operator()(double a) const { return (*this)(std::span<const double>(&a, 1)); }
  double operator()(double a, double b) const {
    const double v[2] = {a, b};
    return (*this)(std::span<const double>(v, 2));
  }
  /// Evaluates at n points; cols[k] holds n values of variable k, or a single value when stride is 0.
  void eval_batch(std::span<const double* const> cols, std::span<const std::size_t> strides,
                  std::size_t n, double* out) const;

  bool constant() const { return constant_; }
  const std::vector<std::string>& vars() const { return vars_; }
  const Expression& source() const { return src_; }

private:
  struct Instr {
    Op op;
    Fn fn;
    double value;
    int slot;
    int node;  // index into subexpr_ for diagnostics
  };
  [[noreturn]] void domain_error(const Instr& in, const char* what) const;

  std::vector<Instr> code_;
  std::vector<std::string> vars_;
  std::vector<Expression> subexpr_;
  Expression src_;
  std::size_t max_stack_ = 0;
  bool constant_ = true;
};

}  // namespace utm::expr

#endif  // UTM_EXPR_HPP
