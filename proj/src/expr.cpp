#include "utm/expr.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <numbers>
#include <set>

#include <fmt/format.h>

namespace utm::expr {

namespace {

NodePtr make(Op op) {
  auto n = std::make_shared<Node>();
  n->op = op;
  return n;
}

Expression binary(Op op, const Expression& a, const Expression& b) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->args = {a.ptr(), b.ptr()};
  return Expression(n);
}

const char* fn_name(Fn f) {
  switch (f) {
    case Fn::Exp: return "exp";
    case Fn::Sin: return "sin";
    case Fn::Cos: return "cos";
    case Fn::Sqrt: return "sqrt";
    case Fn::Log: return "log";
    case Fn::Pow: return "pow";
  }
  return "?";
}

bool lookup_fn(std::string_view s, Fn& out) {
  static const std::array<std::pair<std::string_view, Fn>, 6> table{{
      {"exp", Fn::Exp}, {"sin", Fn::Sin}, {"cos", Fn::Cos},
      {"sqrt", Fn::Sqrt}, {"log", Fn::Log}, {"pow", Fn::Pow}}};
  for (const auto& [k, v] : table)
    if (k == s) {
      out = v;
      return true;
    }
  return false;
}

bool is_integer(double v) { return std::isfinite(v) && v == std::nearbyint(v); }

// Returns false when the operation is outside the real domain.
bool apply_pow(double a, double b, double& r) {
  if (a < 0 && !is_integer(b)) return false;
  if (a == 0 && b < 0) return false;
  r = std::pow(a, b);
  return true;
}

bool apply_fn(Fn f, double a, double& r) {
  switch (f) {
    case Fn::Exp: r = std::exp(a); return true;
    case Fn::Sin: r = std::sin(a); return true;
    case Fn::Cos: r = std::cos(a); return true;
    case Fn::Sqrt:
      if (a < 0) return false;
      r = std::sqrt(a);
      return true;
    case Fn::Log:
      if (a <= 0) return false;
      r = std::log(a);
      return true;
    case Fn::Pow: return false;
  }
  return false;
}

// ---------------------------------------------------------------- parser

class Parser {
public:
  explicit Parser(std::string_view s) : s_(s) {}

  Expression run() {
    Expression e = expr();
    skip();
    if (pos_ != s_.size()) throw ParseError(pos_, "expected operator or end of input");
    return e;
  }

private:
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool accept(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Expression expr() {
    Expression lhs = term();
    for (;;) {
      if (accept('+'))
        lhs = binary(Op::Add, lhs, term());
      else if (accept('-'))
        lhs = binary(Op::Sub, lhs, term());
      else
        return lhs;
    }
  }

  Expression term() {
    Expression lhs = unary();
    for (;;) {
      if (accept('*'))
        lhs = binary(Op::Mul, lhs, unary());
      else if (accept('/'))
        lhs = binary(Op::Div, lhs, unary());
      else
        return lhs;
    }
  }

  Expression unary() {
    if (accept('-')) {
      auto n = make(Op::Neg);
      auto m = std::const_pointer_cast<Node>(n);
      m->args = {unary().ptr()};
      return Expression(n);
    }
    return power();
  }

  Expression power() {
    Expression base = primary();
    if (accept('^')) return binary(Op::Pow, base, unary());
    return base;
  }

  Expression primary() {
    skip();
    if (pos_ >= s_.size()) throw ParseError(pos_, "expected number, identifier or '(' but found end of input");
    const char c = s_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    if (c == '(') {
      ++pos_;
      Expression e = expr();
      if (!accept(')')) throw ParseError(pos_, "expected ')'");
      return e;
    }
    throw ParseError(pos_, fmt::format("expected number, identifier or '(' but found '{}'", c));
  }

  Expression number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      std::size_t k = 0;
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_, ++k;
      return k;
    };
    std::size_t nd = digits();
    if (pos_ < s_.size() && s_[pos_] == '.') {
      ++pos_;
      nd += digits();
    }
    if (nd == 0) throw ParseError(start, "expected digits in numeric literal");
    if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
      std::size_t save = pos_++;
      if (pos_ < s_.size() && (s_[pos_] == '+' || s_[pos_] == '-')) ++pos_;
      if (digits() == 0) pos_ = save;  // 'e' belongs to something else
    }
    const std::string text(s_.substr(start, pos_ - start));
    auto n = std::make_shared<Node>();
    n->op = Op::Num;
    n->value = std::strtod(text.c_str(), nullptr);
    return Expression(n);
  }

  Expression identifier() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() &&
           (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
      ++pos_;
    const std::string_view id = s_.substr(start, pos_ - start);
    skip();
    if (pos_ < s_.size() && s_[pos_] == '(') {
      Fn f;
      if (!lookup_fn(id, f)) throw ParseError(start, fmt::format("unknown function '{}'", id));
      ++pos_;
      std::vector<NodePtr> args{expr().ptr()};
      while (accept(',')) args.push_back(expr().ptr());
      if (!accept(')')) throw ParseError(pos_, "expected ')' or ','");
      const std::size_t arity = f == Fn::Pow ? 2 : 1;
      if (args.size() != arity)
        throw ParseError(start, fmt::format("function '{}' takes {} argument{}", id, arity,
                                            arity == 1 ? "" : "s"));
      auto n = std::make_shared<Node>();
      n->op = Op::Call;
      n->fn = f;
      n->args = std::move(args);
      return Expression(n);
    }
    if (id == "pi") return num(std::numbers::pi);
    return var(std::string(id));
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

// ---------------------------------------------------------------- printer

int prec(const Node& n) {
  switch (n.op) {
    case Op::Add:
    case Op::Sub: return 1;
    case Op::Mul:
    case Op::Div: return 2;
    case Op::Neg: return 3;
    case Op::Pow: return 4;
    case Op::Num: return n.value < 0 ? 0 : 5;
    default: return 5;
  }
}

void print_to(const Node& n, std::string& out);

void print_child(const Node& c, int need, std::string& out) {
  const bool paren = prec(c) < need;
  if (paren) out += '(';
  print_to(c, out);
  if (paren) out += ')';
}

void print_to(const Node& n, std::string& out) {
  switch (n.op) {
    case Op::Num:
      out += fmt::format("{}", n.value);
      return;
    case Op::Var:
      out += n.name;
      return;
    case Op::Neg:
      out += '-';
      print_child(*n.args[0], n.args[0]->op == Op::Neg ? 4 : 3, out);
      return;
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::Div: {
      const int p = prec(n);
      print_child(*n.args[0], p, out);
      out += n.op == Op::Add ? "+" : n.op == Op::Sub ? "-" : n.op == Op::Mul ? "*" : "/";
      print_child(*n.args[1], p + 1, out);
      return;
    }
    case Op::Pow:
      print_child(*n.args[0], 5, out);
      out += '^';
      print_child(*n.args[1], 4, out);
      return;
    case Op::Call:
      out += fn_name(n.fn);
      out += '(';
      for (std::size_t i = 0; i < n.args.size(); ++i) {
        if (i) out += ", ";
        print_to(*n.args[i], out);
      }
      out += ')';
      return;
  }
}

// ---------------------------------------------------------------- eval

double eval_node(const Node& n, const Bindings& b) {
  switch (n.op) {
    case Op::Num: return n.value;
    case Op::Var: {
      auto it = b.find(n.name);
      if (it == b.end()) throw EvalError(fmt::format("unbound variable '{}'", n.name));
      return it->second;
    }
    case Op::Neg: return -eval_node(*n.args[0], b);
    case Op::Add: return eval_node(*n.args[0], b) + eval_node(*n.args[1], b);
    case Op::Sub: return eval_node(*n.args[0], b) - eval_node(*n.args[1], b);
    case Op::Mul: return eval_node(*n.args[0], b) * eval_node(*n.args[1], b);
    case Op::Div: {
      const double den = eval_node(*n.args[1], b);
      if (den == 0.0)
        throw EvalError(fmt::format("domain error: division by zero in '{}'",
                                    print(Expression(std::make_shared<Node>(n)))));
      return eval_node(*n.args[0], b) / den;
    }
    case Op::Pow: {
      const double x = eval_node(*n.args[0], b), y = eval_node(*n.args[1], b);
      double r;
      if (!apply_pow(x, y, r))
        throw EvalError(fmt::format("domain error: power outside the real domain in '{}'",
                                    print(Expression(std::make_shared<Node>(n)))));
      return r;
    }
    case Op::Call: {
      if (n.fn == Fn::Pow) {
        const double x = eval_node(*n.args[0], b), y = eval_node(*n.args[1], b);
        double r;
        if (!apply_pow(x, y, r))
          throw EvalError(fmt::format("domain error: power outside the real domain in '{}'",
                                      print(Expression(std::make_shared<Node>(n)))));
        return r;
      }
      double r;
      if (!apply_fn(n.fn, eval_node(*n.args[0], b), r))
        throw EvalError(fmt::format("domain error: {} argument out of range in '{}'", fn_name(n.fn),
                                    print(Expression(std::make_shared<Node>(n)))));
      return r;
    }
  }
  return 0.0;
}

// ---------------------------------------------------------------- derivative

Expression d(const Expression& e, std::string_view v);

Expression d_pow(const Expression& u, const Expression& w, std::string_view v) {
  const Expression du = d(u, v);
  if (!depends_on(w, v)) {
    // w * u^(w-1) * u'
    return mul(mul(w, pow(u, sub(w, num(1)))), du);
  }
  // u^w * (w' log u + w u'/u)
  const Expression dw = d(w, v);
  return mul(pow(u, w), add(mul(dw, call(Fn::Log, u)), div(mul(w, du), u)));
}

Expression d(const Expression& e, std::string_view v) {
  const Node& n = e.node();
  auto arg = [&](std::size_t i) { return Expression(n.args[i]); };
  switch (n.op) {
    case Op::Num: return num(0);
    case Op::Var: return num(n.name == v ? 1 : 0);
    case Op::Neg: return neg(d(arg(0), v));
    case Op::Add: return add(d(arg(0), v), d(arg(1), v));
    case Op::Sub: return sub(d(arg(0), v), d(arg(1), v));
    case Op::Mul:
      return add(mul(d(arg(0), v), arg(1)), mul(arg(0), d(arg(1), v)));
    case Op::Div: {
      const Expression a = arg(0), b = arg(1);
      if (!depends_on(b, v)) return div(d(a, v), b);
      return div(sub(mul(d(a, v), b), mul(a, d(b, v))), mul(b, b));
    }
    case Op::Pow: return d_pow(arg(0), arg(1), v);
    case Op::Call: {
      if (n.fn == Fn::Pow) return d_pow(arg(0), arg(1), v);
      const Expression a = arg(0);
      const Expression da = d(a, v);
      switch (n.fn) {
        case Fn::Exp: return mul(e, da);
        case Fn::Sin: return mul(call(Fn::Cos, a), da);
        case Fn::Cos: return mul(neg(call(Fn::Sin, a)), da);
        case Fn::Sqrt: return div(da, mul(num(2), e));
        case Fn::Log: return div(da, a);
        case Fn::Pow: break;
      }
    }
  }
  return num(0);
}

void collect_vars(const Node& n, std::set<std::string>& out) {
  if (n.op == Op::Var) out.insert(n.name);
  for (const auto& a : n.args) collect_vars(*a, out);
}

}  // namespace

// ---------------------------------------------------------------- public

Expression::Expression() : node_(make(Op::Num)) {}

ParseError::ParseError(std::size_t offset, const std::string& msg)
    : std::runtime_error(fmt::format("syntax error at offset {}: {}", offset, msg)),
      offset_(offset) {}

Expression parse(std::string_view text) { return Parser(text).run(); }

double eval(const Expression& e, const Bindings& b) { return eval_node(e.node(), b); }

Expression differentiate(const Expression& e, std::string_view var) { return d(fold(e), var); }

std::string print(const Expression& e) {
  std::string out;
  print_to(e.node(), out);
  return out;
}

Expression num(double v) {
  auto n = std::make_shared<Node>();
  n->op = Op::Num;
  n->value = v == 0.0 ? 0.0 : v;  // normalise -0
  return Expression(n);
}

Expression var(std::string name) {
  auto n = std::make_shared<Node>();
  n->op = Op::Var;
  n->name = std::move(name);
  return Expression(n);
}

Expression neg(const Expression& a) {
  if (a.is_num()) return num(-a.num());
  if (a.node().op == Op::Neg) return Expression(a.node().args[0]);
  auto n = std::make_shared<Node>();
  n->op = Op::Neg;
  n->args = {a.ptr()};
  return Expression(n);
}

Expression add(const Expression& a, const Expression& b) {
  if (a.is_num() && b.is_num()) return num(a.num() + b.num());
  if (a.is_num(0)) return b;
  if (b.is_num(0)) return a;
  if (b.node().op == Op::Neg) return sub(a, Expression(b.node().args[0]));
  return binary(Op::Add, a, b);
}

Expression sub(const Expression& a, const Expression& b) {
  if (a.is_num() && b.is_num()) return num(a.num() - b.num());
  if (b.is_num(0)) return a;
  if (a.is_num(0)) return neg(b);
  if (b.node().op == Op::Neg) return add(a, Expression(b.node().args[0]));
  return binary(Op::Sub, a, b);
}

Expression mul(const Expression& a, const Expression& b) {
  if (a.is_num() && b.is_num()) return num(a.num() * b.num());
  if (a.is_num(0) || b.is_num(0)) return num(0);
  if (a.is_num(1)) return b;
  if (b.is_num(1)) return a;
  if (a.is_num(-1)) return neg(b);
  if (b.is_num(-1)) return neg(a);
  if (a.node().op == Op::Neg && b.node().op == Op::Neg)
    return mul(Expression(a.node().args[0]), Expression(b.node().args[0]));
  if (b.is_num()) return binary(Op::Mul, b, a);  // constants to the left
  return binary(Op::Mul, a, b);
}

Expression div(const Expression& a, const Expression& b) {
  if (a.is_num() && b.is_num() && b.num() != 0.0) return num(a.num() / b.num());
  if (a.is_num(0) && !b.is_num(0)) return num(0);
  if (b.is_num(1)) return a;
  if (b.is_num(-1)) return neg(a);
  return binary(Op::Div, a, b);
}

Expression pow(const Expression& a, const Expression& b) {
  if (a.is_num() && b.is_num()) {
    double r;
    if (apply_pow(a.num(), b.num(), r) && std::isfinite(r)) return num(r);
  }
  if (b.is_num(1)) return a;
  if (b.is_num(0)) return num(1);
  return binary(Op::Pow, a, b);
}

Expression call(Fn fn, const Expression& a) {
  if (a.is_num()) {
    double r;
    if (apply_fn(fn, a.num(), r) && std::isfinite(r)) return num(r);
  }
  auto n = std::make_shared<Node>();
  n->op = Op::Call;
  n->fn = fn;
  n->args = {a.ptr()};
  return Expression(n);
}

Expression fold(const Expression& e) {
  const Node& n = e.node();
  auto f = [&](std::size_t i) { return fold(Expression(n.args[i])); };
  switch (n.op) {
    case Op::Num:
    case Op::Var: return e;
    case Op::Neg: return neg(f(0));
    case Op::Add: return add(f(0), f(1));
    case Op::Sub: return sub(f(0), f(1));
    case Op::Mul: return mul(f(0), f(1));
    case Op::Div: return div(f(0), f(1));
    case Op::Pow: return pow(f(0), f(1));
    case Op::Call:
      if (n.fn == Fn::Pow) {
        const Expression a = f(0), b = f(1);
        if (a.is_num() && b.is_num()) return pow(a, b);
        auto m = std::make_shared<Node>(n);
        m->args = {a.ptr(), b.ptr()};
        return Expression(m);
      }
      return call(n.fn, f(0));
  }
  return e;
}

Expression substitute(const Expression& e, std::string_view name, const Expression& value) {
  const Node& n = e.node();
  if (n.op == Op::Var) return n.name == name ? value : e;
  if (n.args.empty()) return e;
  auto m = std::make_shared<Node>(n);
  for (auto& a : m->args) a = substitute(Expression(a), name, value).ptr();
  return fold(Expression(m));
}

bool equal(const Expression& a, const Expression& b) {
  const Node& x = a.node();
  const Node& y = b.node();
  if (x.op != y.op || x.args.size() != y.args.size()) return false;
  switch (x.op) {
    case Op::Num:
      if (x.value != y.value) return false;
      break;
    case Op::Var:
      if (x.name != y.name) return false;
      break;
    case Op::Call:
      if (x.fn != y.fn) return false;
      break;
    default: break;
  }
  for (std::size_t i = 0; i < x.args.size(); ++i)
    if (!equal(Expression(x.args[i]), Expression(y.args[i]))) return false;
  return true;
}

bool depends_on(const Expression& e, std::string_view v) {
  const Node& n = e.node();
  if (n.op == Op::Var) return n.name == v;
  return std::any_of(n.args.begin(), n.args.end(),
                     [&](const NodePtr& a) { return depends_on(Expression(a), v); });
}

std::vector<std::string> variables(const Expression& e) {
  std::set<std::string> s;
  collect_vars(e.node(), s);
  return {s.begin(), s.end()};
}

std::size_t node_count(const Expression& e) {
  std::size_t k = 1;
  for (const auto& a : e.node().args) k += node_count(Expression(a));
  return k;
}

// ---------------------------------------------------------------- compiled

Compiled::Compiled(const Expression& e, std::vector<std::string> vars)
    : vars_(std::move(vars)), src_(fold(e)) {
  std::size_t depth = 0;
  auto emit = [&](auto&& self, const NodePtr& np) -> void {
    const Node& n = *np;
    for (const auto& a : n.args) self(self, a);
    Instr in{n.op, n.fn, n.value, -1, -1};
    if (n.op == Op::Var) {
      auto it = std::find(vars_.begin(), vars_.end(), n.name);
      if (it == vars_.end()) throw EvalError(fmt::format("unbound variable '{}'", n.name));
      in.slot = static_cast<int>(it - vars_.begin());
      constant_ = false;
    }
    if (n.op == Op::Div || n.op == Op::Pow || n.op == Op::Call) {
      in.node = static_cast<int>(subexpr_.size());
      subexpr_.emplace_back(np);
    }
    if (n.op == Op::Num || n.op == Op::Var)
      ++depth;
    else
      depth -= n.args.size() - 1;
    max_stack_ = std::max(max_stack_, depth);
    code_.push_back(in);
  };
  emit(emit, src_.ptr());
}

void Compiled::domain_error(const Instr& in, const char* what) const {
  throw EvalError(fmt::format("domain error: {} in '{}'", what, print(subexpr_[in.node])));
}

double Compiled::operator()(std::span<const double> vals) const {
  constexpr std::size_t kSmall = 64;
  std::array<double, kSmall> small{};
  std::vector<double> big;
  double* st = small.data();
  if (max_stack_ > kSmall) {
    big.resize(max_stack_);
    st = big.data();
  }
  std::size_t sp = 0;
  for (const Instr& in : code_) {
    switch (in.op) {
      case Op::Num: st[sp++] = in.value; break;
      case Op::Var: st[sp++] = vals[in.slot]; break;
      case Op::Neg: st[sp - 1] = -st[sp - 1]; break;
      case Op::Add: --sp, st[sp - 1] += st[sp]; break;
      case Op::Sub: --sp, st[sp - 1] -= st[sp]; break;
      case Op::Mul: --sp, st[sp - 1] *= st[sp]; break;
      case Op::Div:
        --sp;
        if (st[sp] == 0.0) domain_error(in, "division by zero");
        st[sp - 1] /= st[sp];
        break;
      case Op::Pow:
        --sp;
        if (!apply_pow(st[sp - 1], st[sp], st[sp - 1])) domain_error(in, "power outside the real domain");
        break;
      case Op::Call:
        if (in.fn == Fn::Pow) {
          --sp;
          if (!apply_pow(st[sp - 1], st[sp], st[sp - 1]))
            domain_error(in, "power outside the real domain");
        } else if (!apply_fn(in.fn, st[sp - 1], st[sp - 1])) {
          domain_error(in, "function argument out of range");
        }
        break;
    }
  }
  return st[0];
}

void Compiled::eval_batch(std::span<const double* const> cols, std::span<const std::size_t> strides,
                          std::size_t n, double* out) const {
  if (n == 0) return;
  std::vector<double> buf(std::max<std::size_t>(max_stack_, 1) * n);
  std::size_t sp = 0;
  auto top = [&](std::size_t k) { return buf.data() + (sp - k) * n; };
  for (const Instr& in : code_) {
    switch (in.op) {
      case Op::Num: {
        double* d = buf.data() + sp * n;
        std::fill(d, d + n, in.value);
        ++sp;
        break;
      }
      case Op::Var: {
        double* d = buf.data() + sp * n;
        const double* s = cols[in.slot];
        if (strides[in.slot] == 0)
          std::fill(d, d + n, s[0]);
        else
          for (std::size_t i = 0; i < n; ++i) d[i] = s[i * strides[in.slot]];
        ++sp;
        break;
      }
      case Op::Neg: {
        double* a = top(1);
        for (std::size_t i = 0; i < n; ++i) a[i] = -a[i];
        break;
      }
      case Op::Add:
      case Op::Sub:
      case Op::Mul:
      case Op::Div:
      case Op::Pow: {
        double* a = top(2);
        const double* b = top(1);
        switch (in.op) {
          case Op::Add: for (std::size_t i = 0; i < n; ++i) a[i] += b[i]; break;
          case Op::Sub: for (std::size_t i = 0; i < n; ++i) a[i] -= b[i]; break;
          case Op::Mul: for (std::size_t i = 0; i < n; ++i) a[i] *= b[i]; break;
          case Op::Div:
            for (std::size_t i = 0; i < n; ++i) {
              if (b[i] == 0.0) domain_error(in, "division by zero");
              a[i] /= b[i];
            }
            break;
          default:
            for (std::size_t i = 0; i < n; ++i)
              if (!apply_pow(a[i], b[i], a[i])) domain_error(in, "power outside the real domain");
        }
        --sp;
        break;
      }
      case Op::Call: {
        if (in.fn == Fn::Pow) {
          double* a = top(2);
          const double* b = top(1);
          for (std::size_t i = 0; i < n; ++i)
            if (!apply_pow(a[i], b[i], a[i])) domain_error(in, "power outside the real domain");
          --sp;
        } else {
          double* a = top(1);
          for (std::size_t i = 0; i < n; ++i)
            if (!apply_fn(in.fn, a[i], a[i])) domain_error(in, "function argument out of range");
        }
        break;
      }
    }
  }
  std::copy(buf.data(), buf.data() + n, out);
}

}  // namespace utm::expr
