#pragma once

// Closed-form scalar expressions in the chart coordinates x1..x3 and the
// fiber coordinates v1..v3, used by manifold and field configurations
// ("1+0.5*sin(2*pi*x1)", "2+cos(2*pi*v1)").
//
// Grammar:
//   expr   := term (('+'|'-') term)*
//   term   := factor (('*'|'/') factor)*
//   factor := ('+'|'-') factor | power
//   power  := atom ('^' factor)?
//   atom   := number | 'pi' | 'x1'..'x3' | 'v1'..'v3' | fname '(' expr ')' | '(' expr ')'

#include "homog/core.hpp"

#include <cctype>
#include <memory>
#include <string>
#include <string_view>

namespace homog {

class Expression {
 public:
  Expression() = default;

  static Expression parse(std::string_view text) {
    Parser p{text, 0};
    Expression e;
    e.root_ = p.expr();
    p.skip_ws();
    if (p.pos != text.size())
      throw Error(ErrorKind::InvalidConfig, "trailing input in expression '" + std::string(text) + "'");
    e.text_ = std::string(text);
    e.uses_fiber_ = p.fiber;
    e.uses_base_ = p.base;
    return e;
  }

  template <int Dim>
  double operator()(const Vec<Dim>& x) const {
    double xs[6] = {0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
    for (int i = 0; i < Dim && i < 3; ++i) xs[i] = x[i];
    return root_->eval(xs);
  }

  template <int Dim>
  double operator()(const Vec<Dim>& x, const Vec<Dim>& v) const {
    double xs[6] = {0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
    for (int i = 0; i < Dim && i < 3; ++i) {
      xs[i] = x[i];
      xs[3 + i] = v[i];
    }
    return root_->eval(xs);
  }

  /// True when the expression mentions a fiber coordinate v1..v3.
  bool uses_fiber() const { return uses_fiber_; }
  /// True when the expression mentions a base coordinate x1..x3.
  bool uses_base() const { return uses_base_; }

  const std::string& text() const { return text_; }

 private:
  struct Node {
    virtual ~Node() = default;
    virtual double eval(const double* x) const = 0;
  };
  using NodePtr = std::shared_ptr<const Node>;

  struct Constant final : Node {
    double value;
    explicit Constant(double v) : value(v) {}
    double eval(const double*) const override { return value; }
  };
  struct Variable final : Node {
    int index;
    explicit Variable(int i) : index(i) {}
    double eval(const double* x) const override { return x[index]; }
  };
  struct Binary final : Node {
    char op;
    NodePtr lhs, rhs;
    Binary(char o, NodePtr l, NodePtr r) : op(o), lhs(std::move(l)), rhs(std::move(r)) {}
    double eval(const double* x) const override {
      const double a = lhs->eval(x), b = rhs->eval(x);
      switch (op) {
        case '+': return a + b;
        case '-': return a - b;
        case '*': return a * b;
        case '/': return a / b;
        default: return std::pow(a, b);
      }
    }
  };
  struct Negate final : Node {
    NodePtr arg;
    explicit Negate(NodePtr a) : arg(std::move(a)) {}
    double eval(const double* x) const override { return -arg->eval(x); }
  };
  struct Call final : Node {
    double (*fn)(double);
    NodePtr arg;
    Call(double (*f)(double), NodePtr a) : fn(f), arg(std::move(a)) {}
    double eval(const double* x) const override { return fn(arg->eval(x)); }
  };

  struct Parser {
    std::string_view s;
    std::size_t pos;
    bool fiber = false;
    bool base = false;

    void skip_ws() {
      while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }
    bool accept(char c) {
      skip_ws();
      if (pos < s.size() && s[pos] == c) {
        ++pos;
        return true;
      }
      return false;
    }
    [[noreturn]] void fail(const std::string& msg) const {
      throw Error(ErrorKind::InvalidConfig,
                  msg + " at position " + std::to_string(pos) + " in '" + std::string(s) + "'");
    }

    NodePtr expr() {
      NodePtr lhs = term();
      for (;;) {
        if (accept('+')) lhs = std::make_shared<Binary>('+', lhs, term());
        else if (accept('-')) lhs = std::make_shared<Binary>('-', lhs, term());
        else return lhs;
      }
    }
    NodePtr term() {
      NodePtr lhs = factor();
      for (;;) {
        if (accept('*')) lhs = std::make_shared<Binary>('*', lhs, factor());
        else if (accept('/')) lhs = std::make_shared<Binary>('/', lhs, factor());
        else return lhs;
      }
    }
    NodePtr factor() {
      if (accept('-')) return std::make_shared<Negate>(factor());
      if (accept('+')) return factor();
      return power();
    }
    NodePtr power() {
      NodePtr base = atom();
      if (accept('^')) return std::make_shared<Binary>('^', base, factor());
      return base;
    }
    NodePtr atom() {
      skip_ws();
      if (pos >= s.size()) fail("unexpected end of expression");
      if (accept('(')) {
        NodePtr e = expr();
        if (!accept(')')) fail("expected ')'");
        return e;
      }
      const char c = s[pos];
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        std::size_t end = pos;
        while (end < s.size() &&
               (std::isdigit(static_cast<unsigned char>(s[end])) || s[end] == '.' || s[end] == 'e' ||
                s[end] == 'E' ||
                ((s[end] == '-' || s[end] == '+') && end > pos && (s[end - 1] == 'e' || s[end - 1] == 'E'))))
          ++end;
        const std::string token(s.substr(pos, end - pos));
        std::size_t used = 0;
        double v = 0.0;
        try {
          v = std::stod(token, &used);
        } catch (const std::exception&) {
          fail("bad number '" + token + "'");
        }
        if (used != token.size()) fail("bad number '" + token + "'");
        pos = end;
        return std::make_shared<Constant>(v);
      }
      if (std::isalpha(static_cast<unsigned char>(c))) {
        std::size_t end = pos;
        while (end < s.size() && std::isalnum(static_cast<unsigned char>(s[end]))) ++end;
        const std::string name(s.substr(pos, end - pos));
        pos = end;
        if (name == "pi") return std::make_shared<Constant>(kPi);
        if (name.size() == 2 && (name[0] == 'x' || name[0] == 'v') && name[1] >= '1' && name[1] <= '3') {
          const int index = name[1] - '1';
          if (name[0] == 'x') {
            base = true;
            return std::make_shared<Variable>(index);
          }
          fiber = true;
          return std::make_shared<Variable>(3 + index);
        }
        double (*fn)(double) = nullptr;
        if (name == "sin") fn = [](double t) { return std::sin(t); };
        else if (name == "cos") fn = [](double t) { return std::cos(t); };
        else if (name == "tan") fn = [](double t) { return std::tan(t); };
        else if (name == "exp") fn = [](double t) { return std::exp(t); };
        else if (name == "log") fn = [](double t) { return std::log(t); };
        else if (name == "sqrt") fn = [](double t) { return std::sqrt(t); };
        else if (name == "abs") fn = [](double t) { return std::abs(t); };
        else fail("unknown identifier '" + name + "'");
        if (!accept('(')) fail("expected '(' after " + name);
        NodePtr arg = expr();
        if (!accept(')')) fail("expected ')'");
        return std::make_shared<Call>(fn, arg);
      }
      fail(std::string("unexpected character '") + c + "'");
    }
  };

  NodePtr root_ = std::make_shared<Constant>(0.0);
  std::string text_ = "0";
  bool uses_fiber_ = false;
  bool uses_base_ = false;
};

}  // namespace homog
