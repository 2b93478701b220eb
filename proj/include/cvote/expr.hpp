#pragma once

#include <memory>
#include <string>

namespace cvote::expr {

/// A compiled scalar expression in the variables x and y.
///
/// Grammar: + - * / ^ (right-assoc), unary minus, parentheses, numeric
/// literals, the constants pi and e, and the functions sin, cos, tan, tanh,
/// exp, log, sqrt, abs. Enough to spell the built-in classifier/gradient
/// families ("sin(x)", "x*y", "x^2+y^2-0.5", ...).
class Expression {
public:
    static Expression parse(const std::string& text);

    double operator()(double x, double y = 0.0) const;
    const std::string& text() const { return text_; }

    Expression(const Expression&) = default;
    Expression(Expression&&) = default;
    Expression& operator=(const Expression&) = default;
    Expression& operator=(Expression&&) = default;
    ~Expression() = default;

    struct Node;

private:
    Expression() = default;
    std::shared_ptr<const Node> root_;
    std::string text_;
};

}  // namespace cvote::expr
