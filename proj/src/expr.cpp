#include "cvote/expr.hpp"

#include <cctype>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace cvote::expr {

struct Expression::Node {
    enum class Kind { Constant, VarX, VarY, Unary, Binary };
    Kind kind = Kind::Constant;
    double constant = 0.0;
    char op = 0;  // for Binary: + - * / ^ ; for Unary: '-'
    double (*fn)(double) = nullptr;
    std::shared_ptr<const Node> lhs, rhs;

    double eval(double x, double y) const {
        switch (kind) {
            case Kind::Constant: return constant;
            case Kind::VarX: return x;
            case Kind::VarY: return y;
            case Kind::Unary:
                return fn ? fn(lhs->eval(x, y)) : -lhs->eval(x, y);
            case Kind::Binary: {
                const double a = lhs->eval(x, y);
                const double b = rhs->eval(x, y);
                switch (op) {
                    case '+': return a + b;
                    case '-': return a - b;
                    case '*': return a * b;
                    case '/': return a / b;
                    case '^': return std::pow(a, b);
                }
                return 0.0;
            }
        }
        return 0.0;
    }
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using Node = Expression::Node;

struct Parser {
    const std::string& text;
    std::size_t pos = 0;

    explicit Parser(const std::string& t) : text(t) {}

    void skip_ws() {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    }

    bool eat(char c) {
        skip_ws();
        if (pos < text.size() && text[pos] == c) {
            ++pos;
            return true;
        }
        return false;
    }

    [[noreturn]] void fail(const std::string& what) {
        throw std::invalid_argument("expression error at position " + std::to_string(pos) +
                                    " in '" + text + "': " + what);
    }

    NodePtr make_const(double v) {
        auto n = std::make_shared<Node>();
        n->kind = Node::Kind::Constant;
        n->constant = v;
        return n;
    }

    NodePtr make_binary(char op, NodePtr a, NodePtr b) {
        auto n = std::make_shared<Node>();
        n->kind = Node::Kind::Binary;
        n->op = op;
        n->lhs = std::move(a);
        n->rhs = std::move(b);
        return n;
    }

    NodePtr parse_expression() {
        NodePtr node = parse_term();
        for (;;) {
            skip_ws();
            if (eat('+')) node = make_binary('+', node, parse_term());
            else if (eat('-')) node = make_binary('-', node, parse_term());
            else return node;
        }
    }

    NodePtr parse_term() {
        NodePtr node = parse_power();
        for (;;) {
            skip_ws();
            if (eat('*')) node = make_binary('*', node, parse_power());
            else if (eat('/')) node = make_binary('/', node, parse_power());
            else return node;
        }
    }

    NodePtr parse_power() {
        NodePtr base = parse_unary();
        skip_ws();
        if (eat('^')) return make_binary('^', base, parse_power());  // right-assoc
        return base;
    }

    NodePtr parse_unary() {
        skip_ws();
        if (eat('-')) {
            auto n = std::make_shared<Node>();
            n->kind = Node::Kind::Unary;
            n->lhs = parse_unary();
            return n;
        }
        return parse_primary();
    }

    NodePtr parse_primary() {
        skip_ws();
        if (pos >= text.size()) fail("unexpected end of input");
        const char c = text[pos];
        if (c == '(') {
            ++pos;
            NodePtr inner = parse_expression();
            if (!eat(')')) fail("expected ')'");
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            char* end = nullptr;
            const double v = std::strtod(text.c_str() + pos, &end);
            if (end == text.c_str() + pos) fail("bad number");
            pos = static_cast<std::size_t>(end - text.c_str());
            return make_const(v);
        }
        if (std::isalpha(static_cast<unsigned char>(c))) {
            std::size_t start = pos;
            while (pos < text.size() &&
                   (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_')) {
                ++pos;
            }
            const std::string word = text.substr(start, pos - start);
            if (word == "x") {
                auto n = std::make_shared<Node>();
                n->kind = Node::Kind::VarX;
                return n;
            }
            if (word == "y") {
                auto n = std::make_shared<Node>();
                n->kind = Node::Kind::VarY;
                return n;
            }
            if (word == "pi") return make_const(M_PI);
            if (word == "e") return make_const(M_E);
            static const std::pair<const char*, double (*)(double)> functions[] = {
                {"sin", std::sin},   {"cos", std::cos}, {"tan", std::tan},
                {"tanh", std::tanh}, {"exp", std::exp}, {"log", std::log},
                {"sqrt", std::sqrt}, {"abs", std::fabs},
            };
            for (const auto& [name, fn] : functions) {
                if (word == name) {
                    if (!eat('(')) fail("expected '(' after " + word);
                    NodePtr arg = parse_expression();
                    if (!eat(')')) fail("expected ')'");
                    auto n = std::make_shared<Node>();
                    n->kind = Node::Kind::Unary;
                    n->fn = fn;
                    n->lhs = std::move(arg);
                    return n;
                }
            }
            fail("unknown identifier '" + word + "'");
        }
        fail(std::string("unexpected character '") + c + "'");
    }
};

}  // namespace

Expression Expression::parse(const std::string& text) {
    Parser p(text);
    Expression e;
    e.root_ = p.parse_expression();
    p.skip_ws();
    if (p.pos != text.size()) p.fail("trailing characters");
    e.text_ = text;
    return e;
}

double Expression::operator()(double x, double y) const { return root_->eval(x, y); }

}  // namespace cvote::expr
