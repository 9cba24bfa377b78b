#include "acclens/expr.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <stdexcept>

#include "acclens/dataset_io.hpp"

namespace acclens {

namespace {

constexpr std::array<std::string_view, 7> kOpNames = {"add", "sub", "mul", "div", "log", "exp", "sqrt"};

double clamp_value(double v) { return std::clamp(v, -kValueCap, kValueCap); }

}  // namespace

int arity(Op op) {
  switch (op) {
    case Op::add:
    case Op::sub:
    case Op::mul:
    case Op::div:
      return 2;
    case Op::log:
    case Op::exp:
    case Op::sqrt:
      return 1;
    case Op::terminal:
    case Op::constant:
      return 0;
  }
  return 0;
}

std::string_view op_name(Op op) {
  const auto i = static_cast<std::size_t>(op);
  return i < kOpNames.size() ? kOpNames[i] : std::string_view(op == Op::terminal ? "terminal" : "constant");
}

std::optional<Op> op_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kOpNames.size(); ++i)
    if (kOpNames[i] == name) return static_cast<Op>(i);
  return std::nullopt;
}

double protected_div(double a, double b) { return std::abs(b) < kDivGuard ? 1.0 : clamp_value(a / b); }
double protected_log(double x) { return std::abs(x) < kLogGuard ? 0.0 : std::log(std::abs(x)); }
double protected_sqrt(double x) { return std::sqrt(std::abs(x)); }
double protected_exp(double x) { return std::min(std::exp(x), kExpCap); }

Expr::Expr(std::vector<Node> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.empty()) throw std::invalid_argument("expression must have at least one node");
  // A prefix sequence is one complete tree iff the open-slot count first hits
  // zero exactly at the last node.
  long open = 1;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (open == 0) throw std::invalid_argument("trailing nodes after a complete expression");
    open += arity(nodes_[i].op) - 1;
    if (nodes_[i].op == Op::constant && !std::isfinite(nodes_[i].value))
      throw std::invalid_argument("non-finite constant");
  }
  if (open != 0) throw std::invalid_argument("expression is missing operands");
}

std::size_t Expr::subtree_end(std::size_t start) const {
  long open = 1;
  std::size_t i = start;
  while (open > 0) {
    open += arity(nodes_[i].op) - 1;
    ++i;
  }
  return i;
}

int Expr::depth() const {
  int max_depth = 0;
  std::vector<int> pending;  // children still expected at each open level
  for (const auto& node : nodes_) {
    const int level = static_cast<int>(pending.size());
    max_depth = std::max(max_depth, level);
    if (!pending.empty()) --pending.back();
    if (arity(node.op) > 0) {
      pending.push_back(arity(node.op));
    } else {
      while (!pending.empty() && pending.back() == 0) pending.pop_back();
    }
  }
  return max_depth;
}

double Expr::evaluate(const StatsVector& s) const {
  std::vector<double> stack;
  stack.reserve(nodes_.size());
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    switch (it->op) {
      case Op::terminal:
        stack.push_back(clamp_value(s[it->stat]));
        break;
      case Op::constant:
        stack.push_back(clamp_value(it->value));
        break;
      case Op::log:
        stack.back() = protected_log(stack.back());
        break;
      case Op::exp:
        stack.back() = protected_exp(stack.back());
        break;
      case Op::sqrt:
        stack.back() = protected_sqrt(stack.back());
        break;
      default: {
        const double a = stack.back();
        stack.pop_back();
        const double b = stack.back();
        double r = 0.0;
        switch (it->op) {
          case Op::add: r = clamp_value(a + b); break;
          case Op::sub: r = clamp_value(a - b); break;
          case Op::mul: r = clamp_value(a * b); break;
          default: r = protected_div(a, b); break;
        }
        stack.back() = r;
      }
    }
  }
  return stack.back();
}

std::vector<Stat> Expr::variables() const {
  std::array<bool, kNumStats> seen{};
  for (const auto& n : nodes_)
    if (n.op == Op::terminal) seen[index_of(n.stat)] = true;
  std::vector<Stat> out;
  for (std::size_t i = 0; i < kNumStats; ++i)
    if (seen[i]) out.push_back(static_cast<Stat>(i));
  return out;
}

bool Expr::uses(Stat s) const {
  return std::any_of(nodes_.begin(), nodes_.end(),
                     [s](const Node& n) { return n.op == Op::terminal && n.stat == s; });
}

std::size_t node_count(const Expr& e) { return e.node_count(); }

Vector evaluate_batch(const Expr& e, const Matrix& stats) {
  using Array = Eigen::ArrayXd;
  const auto nodes = e.nodes();
  const Eigen::Index rows = stats.rows();
  // Reused buffers; the stack never holds more than node_count values.
  thread_local std::vector<Array> pool;
  if (pool.size() < nodes.size()) pool.resize(nodes.size());
  std::size_t top = 0;
  for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
    switch (it->op) {
      case Op::terminal:
        pool[top++] = stats.col(static_cast<Eigen::Index>(index_of(it->stat))).array().max(-kValueCap).min(kValueCap);
        break;
      case Op::constant:
        pool[top++] = Array::Constant(rows, clamp_value(it->value));
        break;
      case Op::log: {
        Array& x = pool[top - 1];
        x = (x.abs() < kLogGuard).select(0.0, x.abs().log());
        break;
      }
      case Op::exp: {
        Array& x = pool[top - 1];
        x = x.exp().min(kExpCap);
        break;
      }
      case Op::sqrt: {
        Array& x = pool[top - 1];
        x = x.abs().sqrt();
        break;
      }
      default: {
        Array& a = pool[top - 1];
        Array& b = pool[top - 2];
        switch (it->op) {
          case Op::add: b = (a + b).max(-kValueCap).min(kValueCap); break;
          case Op::sub: b = (a - b).max(-kValueCap).min(kValueCap); break;
          case Op::mul: b = (a * b).max(-kValueCap).min(kValueCap); break;
          default: b = (b.abs() < kDivGuard).select(1.0, (a / b).max(-kValueCap).min(kValueCap)); break;
        }
        --top;
      }
    }
  }
  return pool[0].matrix();
}

Vector evaluate_batch(const Expr& e, const MetaDataset& meta) { return evaluate_batch(e, meta.stats_matrix()); }

Expr canonical_gpf() {
  using N = Node;
  return Expr({
      N::function(Op::log),
      N::function(Op::div),
      N::function(Op::div),
      N::variable(Stat::sb_trace),
      N::variable(Stat::st_trace),
      N::function(Op::sqrt),
      N::function(Op::mul),
      N::variable(Stat::n_classes),
      N::function(Op::mul),
      N::variable(Stat::feats_corr),
      N::variable(Stat::prototypes_cos_sim),
  });
}

ParseError::ParseError(const std::string& message, std::size_t offset)
    : DataError(message + " at offset " + std::to_string(offset)), offset_(offset) {}

namespace {

struct Token {
  enum Kind { open, close, atom, end } kind;
  std::string_view text;
  std::size_t offset;
};

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  Expr parse() {
    std::vector<Node> nodes;
    parse_into(nodes);
    const Token t = next();
    if (t.kind == Token::close) throw ParseError("unbalanced parentheses: unexpected ')'", t.offset);
    if (t.kind != Token::end) throw ParseError("unexpected trailing input '" + std::string(t.text) + "'", t.offset);
    return Expr(std::move(nodes));
  }

 private:
  Token next() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (pos_ >= text_.size()) return {Token::end, {}, pos_};
    const std::size_t start = pos_;
    if (text_[pos_] == '(') return {Token::open, text_.substr(pos_++, 1), start};
    if (text_[pos_] == ')') return {Token::close, text_.substr(pos_++, 1), start};
    while (pos_ < text_.size() && text_[pos_] != '(' && text_[pos_] != ')' &&
           !std::isspace(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
    return {Token::atom, text_.substr(start, pos_ - start), start};
  }

  Token peek() {
    const std::size_t saved = pos_;
    Token t = next();
    pos_ = saved;
    return t;
  }

  static bool looks_numeric(std::string_view s) {
    const char c = s.front();
    return std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+' || c == '.';
  }

  void parse_into(std::vector<Node>& nodes) {
    const Token t = next();
    switch (t.kind) {
      case Token::end:
        throw ParseError("unbalanced parentheses: unexpected end of input", t.offset);
      case Token::close:
        throw ParseError("unbalanced parentheses: unexpected ')'", t.offset);
      case Token::atom:
        nodes.push_back(parse_atom(t));
        return;
      case Token::open:
        break;
    }
    const Token head = next();
    if (head.kind != Token::atom) throw ParseError("expected operator after '('", head.offset);
    const auto op = op_from_name(head.text);
    if (!op) throw ParseError("unknown operator '" + std::string(head.text) + "'", head.offset);
    nodes.push_back(Node::function(*op));
    const int want = arity(*op);
    for (int i = 0; i < want; ++i) {
      const Token look = peek();
      if (look.kind == Token::close)
        throw ParseError("arity mismatch: '" + std::string(head.text) + "' expects " + std::to_string(want) +
                             " operand(s), got " + std::to_string(i),
                         look.offset);
      parse_into(nodes);
    }
    const Token closing = next();
    if (closing.kind == Token::end)
      throw ParseError("unbalanced parentheses: missing ')'", closing.offset);
    if (closing.kind != Token::close)
      throw ParseError("arity mismatch: '" + std::string(head.text) + "' expects " + std::to_string(want) +
                           " operand(s), got more",
                       closing.offset);
  }

  Node parse_atom(const Token& t) {
    if (auto stat = stat_from_name(t.text)) return Node::variable(*stat);
    if (op_from_name(t.text))
      throw ParseError("operator '" + std::string(t.text) + "' used without parentheses", t.offset);
    if (looks_numeric(t.text)) {
      double v = 0.0;
      const char* first = t.text.data();
      if (*first == '+') ++first;
      auto [ptr, ec] = std::from_chars(first, t.text.data() + t.text.size(), v);
      if (ec == std::errc() && ptr == t.text.data() + t.text.size() && std::isfinite(v)) return Node::literal(v);
    }
    throw ParseError("unknown symbol '" + std::string(t.text) + "'", t.offset);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

void render_into(const Expr& e, std::size_t at, std::string& out) {
  const Node& n = e.nodes()[at];
  if (n.op == Op::terminal) {
    out += name_of(n.stat);
    return;
  }
  if (n.op == Op::constant) {
    out += format_real(n.value);
    return;
  }
  out += '(';
  out += op_name(n.op);
  std::size_t child = at + 1;
  for (int i = 0; i < arity(n.op); ++i) {
    out += ' ';
    render_into(e, child, out);
    child = e.subtree_end(child);
  }
  out += ')';
}

}  // namespace

Expr parse_sexpr(std::string_view text) { return Parser(text).parse(); }

std::string render_sexpr(const Expr& e) {
  std::string out;
  render_into(e, 0, out);
  return out;
}

}  // namespace acclens
