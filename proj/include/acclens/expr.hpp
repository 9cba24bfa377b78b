#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "acclens/types.hpp"

namespace acclens {

enum class Op : std::uint8_t { add, sub, mul, div, log, exp, sqrt, terminal, constant };

int arity(Op op);
std::string_view op_name(Op op);
std::optional<Op> op_from_name(std::string_view name);

struct Node {
  Op op = Op::terminal;
  Stat stat = Stat::dim;  // terminal only
  double value = 0.0;     // constant only

  static Node function(Op op) { return Node{op, Stat::dim, 0.0}; }
  static Node variable(Stat s) { return Node{Op::terminal, s, 0.0}; }
  static Node literal(double v) { return Node{Op::constant, Stat::dim, v}; }

  bool operator==(const Node&) const = default;
};

/// Protection thresholds shared by evaluation and its tests.
inline constexpr double kDivGuard = 1e-3;
inline constexpr double kLogGuard = 1e-3;
inline constexpr double kExpCap = 1e30;
inline constexpr double kValueCap = 1e300;
inline constexpr std::size_t kMaxNodes = 64;

double protected_div(double a, double b);
double protected_log(double x);
double protected_sqrt(double x);
double protected_exp(double x);

/// Immutable expression tree stored in prefix order.
class Expr {
 public:
  /// Throws std::invalid_argument unless `nodes` is exactly one well-formed prefix tree.
  explicit Expr(std::vector<Node> nodes);

  static Expr terminal(Stat s) { return Expr({Node::variable(s)}); }

  [[nodiscard]] std::span<const Node> nodes() const { return nodes_; }
  [[nodiscard]] std::size_t node_count() const { return nodes_.size(); }
  [[nodiscard]] int depth() const;

  /// Index one past the subtree rooted at `start`.
  [[nodiscard]] std::size_t subtree_end(std::size_t start) const;

  [[nodiscard]] double evaluate(const StatsVector& s) const;

  /// Statistics referenced anywhere in the tree, each listed once in enum order.
  [[nodiscard]] std::vector<Stat> variables() const;
  [[nodiscard]] bool uses(Stat s) const;

  bool operator==(const Expr&) const = default;

 private:
  std::vector<Node> nodes_;
};

std::size_t node_count(const Expr& e);

/// Evaluates over rows of a records x 19 statistics matrix.
Vector evaluate_batch(const Expr& e, const Matrix& stats);
Vector evaluate_batch(const Expr& e, const MetaDataset& meta);

/// log((sb_trace / st_trace) / sqrt(n_classes * feats_corr * prototypes_cos_sim))
Expr canonical_gpf();

class ParseError : public DataError {
 public:
  ParseError(const std::string& message, std::size_t offset);
  [[nodiscard]] std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

Expr parse_sexpr(std::string_view text);
std::string render_sexpr(const Expr& e);

}  // namespace acclens
