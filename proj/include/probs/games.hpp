#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace probs {

enum class Variant : std::uint8_t { kConnectFour, kConnect3Test };

enum class Cell : std::uint8_t { kEmpty = 0, kP1 = 1, kP2 = 2 };

using Player = Cell;

inline constexpr int kMaxRows = 6;
inline constexpr int kMaxCols = 7;
inline constexpr int kMaxCells = kMaxRows * kMaxCols;
inline constexpr int kMaxActions = kMaxCols;

struct GameShape {
  int rows;
  int cols;
  int connect;
};

constexpr GameShape shape_of(Variant v) {
  return v == Variant::kConnectFour ? GameShape{6, 7, 4} : GameShape{4, 4, 3};
}

constexpr Player opponent(Player p) {
  return p == Cell::kP1 ? Cell::kP2 : Cell::kP1;
}

std::string_view variant_name(Variant v);
Variant parse_variant(std::string_view name);

/// Thrown when a caller breaks an operation's precondition (e.g. plays into a
/// full column). Signals a programming error, not a recoverable condition.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Column index of a move.
struct Action {
  int column = 0;
  friend bool operator==(Action, Action) = default;
};

/// Immutable board position plus side to move. Row 0 is the bottom row.
class GameState {
 public:
  GameState() = default;

  Variant variant() const { return variant_; }
  GameShape shape() const { return shape_of(variant_); }
  int rows() const { return shape().rows; }
  int cols() const { return shape().cols; }
  Player to_move() const { return to_move_; }
  int ply() const { return ply_; }

  Cell at(int row, int col) const { return cells_[row * kMaxCols + col]; }
  int height(int col) const { return heights_[col]; }

  /// Player who completed a line, or kEmpty.
  Player winner() const { return winner_; }
  bool is_full() const { return ply_ == rows() * cols(); }
  bool is_terminal() const { return winner_ != Cell::kEmpty || is_full(); }

  bool is_valid(Action a) const {
    return !is_terminal() && a.column >= 0 && a.column < cols() &&
           heights_[a.column] < rows();
  }

  std::uint64_t hash() const;

  friend bool operator==(const GameState&, const GameState&) = default;

 private:
  friend GameState new_game(Variant);
  friend struct StepResult apply_action(const GameState&, Action);
  friend GameState from_text(std::string_view, Variant);
  friend GameState color_swapped(const GameState&);

  std::array<Cell, kMaxCells> cells_{};
  std::array<std::int8_t, kMaxCols> heights_{};
  Variant variant_ = Variant::kConnectFour;
  Player to_move_ = Cell::kP1;
  Player winner_ = Cell::kEmpty;
  std::int16_t ply_ = 0;
};

struct StepResult {
  GameState next_state;
  /// From the perspective of the player who just moved: +1 win, 0 otherwise.
  int reward = 0;
  bool done = false;
};

GameState new_game(Variant v);

/// Non-full columns in ascending order; empty for terminal states.
std::vector<Action> valid_actions(const GameState& s);

/// Bitmask over columns of valid actions.
std::uint32_t valid_mask(const GameState& s);

/// Throws ContractViolation when `a` is not valid in `s`.
StepResult apply_action(const GameState& s, Action a);

/// Replays a sequence of columns from the initial position.
GameState play_moves(Variant v, std::span<const int> columns);

/// Two binary planes from the side to move's perspective: plane 0 holds
/// the mover's stones, plane 1 the opponent's. Layout is [plane][row][col]
/// with row 0 at the bottom.
struct Encoding {
  int rows = 0;
  int cols = 0;
  std::vector<float> planes;

  float at(int plane, int row, int col) const {
    return planes[(plane * rows + row) * cols + col];
  }
  friend bool operator==(const Encoding&, const Encoding&) = default;
};

Encoding encode(const GameState& s);

/// Writes the encoding channels-last ([row][col][plane]), the layout the
/// network input layer consumes. `out` must hold 2 * rows * cols floats.
void encode_channels_last(const GameState& s, std::span<float> out);

/// Rows top to bottom using `.`, `X` (P1), `O` (P2), then `to_move: X|O`.
std::string to_text(const GameState& s);

/// Parses the to_text format. Stones must obey gravity and counts must be
/// consistent with the side to move; win status is recomputed.
GameState from_text(std::string_view text, Variant v);

/// Same position with colors swapped and side to move flipped.
GameState color_swapped(const GameState& s);

}  // namespace probs
