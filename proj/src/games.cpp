#include "probs/games.hpp"

#include <sstream>

namespace probs {
namespace {

constexpr std::array<std::array<int, 2>, 4> kDirections{{{0, 1}, {1, 0}, {1, 1}, {1, -1}}};

int run_length(const GameState& s, int row, int col, int dr, int dc, Cell who) {
  int n = 0;
  int r = row + dr;
  int c = col + dc;
  while (r >= 0 && r < s.rows() && c >= 0 && c < s.cols() && s.at(r, c) == who) {
    ++n;
    r += dr;
    c += dc;
  }
  return n;
}

bool completes_line(const GameState& s, int row, int col) {
  const Cell who = s.at(row, col);
  const int need = s.shape().connect;
  for (const auto& [dr, dc] : kDirections) {
    if (1 + run_length(s, row, col, dr, dc, who) + run_length(s, row, col, -dr, -dc, who) >= need) {
      return true;
    }
  }
  return false;
}

char cell_char(Cell c) {
  switch (c) {
    case Cell::kP1: return 'X';
    case Cell::kP2: return 'O';
    default: return '.';
  }
}

}  // namespace

std::string_view variant_name(Variant v) {
  return v == Variant::kConnectFour ? "connect_four" : "connect3_test";
}

Variant parse_variant(std::string_view name) {
  if (name == "connect_four") return Variant::kConnectFour;
  if (name == "connect3_test") return Variant::kConnect3Test;
  throw std::invalid_argument("unknown game variant '" + std::string(name) + "'");
}

std::uint64_t GameState::hash() const {
  // FNV-1a over the occupied cells.
  std::uint64_t h = 1469598103934665603ULL;
  const int n = rows() * cols();
  for (int i = 0; i < n; ++i) {
    const int r = i / cols();
    const int c = i % cols();
    h ^= static_cast<std::uint64_t>(cells_[r * kMaxCols + c]) + 1;
    h *= 1099511628211ULL;
  }
  h ^= static_cast<std::uint64_t>(variant_) << 8;
  h *= 1099511628211ULL;
  return h;
}

GameState new_game(Variant v) {
  GameState s;
  s.variant_ = v;
  return s;
}

std::vector<Action> valid_actions(const GameState& s) {
  std::vector<Action> out;
  if (s.is_terminal()) return out;
  out.reserve(s.cols());
  for (int c = 0; c < s.cols(); ++c) {
    if (s.height(c) < s.rows()) out.push_back(Action{c});
  }
  return out;
}

std::uint32_t valid_mask(const GameState& s) {
  std::uint32_t mask = 0;
  if (s.is_terminal()) return mask;
  for (int c = 0; c < s.cols(); ++c) {
    if (s.height(c) < s.rows()) mask |= 1U << c;
  }
  return mask;
}

StepResult apply_action(const GameState& s, Action a) {
  if (!s.is_valid(a)) {
    throw ContractViolation("invalid action: column " + std::to_string(a.column) + " at ply " +
                            std::to_string(s.ply()));
  }
  StepResult out{s, 0, false};
  GameState& n = out.next_state;
  const int row = n.heights_[a.column]++;
  n.cells_[row * kMaxCols + a.column] = s.to_move_;
  ++n.ply_;
  n.to_move_ = opponent(s.to_move_);
  if (completes_line(n, row, a.column)) {
    n.winner_ = s.to_move_;
    out.reward = 1;
  }
  out.done = n.is_terminal();
  return out;
}

GameState play_moves(Variant v, std::span<const int> columns) {
  GameState s = new_game(v);
  for (int c : columns) s = apply_action(s, Action{c}).next_state;
  return s;
}

Encoding encode(const GameState& s) {
  Encoding e{s.rows(), s.cols(), std::vector<float>(2 * s.rows() * s.cols(), 0.0F)};
  const Player me = s.to_move();
  for (int r = 0; r < s.rows(); ++r) {
    for (int c = 0; c < s.cols(); ++c) {
      const Cell v = s.at(r, c);
      if (v == Cell::kEmpty) continue;
      const int plane = v == me ? 0 : 1;
      e.planes[(plane * s.rows() + r) * s.cols() + c] = 1.0F;
    }
  }
  return e;
}

void encode_channels_last(const GameState& s, std::span<float> out) {
  const int cells = s.rows() * s.cols();
  if (static_cast<int>(out.size()) < 2 * cells) {
    throw ContractViolation("encode_channels_last: output buffer too small");
  }
  const Player me = s.to_move();
  for (int r = 0; r < s.rows(); ++r) {
    for (int c = 0; c < s.cols(); ++c) {
      const Cell v = s.at(r, c);
      const int p = r * s.cols() + c;
      out[2 * p] = v == me ? 1.0F : 0.0F;
      out[2 * p + 1] = (v != Cell::kEmpty && v != me) ? 1.0F : 0.0F;
    }
  }
}

std::string to_text(const GameState& s) {
  std::string out;
  out.reserve((s.cols() + 1) * s.rows() + 16);
  for (int r = s.rows() - 1; r >= 0; --r) {
    for (int c = 0; c < s.cols(); ++c) out.push_back(cell_char(s.at(r, c)));
    out.push_back('\n');
  }
  out += "to_move: ";
  out.push_back(cell_char(s.to_move()));
  out.push_back('\n');
  return out;
}

GameState from_text(std::string_view text, Variant v) {
  GameState s = new_game(v);
  std::istringstream in{std::string(text)};
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  if (static_cast<int>(lines.size()) != s.rows() + 1) {
    throw std::invalid_argument("board text: expected " + std::to_string(s.rows()) +
                                " rows plus a to_move line");
  }
  int p1 = 0;
  int p2 = 0;
  for (int i = 0; i < s.rows(); ++i) {
    const std::string& line = lines[i];
    if (static_cast<int>(line.size()) != s.cols()) {
      throw std::invalid_argument("board text: row " + std::to_string(i) + " has wrong width");
    }
    const int r = s.rows() - 1 - i;
    for (int c = 0; c < s.cols(); ++c) {
      Cell cell = Cell::kEmpty;
      switch (line[c]) {
        case '.': break;
        case 'X': cell = Cell::kP1; ++p1; break;
        case 'O': cell = Cell::kP2; ++p2; break;
        default: throw std::invalid_argument(std::string("board text: bad cell '") + line[c] + "'");
      }
      s.cells_[r * kMaxCols + c] = cell;
    }
  }
  for (int c = 0; c < s.cols(); ++c) {
    int h = 0;
    while (h < s.rows() && s.at(h, c) != Cell::kEmpty) ++h;
    for (int r = h; r < s.rows(); ++r) {
      if (s.at(r, c) != Cell::kEmpty) {
        throw std::invalid_argument("board text: floating stone in column " + std::to_string(c));
      }
    }
    s.heights_[c] = static_cast<std::int8_t>(h);
  }
  const std::string& tm = lines.back();
  if (tm == "to_move: X") {
    s.to_move_ = Cell::kP1;
  } else if (tm == "to_move: O") {
    s.to_move_ = Cell::kP2;
  } else {
    throw std::invalid_argument("board text: bad to_move line '" + tm + "'");
  }
  const Player expected = p1 == p2 ? Cell::kP1 : Cell::kP2;
  if (p1 - p2 < 0 || p1 - p2 > 1 || s.to_move_ != expected) {
    throw std::invalid_argument("board text: stone counts inconsistent with side to move");
  }
  s.ply_ = static_cast<std::int16_t>(p1 + p2);
  for (int r = 0; r < s.rows(); ++r) {
    for (int c = 0; c < s.cols(); ++c) {
      if (s.at(r, c) == Cell::kEmpty || !completes_line(s, r, c)) continue;
      if (s.winner_ != Cell::kEmpty && s.winner_ != s.at(r, c)) {
        throw std::invalid_argument("board text: both players have a line");
      }
      s.winner_ = s.at(r, c);
    }
  }
  if (s.winner_ != Cell::kEmpty && s.winner_ == s.to_move_) {
    throw std::invalid_argument("board text: winner cannot be the side to move");
  }
  return s;
}

GameState color_swapped(const GameState& s) {
  GameState out = s;
  for (auto& c : out.cells_) {
    if (c != Cell::kEmpty) c = opponent(c);
  }
  out.to_move_ = opponent(s.to_move_);
  if (out.winner_ != Cell::kEmpty) out.winner_ = opponent(out.winner_);
  return out;
}

}  // namespace probs
