// Test-only Connect-N board with naive full-board line scanning. Independent
// of the library's incremental win detection.
#pragma once

#include <optional>
#include <random>
#include <vector>

namespace probs::oracle {

struct BruteBoard {
  int rows;
  int cols;
  int connect;
  std::vector<std::vector<int>> grid;  // grid[row][col], row 0 at bottom; 0 empty, 1/2 players
  int to_move = 1;

  BruteBoard(int r, int c, int k) : rows(r), cols(c), connect(k), grid(r, std::vector<int>(c, 0)) {}

  std::optional<int> drop_row(int col) const {
    for (int r = 0; r < rows; ++r) {
      if (grid[r][col] == 0) return r;
    }
    return std::nullopt;
  }

  void play(int col) {
    grid[*drop_row(col)][col] = to_move;
    to_move = 3 - to_move;
  }

  void undo(int col) {
    for (int r = rows - 1; r >= 0; --r) {
      if (grid[r][col] != 0) {
        grid[r][col] = 0;
        break;
      }
    }
    to_move = 3 - to_move;
  }

  bool has_line(int who) const {
    const int dirs[4][2] = {{0, 1}, {1, 0}, {1, 1}, {1, -1}};
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        for (const auto& d : dirs) {
          int n = 0;
          for (int k = 0; k < connect; ++k) {
            const int rr = r + d[0] * k;
            const int cc = c + d[1] * k;
            if (rr < 0 || rr >= rows || cc < 0 || cc >= cols || grid[rr][cc] != who) break;
            ++n;
          }
          if (n == connect) return true;
        }
      }
    }
    return false;
  }

  bool full() const {
    for (int c = 0; c < cols; ++c) {
      if (grid[rows - 1][c] == 0) return false;
    }
    return true;
  }
};

/// Depth-first search for a full-board move sequence in which nobody ever
/// completes a line: a drawn game. Returns the columns played.
inline std::vector<int> find_drawn_filling(int rows, int cols, int connect, unsigned seed) {
  BruteBoard b(rows, cols, connect);
  std::vector<int> moves;
  std::mt19937 rng(seed);
  struct Frame {
    std::vector<int> order;
    std::size_t next = 0;
  };
  std::vector<Frame> stack;
  auto new_frame = [&] {
    Frame f;
    for (int c = 0; c < cols; ++c) f.order.push_back(c);
    std::shuffle(f.order.begin(), f.order.end(), rng);
    return f;
  };
  stack.push_back(new_frame());
  while (!stack.empty()) {
    if (static_cast<int>(moves.size()) == rows * cols) return moves;
    Frame& f = stack.back();
    bool advanced = false;
    while (f.next < f.order.size()) {
      const int c = f.order[f.next++];
      if (!b.drop_row(c)) continue;
      const int who = b.to_move;
      b.play(c);
      if (b.has_line(who)) {
        b.undo(c);
        continue;
      }
      moves.push_back(c);
      stack.push_back(new_frame());
      advanced = true;
      break;
    }
    if (!advanced) {
      stack.pop_back();
      if (!moves.empty()) {
        b.undo(moves.back());
        moves.pop_back();
      }
    }
  }
  return {};
}

}  // namespace probs::oracle
