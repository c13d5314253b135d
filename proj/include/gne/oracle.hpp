#pragma once

#include "gne/game.hpp"

#include <functional>
#include <string>

namespace gne {

struct OracleSolution {
  Vec omega;
  Vec x;
  Vec lambda;  // common multiplier λ⋆ (length m)
  std::string method;  // analytic, active-set-enumeration, long-run-extragradient
  double kkt = 0.0;
  double vi = 0.0;
};

/// min Σ_k w_k (x_k − r_k)² s.t. lo ≤ x ≤ hi, A x ≤ b, by enumerating box faces
/// and coupling rows; exhaustive up to 8 dimensions.
struct ProjectionProblem {
  Vec lo;
  Vec hi;
  Mat a;  // m × n, may have 0 rows
  Vec b;
  Vec ref;
  Vec weights;  // empty: all ones
};

struct ProjectionResult {
  Vec x;
  Vec mu;  // coupling-row multipliers
  double kkt = 0.0;
};

ProjectionResult solve_projection(const ProjectionProblem& p);

/// F ≡ 0 game with box local sets, affine coupling and a diagonal x-only φ.
OracleSolution oracle_projection_game(const GameSpec& game);

/// Strongly monotone quadratic game: extragradient on the primal-dual VI, then
/// an active-set least-squares polish.
OracleSolution oracle_unique_vgne(const GameSpec& game, Index iters = 1000000);

/// Golden-section minimization of φ on [a, b] to the given interval width.
OracleSolution oracle_selection_on_segment(const Vec& a, const Vec& b,
                                           const std::function<double(const Vec&)>& phi,
                                           double width = 1e-12);

/// ω⋆ from a primal solution and a common multiplier: λ_i = λ⋆, ν from
/// L ν = −g + mean(g) per coupling row (minimum norm).
Vec assemble_oracle_state(const GameSpec& game, const Vec& x, const Vec& lambda);

}  // namespace gne
