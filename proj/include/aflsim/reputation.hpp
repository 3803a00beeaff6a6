#pragma once
#include <algorithm>
#include <bit>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "aflsim/rng.hpp"

namespace aflsim {

/// Beta-reputation counters. v is always the Beta(pc+1, nc+1) mean, so a
/// fresh record sits at 0.5.
struct ReputationRecord {
  int pc = 0;
  int nc = 0;
  double v = 0.5;
};

inline double reputation_value(int pc, int nc) {
  if (pc < 0 || nc < 0) throw std::invalid_argument("negative counter");
  return static_cast<double>(pc + 1) / static_cast<double>(pc + nc + 2);
}

/// Record one contribution outcome. Zero counts as positive.
inline ReputationRecord update_reputation(ReputationRecord record, double phi) {
  if (phi >= 0.0)
    ++record.pc;
  else
    ++record.nc;
  record.v = reputation_value(record.pc, record.nc);
  return record;
}

/// A cooperative game over an ordered player list. perf maps a subset,
/// encoded as a bitmask over player positions, to a performance score; it
/// must accept every mask including 0 (the empty coalition).
struct CoalitionGame {
  std::vector<int> players;
  std::function<double(std::uint64_t)> perf;
  double alpha = 0.0;  // 0 means "use 1/|N|"

  double alpha_or_default() const {
    return alpha > 0.0 ? alpha : 1.0 / static_cast<double>(players.size());
  }
};

enum class ContributionMode { kExact, kMonteCarlo };

struct ContributionVector {
  std::map<int, double> phi;  // player id -> contribution
  ContributionMode mode = ContributionMode::kExact;
  std::uint64_t sample_count = 0;  // permutations drawn (Monte Carlo only)
};

namespace detail {

inline std::vector<double> binomial_row(int n) {
  std::vector<double> row(static_cast<std::size_t>(n) + 1, 1.0);
  for (int k = 1; k <= n; ++k)
    row[static_cast<std::size_t>(k)] =
        row[static_cast<std::size_t>(k - 1)] * (n - k + 1) / k;
  return row;
}

}  // namespace detail

/// Exact Shapley contributions by full subset enumeration:
///   phi_i = alpha * sum_{S not containing i} [f(S+i) - f(S)] / C(n-1, |S|).
/// Capped by player count since the enumeration is 2^n.
inline ContributionVector shapley_exact(const CoalitionGame& game,
                                        int exact_cap = 8) {
  const int n = static_cast<int>(game.players.size());
  if (n == 0) throw std::invalid_argument("empty player set");
  if (n > exact_cap)
    throw std::invalid_argument(
        "player count exceeds the exact-mode cap; use shapley_monte_carlo");

  const std::uint64_t full = (n == 64) ? ~0ULL : ((1ULL << n) - 1);
  std::vector<double> value(static_cast<std::size_t>(full) + 1);
  for (std::uint64_t mask = 0; mask <= full; ++mask)
    value[mask] = game.perf(mask);

  const std::vector<double> choose = detail::binomial_row(n - 1);
  const double alpha = game.alpha_or_default();
  ContributionVector out;
  out.mode = ContributionMode::kExact;
  for (int i = 0; i < n; ++i) {
    const std::uint64_t bit = 1ULL << i;
    double sum = 0.0;
    for (std::uint64_t mask = 0; mask <= full; ++mask) {
      if (mask & bit) continue;
      const int size = std::popcount(mask);
      sum += (value[mask | bit] - value[mask]) / choose[static_cast<std::size_t>(size)];
    }
    out.phi[game.players[static_cast<std::size_t>(i)]] = alpha * sum;
  }
  return out;
}

namespace detail {

inline void accumulate_permutation_marginals(const CoalitionGame& game,
                                             const std::vector<int>& order,
                                             std::vector<double>& sums) {
  std::uint64_t mask = 0;
  double prev = game.perf(0);
  for (int position : order) {
    mask |= 1ULL << position;
    const double cur = game.perf(mask);
    sums[static_cast<std::size_t>(position)] += cur - prev;
    prev = cur;
  }
}

inline ContributionVector finish_permutation_estimate(
    const CoalitionGame& game, const std::vector<double>& sums,
    std::uint64_t permutations) {
  const int n = static_cast<int>(game.players.size());
  // The permutation average estimates the alpha = 1/n Shapley value; rescale
  // so the target matches shapley_exact for any alpha.
  const double scale = game.alpha_or_default() * n / static_cast<double>(permutations);
  ContributionVector out;
  out.mode = ContributionMode::kMonteCarlo;
  out.sample_count = permutations;
  for (int i = 0; i < n; ++i)
    out.phi[game.players[static_cast<std::size_t>(i)]] =
        sums[static_cast<std::size_t>(i)] * scale;
  return out;
}

}  // namespace detail

/// Permutation-sampling Shapley estimate; unbiased for the shapley_exact
/// target and deterministic for a given engine state.
inline ContributionVector shapley_monte_carlo(const CoalitionGame& game,
                                              std::uint64_t permutations,
                                              RngEngine& rng) {
  const int n = static_cast<int>(game.players.size());
  if (n == 0) throw std::invalid_argument("empty player set");
  if (n > 64) throw std::invalid_argument("more than 64 players unsupported");
  if (permutations < 1) throw std::invalid_argument("need at least one permutation");

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> sums(static_cast<std::size_t>(n), 0.0);
  for (std::uint64_t p = 0; p < permutations; ++p) {
    shuffle(rng, order);
    detail::accumulate_permutation_marginals(game, order, sums);
  }
  return detail::finish_permutation_estimate(game, sums, permutations);
}

/// Degenerate estimator that walks all n! permutations; equals shapley_exact
/// up to rounding. Test/diagnostic use only.
inline ContributionVector shapley_permutations_exhaustive(
    const CoalitionGame& game) {
  const int n = static_cast<int>(game.players.size());
  if (n == 0) throw std::invalid_argument("empty player set");
  if (n > 10) throw std::invalid_argument("factorial enumeration capped at 10 players");

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> sums(static_cast<std::size_t>(n), 0.0);
  std::uint64_t count = 0;
  do {
    detail::accumulate_permutation_marginals(game, order, sums);
    ++count;
  } while (std::next_permutation(order.begin(), order.end()));
  return detail::finish_permutation_estimate(game, sums, count);
}

}  // namespace aflsim
