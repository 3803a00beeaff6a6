#pragma once
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "aflsim/rng.hpp"

namespace aflsim {

/// Thrown when a settlement would breach a budget bound; indicates a bug in
/// the bidding side (bids must be clamped before submission).
class ProtocolViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Currency lives on a fixed binary lattice (multiples of 2^-20) so budget
// sums and comparisons are exact in double arithmetic.
inline constexpr double kMoneyQuantum = 0x1.0p-20;

/// Round a nonnegative amount down to the currency lattice.
inline double quantize_money(double amount) {
  if (amount <= 0.0) return 0.0;
  return std::floor(amount / kMoneyQuantum) * kMoneyQuantum;
}

struct DataOwner {
  int id = 0;
  int num_samples = 1;
  double noise_fraction = 0.0;
  std::vector<double> class_profile;  // sums to 1
  double reserve_price = 0.0;
};

/// Check the DataOwner invariants; throws std::invalid_argument on breach.
inline void validate_data_owner(const DataOwner& owner) {
  if (owner.num_samples < 1)
    throw std::invalid_argument("data owner must hold at least one sample");
  if (owner.noise_fraction < 0.0 || owner.noise_fraction > 1.0)
    throw std::invalid_argument("noise fraction outside [0,1]");
  if (owner.reserve_price < 0.0)
    throw std::invalid_argument("negative reserve price");
  double total = 0.0;
  for (double p : owner.class_profile) total += p;
  if (std::fabs(total - 1.0) > 1e-9)
    throw std::invalid_argument("class profile does not sum to 1");
}

struct BidRequest {
  int do_id = 0;
  int session = 0;             // 1-based session index
  int slot = 0;                // auction index within the session, 0-based
  int num_samples = 0;
  double reputation_at_auction = 0.5;
};

struct Bid {
  int mu_id = 0;
  double price = 0.0;  // exactly 0 means abstention
};

struct AuctionOutcome {
  std::optional<int> winner;
  double market_price = 0.0;  // meaningful iff winner is set
  bool failed = true;
  std::vector<Bid> bids;      // all submitted (nonzero) bids
};

struct WinRecord {
  int do_id = 0;
  double price = 0.0;
  int session = 0;
};

struct MuLedger {
  int mu_id = 0;
  double total_budget = 0.0;
  double total_spent = 0.0;
  double session_budget = 0.0;
  double session_spent = 0.0;
  std::vector<WinRecord> wins;

  double remaining_total() const { return total_budget - total_spent; }
  double remaining_session() const { return session_budget - session_spent; }
};

/// Single-item sealed-bid second-price auction with a reserve floor.
/// Winner is the highest bidder at or above the reserve (ties go to the
/// lowest mu_id); the price is max(second-highest qualifying bid, reserve).
/// A lone qualifying bidder pays the reserve. No qualifying bid fails the
/// auction.
inline AuctionOutcome run_auction(const BidRequest& request,
                                  const std::vector<Bid>& bids,
                                  double reserve) {
  (void)request;
  AuctionOutcome out;
  out.bids.reserve(bids.size());
  for (const Bid& b : bids) {
    if (b.price < 0.0) throw std::invalid_argument("negative bid price");
    if (b.price == 0.0) continue;  // abstention
    out.bids.push_back(b);
  }

  const Bid* best = nullptr;
  double second = 0.0;
  bool have_second = false;
  for (const Bid& b : out.bids) {
    if (b.price < reserve) continue;
    if (best == nullptr || b.price > best->price ||
        (b.price == best->price && b.mu_id < best->mu_id)) {
      if (best != nullptr) {
        second = have_second ? std::max(second, best->price) : best->price;
        have_second = true;
      }
      best = &b;
    } else {
      second = have_second ? std::max(second, b.price) : b.price;
      have_second = true;
    }
  }

  if (best == nullptr) {
    out.failed = true;
    return out;
  }
  out.failed = false;
  out.winner = best->mu_id;
  out.market_price = have_second ? std::max(second, reserve) : reserve;
  return out;
}

/// Apply a settled outcome to the winner's ledger. Losers are untouched;
/// failed auctions are a no-op.
inline void settle(const AuctionOutcome& outcome, const BidRequest& request,
                   std::map<int, MuLedger>& ledgers) {
  if (!outcome.winner) return;
  auto it = ledgers.find(*outcome.winner);
  if (it == ledgers.end())
    throw std::invalid_argument("winner has no ledger");
  MuLedger& ledger = it->second;
  const double price = outcome.market_price;
  // price and the budgets are lattice values, so these sums are exact
  if (ledger.session_spent + price > ledger.session_budget)
    throw ProtocolViolation("settlement exceeds session budget");
  if (ledger.total_spent + price > ledger.total_budget)
    throw ProtocolViolation("settlement exceeds total budget");
  ledger.session_spent += price;
  ledger.total_spent += price;
  ledger.wins.push_back(WinRecord{request.do_id, price, request.session});
}

/// One market participant as seen by the auction loop. Implementations must
/// return a bid no greater than their remaining session budget; 0 abstains.
class BiddingStrategy {
 public:
  virtual ~BiddingStrategy() = default;
  virtual double bid(const BidRequest& request, const MuLedger& self,
                     RngEngine& rng) = 0;
};

struct SessionParticipant {
  int mu_id = 0;
  BiddingStrategy* strategy = nullptr;
};

using AuctionObserver =
    std::function<void(const BidRequest&, const AuctionOutcome&)>;

/// Run the per-session auction stream: one sealed-bid auction per request,
/// querying every participant once per request, settling each outcome as it
/// happens. `requests` carry the reputations observed at auction time and
/// must pair 1:1 with `reserves`.
inline std::vector<AuctionOutcome> session_auction_loop(
    const std::vector<BidRequest>& requests, const std::vector<double>& reserves,
    const std::vector<SessionParticipant>& participants,
    std::map<int, MuLedger>& ledgers, RngEngine& rng,
    const AuctionObserver& on_outcome = {}) {
  if (requests.size() != reserves.size())
    throw std::invalid_argument("requests and reserves differ in length");
  std::vector<AuctionOutcome> outcomes;
  outcomes.reserve(requests.size());
  for (std::size_t i = 0; i < requests.size(); ++i) {
    const BidRequest& request = requests[i];
    std::vector<Bid> bids;
    bids.reserve(participants.size());
    for (const SessionParticipant& p : participants) {
      const MuLedger& ledger = ledgers.at(p.mu_id);
      double price = p.strategy->bid(request, ledger, rng);
      price = quantize_money(std::min(price, ledger.remaining_session()));
      if (price > 0.0) bids.push_back(Bid{p.mu_id, price});
    }
    AuctionOutcome outcome = run_auction(request, bids, reserves[i]);
    settle(outcome, request, ledgers);
    if (on_outcome) on_outcome(request, outcome);
    outcomes.push_back(std::move(outcome));
  }
  return outcomes;
}

}  // namespace aflsim
