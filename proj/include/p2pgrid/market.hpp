#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "p2pgrid/money.hpp"

namespace p2pgrid::market {

using AgentId = std::size_t;

// Main-grid price signals for one hour, in money/kWh.
struct PriceEnvelope {
  double feed_in = 0.0;
  double day_ahead = 0.0;
  double emergency = 0.0;

  // feed_in <= day_ahead <= emergency, all non-negative and finite.
  bool is_valid() const;
  // Throws ConfigError describing the first violated ordering.
  void validate() const;
};

enum class Role { Buyer, Seller };

// One agent's intraday quote. The sign of `price` carries the role: price >= 0 is a buyer,
// price < 0 a seller. `quantity` is always a magnitude in kWh.
struct Quotation {
  AgentId agent = 0;
  double price = 0.0;
  double quantity = 0.0;

  Role role() const { return price >= 0.0 ? Role::Buyer : Role::Seller; }
  double abs_price() const { return price < 0.0 ? -price : price; }
};

// Ternary system imbalance signal: -1 surplus, 0 balanced, +1 deficit.
class MarketFactor {
 public:
  constexpr MarketFactor() = default;
  // Throws ConfigError unless value is -1, 0 or +1.
  explicit MarketFactor(int value);

  static constexpr MarketFactor surplus() { return MarketFactor(Tag{}, -1); }
  static constexpr MarketFactor balanced() { return MarketFactor(Tag{}, 0); }
  static constexpr MarketFactor deficit() { return MarketFactor(Tag{}, 1); }

  constexpr int value() const { return value_; }
  constexpr bool operator==(const MarketFactor&) const = default;

 private:
  struct Tag {};
  constexpr MarketFactor(Tag, int v) : value_(v) {}
  int value_ = 0;
};

enum class ValidationResult { Accepted, PriceOutOfEnvelope, NegativeQuantity };

std::string_view to_string(ValidationResult r);

// Checks the quote against the envelope: a zero-quantity quote is always accepted,
// otherwise feed_in <= |price| <= emergency.
ValidationResult validate_quotation(const Quotation& q, const PriceEnvelope& env);

struct OrderBook {
  std::vector<Quotation> buyers;
  std::vector<Quotation> sellers;
};

// Splits quotes by role, dropping zero-quantity ones. Submission order is kept on each side.
OrderBook partition(std::span<const Quotation> quotes);

// Market-factor driven ordering of both sides. Keys:
//   buyers:  k1 = p,   k2 = p * q
//   sellers: k1 = |p|, k2 = (emergency - |p|) * q
//   m < 0: buyers desc k2, sellers asc k1
//   m > 0: buyers desc k1, sellers desc k2
//   m = 0: buyers desc k1, sellers asc k1
// Ties go to the lower agent id.
OrderBook sort_order_book(OrderBook book, MarketFactor m, double emergency_price);

// (bid + ask) / 2. Throws CrossViolation when bid < ask.
double midpoint_price(double bid, double ask_abs);

// One executed match. `bid` and `ask` are the quotes in force when the match happened
// (MRDA concedes them between rounds); buyer_price/seller_price are the settlement prices.
struct Fill {
  AgentId buyer = 0;
  AgentId seller = 0;
  double kwh = 0.0;
  double bid = 0.0;
  double ask = 0.0;
  double buyer_price = 0.0;
  double seller_price = 0.0;
  Money payment;
  Money receipt;
};

// Cleared quantity matrix Q and price matrix Pi (buyer rows, seller columns), plus the list
// of fills that produced them.
class TradeLedger {
 public:
  TradeLedger() = default;
  TradeLedger(std::vector<AgentId> buyer_ids, std::vector<AgentId> seller_ids);

  void record(const Fill& fill);

  const std::vector<AgentId>& buyer_ids() const { return buyer_ids_; }
  const std::vector<AgentId>& seller_ids() const { return seller_ids_; }
  const std::vector<Fill>& fills() const { return fills_; }
  bool empty() const { return fills_.empty(); }

  // Matrix access by row/column position.
  double quantity(std::size_t row, std::size_t col) const;
  // Buyer-side clearing price of the cell; 0 where nothing was executed.
  double price(std::size_t row, std::size_t col) const;
  // Seller-side price; equals price() for every mechanism except VVDA.
  double seller_price(std::size_t row, std::size_t col) const;

  // Matrix access by agent id; 0 if either agent is absent.
  double quantity_between(AgentId buyer, AgentId seller) const;
  double price_between(AgentId buyer, AgentId seller) const;

  double bought(AgentId agent) const;
  double sold(AgentId agent) const;
  Money payments(AgentId agent) const;
  Money receipts(AgentId agent) const;

  double total_volume() const;
  Money total_payments() const;
  Money total_receipts() const;
  // Payments retained by the operator. Zero for mid-point mechanisms.
  Money operator_surplus() const { return total_payments() - total_receipts(); }

 private:
  std::ptrdiff_t row_of(AgentId buyer) const;
  std::ptrdiff_t col_of(AgentId seller) const;

  std::vector<AgentId> buyer_ids_;
  std::vector<AgentId> seller_ids_;
  std::vector<double> quantities_;
  std::vector<Money> payments_;
  std::vector<Money> receipts_;
  std::vector<double> buyer_value_;   // sum of buyer_price * kwh per cell
  std::vector<double> seller_value_;  // sum of seller_price * kwh per cell
  std::vector<Fill> fills_;
};

struct JpqStats {
  std::size_t iterations = 0;
  std::size_t pointer_advances = 0;
  std::size_t skips = 0;
};

// Joint price-quantity clearing: round-robin matching over the market-factor sorted book
// with mid-point pricing. When the current buyer cannot afford the current seller, the
// buyer is dropped under surplus (m < 0), the seller under deficit (m > 0), and matching
// stops when balanced. Start pointers always track the first live entry on each side.
TradeLedger clear_jpq(std::span<const Quotation> quotes, MarketFactor m, double emergency_price,
                      JpqStats* stats = nullptr);

// Price-priority sequential matching with mid-point pricing.
TradeLedger clear_greedy(std::span<const Quotation> quotes);

struct MrdaOptions {
  int rounds = 3;
  double concession = 0.5;
};

// Multi-round variant of clear_greedy. Between rounds, unfilled buyers raise their bids by
// concession * (emergency - bid) and unfilled sellers lower asks by concession * (ask - feed_in).
// Settlement uses the conceded quotes.
TradeLedger clear_mrda(std::span<const Quotation> quotes, const PriceEnvelope& env,
                       MrdaOptions options = {});

// McAfee-style breakeven rule: with both sides sorted, k is the last rank where bid >= ask.
// Ranks before k trade; buyers pay bid(k), sellers receive ask(k), the operator keeps the rest.
TradeLedger clear_vvda(std::span<const Quotation> quotes);

enum class Mechanism { Jpq, Greedy, Mrda, Vvda };

std::string_view to_string(Mechanism m);
// Throws ConfigError for unknown names.
Mechanism parse_mechanism(std::string_view name);

struct ClearingContext {
  MarketFactor factor;
  PriceEnvelope envelope;
  MrdaOptions mrda;
};

TradeLedger clear(Mechanism mechanism, std::span<const Quotation> quotes,
                  const ClearingContext& ctx);

// One row per executed cell: buyer_id,seller_id,kwh,price
std::string ledger_to_csv(const TradeLedger& ledger);
std::string ledger_to_json(const TradeLedger& ledger);

}  // namespace p2pgrid::market
