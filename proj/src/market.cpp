#include "p2pgrid/market.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "p2pgrid/errors.hpp"
#include "p2pgrid/format.hpp"

namespace p2pgrid::market {

bool PriceEnvelope::is_valid() const {
  return std::isfinite(feed_in) && std::isfinite(day_ahead) && std::isfinite(emergency) &&
         feed_in >= 0.0 && feed_in <= day_ahead && day_ahead <= emergency;
}

void PriceEnvelope::validate() const {
  if (!std::isfinite(feed_in) || !std::isfinite(day_ahead) || !std::isfinite(emergency))
    throw ConfigError("price envelope: prices must be finite");
  if (feed_in < 0.0) throw ConfigError("price envelope: feed_in must be >= 0");
  if (feed_in > day_ahead)
    throw ConfigError("price envelope: feed_in (" + format_double(feed_in) +
                      ") exceeds day_ahead (" + format_double(day_ahead) + ")");
  if (day_ahead > emergency)
    throw ConfigError("price envelope: day_ahead (" + format_double(day_ahead) +
                      ") exceeds emergency (" + format_double(emergency) + ")");
}

MarketFactor::MarketFactor(int value) : value_(value) {
  if (value < -1 || value > 1)
    throw ConfigError("market factor must be -1, 0 or +1, got " + std::to_string(value));
}

std::string_view to_string(ValidationResult r) {
  switch (r) {
    case ValidationResult::Accepted: return "accepted";
    case ValidationResult::PriceOutOfEnvelope: return "price_out_of_envelope";
    case ValidationResult::NegativeQuantity: return "negative_quantity";
  }
  return "unknown";
}

ValidationResult validate_quotation(const Quotation& q, const PriceEnvelope& env) {
  if (q.quantity < 0.0 || std::isnan(q.quantity)) return ValidationResult::NegativeQuantity;
  if (q.quantity == 0.0) return ValidationResult::Accepted;
  const double p = q.abs_price();
  if (!(p >= env.feed_in && p <= env.emergency)) return ValidationResult::PriceOutOfEnvelope;
  return ValidationResult::Accepted;
}

OrderBook partition(std::span<const Quotation> quotes) {
  OrderBook book;
  for (const auto& q : quotes) {
    if (!(q.quantity > 0.0)) continue;
    (q.role() == Role::Buyer ? book.buyers : book.sellers).push_back(q);
  }
  return book;
}

namespace {

// Sorts by key in the given direction, lower agent id first on ties.
template <typename Key>
void sort_by(std::vector<Quotation>& side, Key key, bool descending) {
  std::stable_sort(side.begin(), side.end(), [&](const Quotation& a, const Quotation& b) {
    const double ka = key(a);
    const double kb = key(b);
    if (ka != kb) return descending ? ka > kb : ka < kb;
    return a.agent < b.agent;
  });
}

std::vector<AgentId> ids_of(const std::vector<Quotation>& side) {
  std::vector<AgentId> ids;
  ids.reserve(side.size());
  for (const auto& q : side) ids.push_back(q.agent);
  return ids;
}

Fill make_fill(AgentId buyer, AgentId seller, double kwh, double bid, double ask,
               double buyer_price, double seller_price) {
  Fill f;
  f.buyer = buyer;
  f.seller = seller;
  f.kwh = kwh;
  f.bid = bid;
  f.ask = ask;
  f.buyer_price = buyer_price;
  f.seller_price = seller_price;
  f.payment = Money::of(buyer_price, kwh);
  f.receipt = buyer_price == seller_price ? f.payment : Money::of(seller_price, kwh);
  return f;
}

Fill midpoint_fill(AgentId buyer, AgentId seller, double kwh, double bid, double ask) {
  const double p = midpoint_price(bid, ask);
  return make_fill(buyer, seller, kwh, bid, ask, p, p);
}

const auto kPrice = [](const Quotation& q) { return q.price; };
const auto kAbsPrice = [](const Quotation& q) { return q.abs_price(); };

}  // namespace

OrderBook sort_order_book(OrderBook book, MarketFactor m, double emergency_price) {
  const auto buyer_value = [](const Quotation& q) { return q.price * q.quantity; };
  const auto seller_welfare = [emergency_price](const Quotation& q) {
    return (emergency_price - q.abs_price()) * q.quantity;
  };
  if (m.value() < 0) {
    sort_by(book.buyers, buyer_value, true);
    sort_by(book.sellers, kAbsPrice, false);
  } else if (m.value() > 0) {
    sort_by(book.buyers, kPrice, true);
    sort_by(book.sellers, seller_welfare, true);
  } else {
    sort_by(book.buyers, kPrice, true);
    sort_by(book.sellers, kAbsPrice, false);
  }
  return book;
}

double midpoint_price(double bid, double ask_abs) {
  if (bid < ask_abs)
    throw CrossViolation("bid " + format_double(bid) + " is below ask " + format_double(ask_abs));
  return (bid + ask_abs) / 2.0;
}

// --- TradeLedger ---------------------------------------------------------------------------

TradeLedger::TradeLedger(std::vector<AgentId> buyer_ids, std::vector<AgentId> seller_ids)
    : buyer_ids_(std::move(buyer_ids)), seller_ids_(std::move(seller_ids)) {
  const std::size_t n = buyer_ids_.size() * seller_ids_.size();
  quantities_.assign(n, 0.0);
  payments_.assign(n, Money{});
  receipts_.assign(n, Money{});
  buyer_value_.assign(n, 0.0);
  seller_value_.assign(n, 0.0);
}

std::ptrdiff_t TradeLedger::row_of(AgentId buyer) const {
  auto it = std::find(buyer_ids_.begin(), buyer_ids_.end(), buyer);
  return it == buyer_ids_.end() ? -1 : it - buyer_ids_.begin();
}

std::ptrdiff_t TradeLedger::col_of(AgentId seller) const {
  auto it = std::find(seller_ids_.begin(), seller_ids_.end(), seller);
  return it == seller_ids_.end() ? -1 : it - seller_ids_.begin();
}

void TradeLedger::record(const Fill& fill) {
  const auto r = row_of(fill.buyer);
  const auto c = col_of(fill.seller);
  if (r < 0 || c < 0) throw Error("fill references an agent outside the ledger");
  const std::size_t k = static_cast<std::size_t>(r) * seller_ids_.size() + static_cast<std::size_t>(c);
  quantities_[k] += fill.kwh;
  payments_[k] += fill.payment;
  receipts_[k] += fill.receipt;
  buyer_value_[k] += fill.buyer_price * fill.kwh;
  seller_value_[k] += fill.seller_price * fill.kwh;
  fills_.push_back(fill);
}

double TradeLedger::quantity(std::size_t row, std::size_t col) const {
  return quantities_.at(row * seller_ids_.size() + col);
}

double TradeLedger::price(std::size_t row, std::size_t col) const {
  const std::size_t k = row * seller_ids_.size() + col;
  const double q = quantities_.at(k);
  if (q == 0.0) return 0.0;
  // A cell is normally filled once; fall back to the volume-weighted price otherwise.
  std::size_t count = 0;
  double last = 0.0;
  for (const auto& f : fills_) {
    if (f.buyer == buyer_ids_[row] && f.seller == seller_ids_[col]) {
      ++count;
      last = f.buyer_price;
    }
  }
  return count == 1 ? last : buyer_value_[k] / q;
}

double TradeLedger::seller_price(std::size_t row, std::size_t col) const {
  const std::size_t k = row * seller_ids_.size() + col;
  const double q = quantities_.at(k);
  if (q == 0.0) return 0.0;
  std::size_t count = 0;
  double last = 0.0;
  for (const auto& f : fills_) {
    if (f.buyer == buyer_ids_[row] && f.seller == seller_ids_[col]) {
      ++count;
      last = f.seller_price;
    }
  }
  return count == 1 ? last : seller_value_[k] / q;
}

double TradeLedger::quantity_between(AgentId buyer, AgentId seller) const {
  const auto r = row_of(buyer);
  const auto c = col_of(seller);
  if (r < 0 || c < 0) return 0.0;
  return quantity(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
}

double TradeLedger::price_between(AgentId buyer, AgentId seller) const {
  const auto r = row_of(buyer);
  const auto c = col_of(seller);
  if (r < 0 || c < 0) return 0.0;
  return price(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
}

double TradeLedger::bought(AgentId agent) const {
  double total = 0.0;
  for (const auto& f : fills_)
    if (f.buyer == agent) total += f.kwh;
  return total;
}

double TradeLedger::sold(AgentId agent) const {
  double total = 0.0;
  for (const auto& f : fills_)
    if (f.seller == agent) total += f.kwh;
  return total;
}

Money TradeLedger::payments(AgentId agent) const {
  Money total;
  for (const auto& f : fills_)
    if (f.buyer == agent) total += f.payment;
  return total;
}

Money TradeLedger::receipts(AgentId agent) const {
  Money total;
  for (const auto& f : fills_)
    if (f.seller == agent) total += f.receipt;
  return total;
}

double TradeLedger::total_volume() const {
  double total = 0.0;
  for (const auto& f : fills_) total += f.kwh;
  return total;
}

Money TradeLedger::total_payments() const {
  Money total;
  for (const auto& f : fills_) total += f.payment;
  return total;
}

Money TradeLedger::total_receipts() const {
  Money total;
  for (const auto& f : fills_) total += f.receipt;
  return total;
}

// --- JPQ -----------------------------------------------------------------------------------

namespace {

// Round-robin cursor over one side of the book. An entry is live while it has residual
// quantity and has not been dropped by a price skip.
class Cursor {
 public:
  Cursor(const std::vector<Quotation>& side, std::size_t& advances)
      : residual_(side.size()), dropped_(side.size(), false), advances_(advances) {
    for (std::size_t i = 0; i < side.size(); ++i) residual_[i] = side[i].quantity;
    pos_ = start();
  }

  std::size_t size() const { return residual_.size(); }
  std::size_t pos() const { return pos_; }
  bool valid() const { return pos_ < size(); }
  double& residual() { return residual_[pos_]; }

  void drop() { dropped_[pos_] = true; }

  // Moves to the next live entry, wrapping to the start pointer past the end.
  void advance() {
    std::size_t j = pos_ + 1;
    ++advances_;
    while (j < size() && !live(j)) {
      ++j;
      ++advances_;
    }
    pos_ = j < size() ? j : start();
  }

 private:
  bool live(std::size_t i) const { return !dropped_[i] && residual_[i] > 0.0; }

  // First live index, or size() when the side is exhausted.
  std::size_t start() const {
    std::size_t i = 0;
    while (i < size() && !live(i)) ++i;
    return i;
  }

  std::vector<double> residual_;
  std::vector<bool> dropped_;
  std::size_t pos_ = 0;
  std::size_t& advances_;
};

}  // namespace

TradeLedger clear_jpq(std::span<const Quotation> quotes, MarketFactor m, double emergency_price,
                      JpqStats* stats) {
  const OrderBook book = sort_order_book(partition(quotes), m, emergency_price);
  TradeLedger ledger(ids_of(book.buyers), ids_of(book.sellers));
  JpqStats local;
  Cursor b(book.buyers, local.pointer_advances);
  Cursor s(book.sellers, local.pointer_advances);

  while (b.valid() && s.valid()) {
    ++local.iterations;
    const Quotation& buyer = book.buyers[b.pos()];
    const Quotation& seller = book.sellers[s.pos()];
    if (buyer.price < seller.abs_price()) {
      ++local.skips;
      if (m.value() < 0) {
        b.drop();
        b.advance();
        continue;
      }
      if (m.value() > 0) {
        s.drop();
        s.advance();
        continue;
      }
      break;
    }
    const double q = std::min(b.residual(), s.residual());
    ledger.record(midpoint_fill(buyer.agent, seller.agent, q, buyer.price, seller.abs_price()));
    b.residual() -= q;
    s.residual() -= q;
    b.advance();
    s.advance();
  }
  if (stats) *stats = local;
  return ledger;
}

// --- Baselines -----------------------------------------------------------------------------

namespace {

struct Live {
  AgentId agent;
  double price;  // bid for buyers, |ask| for sellers
  double residual;
};

std::vector<Live> live_side(const std::vector<Quotation>& side) {
  std::vector<Live> out;
  out.reserve(side.size());
  for (const auto& q : side) out.push_back({q.agent, q.abs_price(), q.quantity});
  return out;
}

void sort_live(std::vector<Live*>& side, bool descending) {
  std::stable_sort(side.begin(), side.end(), [descending](const Live* a, const Live* b) {
    if (a->price != b->price) return descending ? a->price > b->price : a->price < b->price;
    return a->agent < b->agent;
  });
}

// Sequential price-priority matching over residual entries, mutating residuals.
void greedy_pass(std::vector<Live>& buyers, std::vector<Live>& sellers, TradeLedger& ledger) {
  std::vector<Live*> bs;
  std::vector<Live*> ss;
  for (auto& b : buyers)
    if (b.residual > 0.0) bs.push_back(&b);
  for (auto& s : sellers)
    if (s.residual > 0.0) ss.push_back(&s);
  sort_live(bs, true);
  sort_live(ss, false);
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < bs.size() && j < ss.size() && bs[i]->price >= ss[j]->price) {
    const double q = std::min(bs[i]->residual, ss[j]->residual);
    ledger.record(midpoint_fill(bs[i]->agent, ss[j]->agent, q, bs[i]->price, ss[j]->price));
    bs[i]->residual -= q;
    ss[j]->residual -= q;
    if (bs[i]->residual <= 0.0) ++i;
    if (ss[j]->residual <= 0.0) ++j;
  }
}

}  // namespace

TradeLedger clear_greedy(std::span<const Quotation> quotes) {
  const OrderBook book = partition(quotes);
  auto buyers = live_side(book.buyers);
  auto sellers = live_side(book.sellers);
  TradeLedger ledger(ids_of(book.buyers), ids_of(book.sellers));
  greedy_pass(buyers, sellers, ledger);
  return ledger;
}

TradeLedger clear_mrda(std::span<const Quotation> quotes, const PriceEnvelope& env,
                       MrdaOptions options) {
  if (options.rounds < 1) throw ConfigError("mrda: rounds must be >= 1");
  if (!(options.concession >= 0.0 && options.concession < 1.0))
    throw ConfigError("mrda: concession must lie in [0, 1)");
  const OrderBook book = partition(quotes);
  auto buyers = live_side(book.buyers);
  auto sellers = live_side(book.sellers);
  TradeLedger ledger(ids_of(book.buyers), ids_of(book.sellers));
  for (int round = 0; round < options.rounds; ++round) {
    if (round > 0) {
      for (auto& b : buyers)
        if (b.residual > 0.0) b.price += options.concession * (env.emergency - b.price);
      for (auto& s : sellers)
        if (s.residual > 0.0) s.price -= options.concession * (s.price - env.feed_in);
    }
    greedy_pass(buyers, sellers, ledger);
  }
  return ledger;
}

TradeLedger clear_vvda(std::span<const Quotation> quotes) {
  OrderBook book = partition(quotes);
  sort_by(book.buyers, kPrice, true);
  sort_by(book.sellers, kAbsPrice, false);
  TradeLedger ledger(ids_of(book.buyers), ids_of(book.sellers));

  const std::size_t depth = std::min(book.buyers.size(), book.sellers.size());
  std::size_t k = 0;  // number of crossing ranks
  while (k < depth && book.buyers[k].price >= book.sellers[k].abs_price()) ++k;
  if (k < 2) return ledger;

  const double buyer_price = book.buyers[k - 1].price;
  const double seller_price = book.sellers[k - 1].abs_price();
  std::vector<double> rb(k - 1);
  std::vector<double> rs(k - 1);
  for (std::size_t i = 0; i + 1 < k; ++i) {
    rb[i] = book.buyers[i].quantity;
    rs[i] = book.sellers[i].quantity;
  }
  std::size_t i = 0;
  std::size_t j = 0;
  while (i + 1 < k && j + 1 < k) {
    const double q = std::min(rb[i], rs[j]);
    ledger.record(make_fill(book.buyers[i].agent, book.sellers[j].agent, q, book.buyers[i].price,
                            book.sellers[j].abs_price(), buyer_price, seller_price));
    rb[i] -= q;
    rs[j] -= q;
    if (rb[i] <= 0.0) ++i;
    if (rs[j] <= 0.0) ++j;
  }
  return ledger;
}

std::string_view to_string(Mechanism m) {
  switch (m) {
    case Mechanism::Jpq: return "jpq";
    case Mechanism::Greedy: return "greedy";
    case Mechanism::Mrda: return "mrda";
    case Mechanism::Vvda: return "vvda";
  }
  return "unknown";
}

Mechanism parse_mechanism(std::string_view name) {
  if (name == "jpq") return Mechanism::Jpq;
  if (name == "greedy") return Mechanism::Greedy;
  if (name == "mrda") return Mechanism::Mrda;
  if (name == "vvda") return Mechanism::Vvda;
  throw ConfigError("mechanism: unknown clearing mechanism '" + std::string(name) +
                    "' (expected jpq, greedy, mrda or vvda)");
}

TradeLedger clear(Mechanism mechanism, std::span<const Quotation> quotes,
                  const ClearingContext& ctx) {
  switch (mechanism) {
    case Mechanism::Jpq: return clear_jpq(quotes, ctx.factor, ctx.envelope.emergency);
    case Mechanism::Greedy: return clear_greedy(quotes);
    case Mechanism::Mrda: return clear_mrda(quotes, ctx.envelope, ctx.mrda);
    case Mechanism::Vvda: return clear_vvda(quotes);
  }
  throw Error("unreachable mechanism");
}

std::string ledger_to_csv(const TradeLedger& ledger) {
  std::ostringstream out;
  out << "buyer_id,seller_id,kwh,price\n";
  for (std::size_t r = 0; r < ledger.buyer_ids().size(); ++r) {
    for (std::size_t c = 0; c < ledger.seller_ids().size(); ++c) {
      const double q = ledger.quantity(r, c);
      if (q == 0.0) continue;
      out << ledger.buyer_ids()[r] << ',' << ledger.seller_ids()[c] << ',' << format_double(q)
          << ',' << format_double(ledger.price(r, c)) << '\n';
    }
  }
  return out.str();
}

std::string ledger_to_json(const TradeLedger& ledger) {
  nlohmann::json j;
  j["buyer_ids"] = ledger.buyer_ids();
  j["seller_ids"] = ledger.seller_ids();
  auto cells = nlohmann::json::array();
  for (std::size_t r = 0; r < ledger.buyer_ids().size(); ++r) {
    for (std::size_t c = 0; c < ledger.seller_ids().size(); ++c) {
      const double q = ledger.quantity(r, c);
      if (q == 0.0) continue;
      cells.push_back({{"buyer_id", ledger.buyer_ids()[r]},
                       {"seller_id", ledger.seller_ids()[c]},
                       {"kwh", q},
                       {"price", ledger.price(r, c)},
                       {"seller_price", ledger.seller_price(r, c)}});
    }
  }
  j["cells"] = std::move(cells);
  j["operator_surplus"] = ledger.operator_surplus().to_double();
  return j.dump();
}

}  // namespace p2pgrid::market
