#include "dpim/polyalgebra.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace dpim {

std::size_t MultiIndexHash::operator()(const MultiIndex& a) const noexcept {
  std::size_t h = 1469598103934665603ull;
  for (int e : a) {
    h ^= static_cast<std::size_t>(e) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  }
  return h;
}

int order(const MultiIndex& a) { return std::accumulate(a.begin(), a.end(), 0); }

int forcing_order(const MultiIndex& a, int n_forcing) {
  int s = 0;
  for (std::size_t i = a.size() - n_forcing; i < a.size(); ++i) s += a[i];
  return s;
}

MultiIndex unit_index(int n_vars, int s) {
  MultiIndex a(n_vars, 0);
  a.at(s) = 1;
  return a;
}

std::string to_string(const MultiIndex& a) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < a.size(); ++i) os << (i ? "," : "") << a[i];
  os << ')';
  return os.str();
}

long long monomial_count(int p, int d) {
  if (p < 0 || d < 0) throw std::invalid_argument("monomial_count: negative argument");
  // C(p+d, k) with k = min(p, d), built incrementally so every partial
  // product is itself a binomial coefficient.
  const int k = std::min(p, d);
  const int n = p + d;
  unsigned long long r = 1;
  for (int i = 1; i <= k; ++i) {
    const unsigned long long num = static_cast<unsigned long long>(n - k + i);
    if (r > std::numeric_limits<unsigned long long>::max() / num)
      throw std::overflow_error("monomial_count: result exceeds integer range");
    r = r * num / i;
  }
  if (r > static_cast<unsigned long long>(std::numeric_limits<long long>::max()))
    throw std::overflow_error("monomial_count: result exceeds integer range");
  return static_cast<long long>(r);
}

namespace {

void enumerate(int pos, int left, MultiIndex& cur, std::vector<MultiIndex>& out) {
  const int n = static_cast<int>(cur.size());
  if (pos == n - 1) {
    cur[pos] = left;
    out.push_back(cur);
    return;
  }
  for (int e = left; e >= 0; --e) {
    cur[pos] = e;
    enumerate(pos + 1, left - e, cur, out);
  }
  cur[pos] = 0;
}

}  // namespace

std::vector<MultiIndex> monomials_of_order(int p, int n_vars, int n_forcing) {
  if (p < 1 || n_vars < 1) throw std::invalid_argument("monomials_of_order: need p >= 1, n_vars >= 1");
  n_forcing = std::clamp(n_forcing, 0, n_vars);
  std::vector<MultiIndex> out;
  MultiIndex cur(n_vars, 0);
  // Recursion emits descending lexicographic order; a stable sort on the
  // forcing power keeps that as the tie break.
  enumerate(0, p, cur, out);
  std::stable_sort(out.begin(), out.end(), [&](const MultiIndex& a, const MultiIndex& b) {
    return forcing_order(a, n_forcing) < forcing_order(b, n_forcing);
  });
  return out;
}

void TruncationRule::validate() const {
  if (o < 1) throw std::invalid_argument("truncation: o must be >= 1");
  if (o_eps < 0) throw std::invalid_argument("truncation: o_eps must be >= 0");
  if (mode == TruncMode::coupled && o_eps > o)
    throw std::invalid_argument("truncation: coupled mode requires o_eps <= o");
  if (mode == TruncMode::asymptotic && m < 1)
    throw std::invalid_argument("truncation: asymptotic mode requires m >= 1");
}

int TruncationRule::max_order() const {
  switch (mode) {
    case TruncMode::disjoint:
      return o + o_eps;
    default:
      return o;
  }
}

std::string to_string(TruncMode mode) {
  switch (mode) {
    case TruncMode::asymptotic:
      return "asymptotic";
    case TruncMode::coupled:
      return "coupled";
    case TruncMode::disjoint:
      return "disjoint";
  }
  return "?";
}

TruncMode parse_trunc_mode(const std::string& s) {
  if (s == "asymptotic") return TruncMode::asymptotic;
  if (s == "coupled") return TruncMode::coupled;
  if (s == "disjoint") return TruncMode::disjoint;
  throw std::invalid_argument("unknown truncation mode '" + s + "'");
}

bool truncation_keep(int pb, int pt, const TruncationRule& r) {
  switch (r.mode) {
    case TruncMode::asymptotic:
      return pb + r.m * pt <= r.o;
    case TruncMode::coupled:
      return pb + pt <= r.o && pt <= r.o_eps;
    case TruncMode::disjoint:
      return pb <= r.o && pt <= r.o_eps;
  }
  return false;
}

bool truncation_keep(const MultiIndex& a, const TruncationRule& rule, int n_forcing) {
  const int pt = forcing_order(a, n_forcing);
  return truncation_keep(order(a) - pt, pt, rule);
}

std::vector<std::pair<int, int>> kept_cells(const TruncationRule& rule) {
  std::vector<std::pair<int, int>> cells;
  const int top = rule.max_order();
  for (int pt = 0; pt <= top; ++pt)
    for (int pb = 0; pb <= top; ++pb)
      if (truncation_keep(pb, pt, rule)) cells.emplace_back(pb, pt);
  return cells;
}

std::pair<int, std::optional<MultiIndex>> derivative_index(const MultiIndex& a, int s) {
  if (s < 0 || s >= static_cast<int>(a.size())) throw std::out_of_range("derivative_index: bad coordinate");
  if (a[s] == 0) return {0, std::nullopt};
  MultiIndex d = a;
  --d[s];
  return {a[s], d};
}

MultiIndex product_index(const MultiIndex& a, const MultiIndex& b) {
  if (a.size() != b.size()) throw std::invalid_argument("product_index: size mismatch");
  MultiIndex c(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) c[i] = a[i] + b[i];
  return c;
}

MonomialTable::MonomialTable(int max_order, int n_vars, int n_forcing) : n_vars_(n_vars) {
  orders_.resize(max_order + 1);
  for (int p = 1; p <= max_order; ++p) {
    orders_[p] = monomials_of_order(p, n_vars, n_forcing);
    for (int k = 0; k < static_cast<int>(orders_[p].size()); ++k) lookup_.emplace(orders_[p][k], std::make_pair(p, k));
  }
}

std::pair<int, int> MonomialTable::monomial_index(const MultiIndex& a) const {
  auto it = lookup_.find(a);
  if (it == lookup_.end()) throw std::out_of_range("monomial " + to_string(a) + " not in table");
  return it->second;
}

}  // namespace dpim
