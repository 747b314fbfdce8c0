#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace dpim {

// Exponent vector over the normal coordinates. The last n_forcing entries
// belong to the dummy forcing variables (z+, z-).
using MultiIndex = std::vector<int>;

struct MultiIndexHash {
  std::size_t operator()(const MultiIndex& a) const noexcept;
};

int order(const MultiIndex& a);
int forcing_order(const MultiIndex& a, int n_forcing = 2);
MultiIndex unit_index(int n_vars, int s);
std::string to_string(const MultiIndex& a);

// Binomial C(p + d, p): number of monomials of order p in d + 1 variables.
long long monomial_count(int p, int d);

std::vector<MultiIndex> monomials_of_order(int p, int n_vars, int n_forcing = 2);

enum class TruncMode { asymptotic, coupled, disjoint };

struct TruncationRule {
  TruncMode mode = TruncMode::coupled;
  int o = 3;
  int o_eps = 1;
  int m = 1;

  void validate() const;
  // Highest total order that can survive the filter.
  int max_order() const;
};

std::string to_string(TruncMode mode);
TruncMode parse_trunc_mode(const std::string& s);

bool truncation_keep(int p_bar, int p_tilde, const TruncationRule& rule);
bool truncation_keep(const MultiIndex& a, const TruncationRule& rule, int n_forcing = 2);

// Kept (master order, forcing order) cells, including (0, 0).
std::vector<std::pair<int, int>> kept_cells(const TruncationRule& rule);

std::pair<int, std::optional<MultiIndex>> derivative_index(const MultiIndex& a, int s);
MultiIndex product_index(const MultiIndex& a, const MultiIndex& b);

// Every order-p list in enumeration order, with reverse lookup.
class MonomialTable {
 public:
  MonomialTable(int max_order, int n_vars, int n_forcing = 2);

  int n_vars() const { return n_vars_; }
  int max_order() const { return static_cast<int>(orders_.size()) - 1; }
  const std::vector<MultiIndex>& of_order(int p) const { return orders_.at(p); }
  std::pair<int, int> monomial_index(const MultiIndex& a) const;

 private:
  int n_vars_;
  std::vector<std::vector<MultiIndex>> orders_;
  std::unordered_map<MultiIndex, std::pair<int, int>, MultiIndexHash> lookup_;
};

// Calls fn(beta) for every beta <= a componentwise with 1 <= |beta| < |a|.
template <class Fn>
void for_each_proper_subindex(const MultiIndex& a, Fn&& fn) {
  const int n = static_cast<int>(a.size());
  const int p = order(a);
  MultiIndex b(n, 0);
  int ob = 0;
  while (true) {
    if (ob >= 1 && ob < p) fn(static_cast<const MultiIndex&>(b));
    int i = 0;
    while (i < n) {
      if (b[i] < a[i]) {
        ++b[i];
        ++ob;
        break;
      }
      ob -= b[i];
      b[i] = 0;
      ++i;
    }
    if (i == n) return;
  }
}

}  // namespace dpim
