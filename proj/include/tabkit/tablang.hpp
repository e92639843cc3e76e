#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tabkit/syntax.hpp"

namespace tabkit {

// Two-sorted index space. Renameable indices are the ordinary proof indices;
// reserved indices are per-logic constants (value signs) that every renaming
// and similarity bijection fixes by construction.
struct index_term {
  uint32_t bits = 0;  // bit 31: reserved flag

  static index_term renameable(uint32_t n) { return {n}; }
  static index_term reserved(uint32_t c) { return {c | 0x80000000u}; }
  bool is_reserved() const { return bits & 0x80000000u; }
  uint32_t value() const { return bits & 0x7fffffffu; }
  auto operator<=>(const index_term&) const = default;
};

// Declarations the renderer and the semantics binding share.
struct fsym_decl {
  std::string name;
  int arity = 1;
  int domain_index = 1;
};
struct psym_decl {
  std::string name;
  int arity = 2;
  int relation_index = 1;
};
struct tab_language {
  std::vector<fsym_decl> fsyms;
  std::vector<psym_decl> psyms;
  std::vector<std::string> reserved_names;  // indexed by reserved constant id
  std::vector<std::string> reserved_compact;  // optional short forms
  int world_fsym = 0;      // the designated k-th-domain label symbol
  bool implicit_world = false;  // render world-labelled formulas bare
  bool compact_values = false;  // render reserved signs in short form
};

struct label {
  uint8_t fsym = 0;
  uint8_t argc = 1;
  index_term args[2];

  static label one(uint8_t fsym, index_term a) {
    label l;
    l.fsym = fsym;
    l.argc = 1;
    l.args[0] = a;
    return l;
  }
  static label two(uint8_t fsym, index_term a, index_term b) {
    label l;
    l.fsym = fsym;
    l.argc = 2;
    l.args[0] = a;
    l.args[1] = b;
    return l;
  }
  friend bool operator==(const label& x, const label& y) {
    if (x.fsym != y.fsym || x.argc != y.argc) return false;
    for (int i = 0; i < x.argc; ++i)
      if (x.args[i] != y.args[i]) return false;
    return true;
  }
};

enum class expr_kind : uint8_t { tagged = 0, rel = 1, eq = 2 };

// One tableau expression: a labelled (possibly tableau-negated) formula, a
// relational atom, or an (in)equality. `neg` is the tableau negation, never
// the object-language one.
struct expr {
  expr_kind kind = expr_kind::tagged;
  bool neg = false;
  uint8_t sym = 0;   // fsym (tagged) / psym (rel); unused for eq
  uint8_t argc = 1;  // label or relation arity
  formula_id f = no_formula;
  index_term a0, a1;

  static expr tagged(formula_id f, bool neg, const label& l) {
    expr e;
    e.kind = expr_kind::tagged;
    e.neg = neg;
    e.sym = l.fsym;
    e.argc = l.argc;
    e.f = f;
    e.a0 = l.args[0];
    if (l.argc > 1) e.a1 = l.args[1];
    return e;
  }
  static expr rel(uint8_t psym, bool neg, index_term i, index_term j) {
    expr e;
    e.kind = expr_kind::rel;
    e.neg = neg;
    e.sym = psym;
    e.argc = 2;
    e.a0 = i;
    e.a1 = j;
    return e;
  }
  static expr eq(bool neg, index_term i, index_term j) {
    expr e;
    e.kind = expr_kind::eq;
    e.neg = neg;
    e.argc = 2;
    e.a0 = i;
    e.a1 = j;
    return e;
  }

  label get_label() const {
    label l;
    l.fsym = sym;
    l.argc = argc;
    l.args[0] = a0;
    if (argc > 1) l.args[1] = a1;
    return l;
  }
  expr complement() const {
    expr e = *this;
    e.neg = !e.neg;
    return e;
  }

  // Canonical total order. `neg` compares last so that an expression and its
  // tableau-negated twin sort adjacently, positive first.
  friend std::strong_ordering operator<=>(const expr& x, const expr& y) {
    if (auto c = x.kind <=> y.kind; c != 0) return c;
    if (auto c = x.sym <=> y.sym; c != 0) return c;
    if (auto c = x.f <=> y.f; c != 0) return c;
    if (auto c = x.argc <=> y.argc; c != 0) return c;
    if (auto c = x.a0 <=> y.a0; c != 0) return c;
    if (auto c = x.a1 <=> y.a1; c != 0) return c;
    return x.neg <=> y.neg;
  }
  friend bool operator==(const expr& x, const expr& y) {
    return (x <=> y) == 0;
  }

  uint64_t hash() const {
    uint64_t h = static_cast<uint64_t>(kind) * 0x9e3779b97f4a7c15ull;
    h ^= (h >> 29) ^ (static_cast<uint64_t>(sym) << 3) ^
         (static_cast<uint64_t>(neg) << 1);
    h = h * 0xbf58476d1ce4e5b9ull + static_cast<uint32_t>(f + 1);
    h = h * 0x94d049bb133111ebull + a0.bits;
    h = h * 0x2545f4914f6cdd1dull + a1.bits;
    h ^= h >> 31;
    return h;
  }
};

// Duplicate-free, canonically ordered expression set.
class expr_set {
 public:
  expr_set() = default;
  explicit expr_set(std::vector<expr> items);

  bool contains(const expr& e) const;
  bool insert(const expr& e);  // false if already present
  void merge(const expr_set& other);
  size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  const expr& operator[](size_t i) const { return items_[i]; }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }
  const std::vector<expr>& items() const { return items_; }
  bool subset_of(const expr_set& other) const;

  friend bool operator==(const expr_set& x, const expr_set& y) {
    return x.items_ == y.items_;
  }
  friend std::strong_ordering operator<=>(const expr_set& x,
                                          const expr_set& y);

 private:
  std::vector<expr> items_;
};

// Injective renaming between renameable index sets; reserved constants are
// identity by construction.
struct index_bijection {
  std::vector<std::pair<uint32_t, uint32_t>> map;  // sorted by .first

  std::optional<uint32_t> apply(uint32_t ren) const;
  index_term apply_term(index_term t) const;  // throws when undefined
  index_bijection inverse() const;
  static index_bijection identity_on(const std::vector<index_term>& idx);
};

std::vector<index_term> indices_of(const expr& e);
std::vector<index_term> indices_of(const expr_set& x);

bool is_b_inconsistent(const expr_set& x);
std::optional<std::pair<expr, expr>> find_complementary_pair(const expr_set& x);

// Def-3.4-style similarity search. All reserved constants are fixed no matter
// what `lv` contains; the parameter is kept for contract fidelity.
std::optional<index_bijection> are_similar(const expr_set& x,
                                           const expr_set& y,
                                           const std::vector<index_term>& lv = {});

expr_set apply_renaming(const expr_set& x, const index_bijection& b);
expr apply_renaming(const expr& e, const index_bijection& b);

index_term fresh_index(const expr_set& x);
uint32_t max_renameable(const expr_set& x);  // 0 when none

// Representative of the similarity class: renameable indices relabelled
// 1,2,3,... so that the relabelled, sorted set is minimal. Equal canonical
// forms iff similar.
expr_set canonical_form(const expr_set& x,
                        const std::vector<index_term>& lv = {});

std::string render_index(const index_term& t, const tab_language& lang);
std::string render_expr(const formula_store& store, const tab_language& lang,
                        const expr& e);
std::string render_set(const formula_store& store, const tab_language& lang,
                       const expr_set& x);

}  // namespace tabkit
