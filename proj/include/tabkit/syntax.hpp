#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tabkit {

enum class fixity : uint8_t { prefix, infix };

// A propositional connective with its concrete ASCII surface.
// prec: higher binds tighter. right_assoc only matters for infix.
struct connective {
  std::string id;
  int arity = 1;
  std::string token;
  fixity fix = fixity::prefix;
  int prec = 5;
  bool right_assoc = false;
};

struct signature {
  std::vector<connective> connectives;

  const connective* by_id(std::string_view id) const;
  int index_of(std::string_view id) const;  // -1 when absent
  int index_of_token(std::string_view token, fixity fix) const;
  void validate() const;
};

// Standard connective builders shared by the bundled signatures.
connective conn_not();
connective conn_and();
connective conn_or();
connective conn_imp();
connective conn_iff();
connective conn_diamond();
connective conn_know();

using formula_id = int32_t;
constexpr formula_id no_formula = -1;

struct parse_error : std::runtime_error {
  size_t offset;
  parse_error(size_t off, const std::string& msg)
      : std::runtime_error(msg), offset(off) {}
};

// Interned formula forest over one signature. Structural equality is id
// equality. ids are assigned in first-construction order, which is the
// canonical total order used everywhere downstream.
class formula_store {
 public:
  explicit formula_store(signature sig);

  const signature& sig() const { return sig_; }

  formula_id var(std::string_view name);
  formula_id app(int conn_idx, std::span<const formula_id> args);
  formula_id app1(int conn_idx, formula_id a);
  formula_id app2(int conn_idx, formula_id a, formula_id b);

  bool is_var(formula_id f) const { return nodes_[f].conn < 0; }
  // variable accessors
  int var_index(formula_id f) const { return nodes_[f].a; }
  const std::string& var_name(formula_id f) const;
  const std::string& var_name_by_index(int vi) const { return var_names_[vi]; }
  formula_id var_node(int vi) const { return var_nodes_[vi]; }
  int var_count() const { return static_cast<int>(var_names_.size()); }
  std::optional<formula_id> find_var(std::string_view name) const;
  // application accessors
  int conn_index(formula_id f) const { return nodes_[f].conn; }
  const connective& conn(formula_id f) const;
  int arity(formula_id f) const;
  formula_id arg(formula_id f, int k) const;

  int depth(formula_id f) const { return nodes_[f].depth; }
  uint64_t var_mask(formula_id f) const { return nodes_[f].var_mask; }
  int32_t size() const { return static_cast<int32_t>(nodes_.size()); }

  void clear();

 private:
  struct node {
    int16_t conn;  // -1 => variable, else signature connective index
    formula_id a;  // var: variable index; app: first arg
    formula_id b;  // app with arity 2: second arg, else no_formula
    uint8_t depth;
    uint64_t var_mask;
  };
  signature sig_;
  std::vector<node> nodes_;
  std::vector<std::string> var_names_;
  std::vector<formula_id> var_nodes_;
  std::unordered_map<std::string, int> var_index_;
  std::unordered_map<uint64_t, std::vector<formula_id>> app_index_;
};

formula_id parse_formula(std::string_view text, formula_store& store);
std::string render_formula(const formula_store& store, formula_id f);

// Variable ids in first-occurrence order (duplicates removed). The order is
// load-bearing: branching rules that split per variable follow it.
std::vector<int> vars_of(const formula_store& store, formula_id f);

// Compact structure-only formula encoding (postfix bytes), used to stream
// large enumerations without interning every formula.
using formula_code = std::vector<uint8_t>;

formula_code encode_formula(const formula_store& store, formula_id f);
formula_id decode_formula(const formula_code& code, formula_store& store,
                          std::span<const std::string> var_names);

// Streams every formula of depth <= max_depth over the given variables,
// exactly once, depth-major then lexicographic. Levels below the maximum are
// materialized; the top level is generated on the fly.
class formula_code_enumerator {
 public:
  formula_code_enumerator(const signature& sig, int num_vars, int max_depth);
  bool next(formula_code& out);

 private:
  const signature sig_;
  int num_vars_;
  int max_depth_;
  // codes of depth <= d for d < max_depth_, flattened per exact depth
  std::vector<std::vector<formula_code>> levels_;
  int cur_depth_ = 0;
  size_t conn_i_ = 0, a_i_ = 0, b_i_ = 0;
  bool done_ = false;
  void build_levels();
};

// Store-backed stream per the module contract; delegates to the code
// enumerator and interns each item.
class formula_enumerator {
 public:
  formula_enumerator(formula_store& store, std::vector<std::string> vars,
                     int max_depth);
  std::optional<formula_id> next();

 private:
  formula_store& store_;
  std::vector<std::string> vars_;
  formula_code_enumerator codes_;
  formula_code buf_;
};

}  // namespace tabkit
