#include "tabkit/syntax.hpp"

#include <algorithm>
#include <cassert>

namespace tabkit {

const connective* signature::by_id(std::string_view id) const {
  for (const auto& c : connectives)
    if (c.id == id) return &c;
  return nullptr;
}

int signature::index_of(std::string_view id) const {
  for (size_t i = 0; i < connectives.size(); ++i)
    if (connectives[i].id == id) return static_cast<int>(i);
  return -1;
}

int signature::index_of_token(std::string_view token, fixity fix) const {
  for (size_t i = 0; i < connectives.size(); ++i)
    if (connectives[i].token == token && connectives[i].fix == fix)
      return static_cast<int>(i);
  return -1;
}

void signature::validate() const {
  for (size_t i = 0; i < connectives.size(); ++i) {
    const auto& c = connectives[i];
    if (c.arity < 0) throw std::invalid_argument("negative arity");
    if (c.arity == 1 && c.fix != fixity::prefix)
      throw std::invalid_argument("unary connectives must be prefix");
    if (c.arity == 2 && c.fix != fixity::infix)
      throw std::invalid_argument("binary connectives must be infix");
    for (size_t j = i + 1; j < connectives.size(); ++j) {
      if (connectives[j].id == c.id)
        throw std::invalid_argument("duplicate connective id: " + c.id);
      if (connectives[j].token == c.token && connectives[j].fix == c.fix)
        throw std::invalid_argument("ambiguous display token: " + c.token);
    }
  }
}

connective conn_not() { return {"not", 1, "!", fixity::prefix, 5, false}; }
connective conn_and() { return {"and", 2, "&", fixity::infix, 4, false}; }
connective conn_or() { return {"or", 2, "|", fixity::infix, 3, false}; }
connective conn_imp() { return {"imp", 2, "->", fixity::infix, 2, true}; }
connective conn_iff() { return {"iff", 2, "<->", fixity::infix, 1, false}; }
connective conn_diamond() { return {"dia", 1, "<>", fixity::prefix, 5, false}; }
connective conn_know() { return {"know", 1, "K", fixity::prefix, 5, false}; }

formula_store::formula_store(signature sig) : sig_(std::move(sig)) {
  sig_.validate();
}

void formula_store::clear() {
  nodes_.clear();
  var_names_.clear();
  var_nodes_.clear();
  var_index_.clear();
  app_index_.clear();
}

formula_id formula_store::var(std::string_view name) {
  auto it = var_index_.find(std::string(name));
  if (it != var_index_.end()) return var_nodes_[it->second];
  int vidx = static_cast<int>(var_names_.size());
  if (vidx >= 64) throw std::invalid_argument("too many variables (>=64)");
  var_names_.emplace_back(name);
  var_index_.emplace(std::string(name), vidx);
  node n{-1, vidx, no_formula, 0, uint64_t{1} << vidx};
  nodes_.push_back(n);
  formula_id f = static_cast<formula_id>(nodes_.size() - 1);
  var_nodes_.push_back(f);
  return f;
}

formula_id formula_store::app(int conn_idx, std::span<const formula_id> args) {
  const connective& c = sig_.connectives.at(conn_idx);
  if (static_cast<int>(args.size()) != c.arity)
    throw std::invalid_argument("arity mismatch for connective " + c.id);
  formula_id a = args.empty() ? no_formula : args[0];
  formula_id b = args.size() > 1 ? args[1] : no_formula;
  uint64_t key = (static_cast<uint64_t>(conn_idx) << 58) ^
                 (static_cast<uint64_t>(static_cast<uint32_t>(a)) << 29) ^
                 static_cast<uint64_t>(static_cast<uint32_t>(b + 1));
  auto& bucket = app_index_[key];
  for (formula_id f : bucket) {
    if (nodes_[f].conn == conn_idx && nodes_[f].a == a && nodes_[f].b == b)
      return f;
  }
  int d = 0;
  uint64_t mask = 0;
  for (formula_id x : args) {
    d = std::max(d, depth(x));
    mask |= nodes_[x].var_mask;
  }
  node n{static_cast<int16_t>(conn_idx), a, b,
         static_cast<uint8_t>(std::min(d + 1, 255)), mask};
  nodes_.push_back(n);
  formula_id f = static_cast<formula_id>(nodes_.size() - 1);
  bucket.push_back(f);
  return f;
}

formula_id formula_store::app1(int conn_idx, formula_id a) {
  formula_id args[1] = {a};
  return app(conn_idx, args);
}

formula_id formula_store::app2(int conn_idx, formula_id a, formula_id b) {
  formula_id args[2] = {a, b};
  return app(conn_idx, args);
}

const std::string& formula_store::var_name(formula_id f) const {
  return var_names_[nodes_[f].a];
}

std::optional<formula_id> formula_store::find_var(std::string_view name) const {
  auto it = var_index_.find(std::string(name));
  if (it == var_index_.end()) return std::nullopt;
  return var_nodes_[it->second];
}

const connective& formula_store::conn(formula_id f) const {
  return sig_.connectives[nodes_[f].conn];
}

int formula_store::arity(formula_id f) const {
  return nodes_[f].conn < 0 ? 0 : conn(f).arity;
}

formula_id formula_store::arg(formula_id f, int k) const {
  return k == 0 ? nodes_[f].a : nodes_[f].b;
}

namespace {

enum class tok : uint8_t {
  ident, bang, diamond, know, amp, pipe, arrow, iff, lparen, rparen, end
};

struct token {
  tok kind;
  size_t offset;
  std::string_view text;  // ident only
};

struct lexer {
  std::string_view s;
  size_t pos = 0;

  token next() {
    while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t' ||
                              s[pos] == '\n' || s[pos] == '\r'))
      ++pos;
    size_t at = pos;
    if (pos >= s.size()) return {tok::end, at, {}};
    char c = s[pos];
    if (c == '(') { ++pos; return {tok::lparen, at, {}}; }
    if (c == ')') { ++pos; return {tok::rparen, at, {}}; }
    if (c == '!') { ++pos; return {tok::bang, at, {}}; }
    if (c == '&') { ++pos; return {tok::amp, at, {}}; }
    if (c == '|') { ++pos; return {tok::pipe, at, {}}; }
    if (c == '-') {
      if (pos + 1 < s.size() && s[pos + 1] == '>') {
        pos += 2;
        return {tok::arrow, at, {}};
      }
      throw parse_error(at, "expected '->'");
    }
    if (c == '<') {
      if (pos + 2 < s.size() && s[pos + 1] == '-' && s[pos + 2] == '>') {
        pos += 3;
        return {tok::iff, at, {}};
      }
      if (pos + 1 < s.size() && s[pos + 1] == '>') {
        pos += 2;
        return {tok::diamond, at, {}};
      }
      throw parse_error(at, "expected '<->' or '<>'");
    }
    if (c == 'K') {
      ++pos;
      if (pos < s.size() && (isalnum(static_cast<unsigned char>(s[pos])) ||
                             s[pos] == '_'))
        throw parse_error(at, "'K' is reserved; write 'K p' with a space");
      return {tok::know, at, {}};
    }
    if (c >= 'a' && c <= 'z') {
      size_t b = pos;
      while (pos < s.size() &&
             ((s[pos] >= 'a' && s[pos] <= 'z') ||
              (s[pos] >= '0' && s[pos] <= '9') || s[pos] == '_'))
        ++pos;
      return {tok::ident, at, s.substr(b, pos - b)};
    }
    throw parse_error(at, std::string("unexpected character '") + c + "'");
  }
};

struct parser {
  formula_store& store;
  lexer lx;
  token cur;

  explicit parser(std::string_view text, formula_store& st)
      : store(st), lx{text} {
    cur = lx.next();
  }

  void advance() { cur = lx.next(); }

  int require_conn(const char* id, const char* tok_text, size_t at) {
    int idx = store.sig().index_of(id);
    if (idx < 0)
      throw parse_error(at, std::string("unknown connective '") + tok_text +
                                "' in this signature");
    return idx;
  }

  formula_id parse_unary() {
    switch (cur.kind) {
      case tok::bang: {
        size_t at = cur.offset;
        advance();
        int c = require_conn("not", "!", at);
        return store.app1(c, parse_unary());
      }
      case tok::diamond: {
        size_t at = cur.offset;
        advance();
        int c = require_conn("dia", "<>", at);
        return store.app1(c, parse_unary());
      }
      case tok::know: {
        size_t at = cur.offset;
        advance();
        int c = require_conn("know", "K", at);
        return store.app1(c, parse_unary());
      }
      case tok::ident: {
        formula_id f = store.var(cur.text);
        advance();
        return f;
      }
      case tok::lparen: {
        advance();
        formula_id f = parse_iff();
        if (cur.kind != tok::rparen)
          throw parse_error(cur.offset, "expected ')'");
        advance();
        return f;
      }
      default:
        throw parse_error(cur.offset, "expected a formula");
    }
  }

  formula_id parse_and() {
    formula_id f = parse_unary();
    while (cur.kind == tok::amp) {
      size_t at = cur.offset;
      advance();
      int c = require_conn("and", "&", at);
      f = store.app2(c, f, parse_unary());
    }
    return f;
  }

  formula_id parse_or() {
    formula_id f = parse_and();
    while (cur.kind == tok::pipe) {
      size_t at = cur.offset;
      advance();
      int c = require_conn("or", "|", at);
      f = store.app2(c, f, parse_and());
    }
    return f;
  }

  formula_id parse_imp() {
    formula_id f = parse_or();
    if (cur.kind == tok::arrow) {
      size_t at = cur.offset;
      advance();
      int c = require_conn("imp", "->", at);
      return store.app2(c, f, parse_imp());  // right-assoc
    }
    return f;
  }

  formula_id parse_iff() {
    formula_id f = parse_imp();
    while (cur.kind == tok::iff) {
      size_t at = cur.offset;
      advance();
      int c = require_conn("iff", "<->", at);
      f = store.app2(c, f, parse_imp());
    }
    return f;
  }
};

}  // namespace

formula_id parse_formula(std::string_view text, formula_store& store) {
  parser p(text, store);
  if (p.cur.kind == tok::end) throw parse_error(0, "empty input");
  formula_id f = p.parse_iff();
  if (p.cur.kind != tok::end)
    throw parse_error(p.cur.offset, "trailing input");
  return f;
}

namespace {

void render_rec(const formula_store& st, formula_id f, int ctx_prec,
                bool as_right_child, std::string& out) {
  if (st.is_var(f)) {
    out += st.var_name(f);
    return;
  }
  const connective& c = st.conn(f);
  if (c.arity == 1) {
    out += c.token;
    if (c.token.back() >= 'a' || isalpha(static_cast<unsigned char>(c.token.back())))
      out += ' ';  // word-like prefix tokens need a separator (K)
    formula_id a = st.arg(f, 0);
    bool wrap = !st.is_var(a) && st.conn(a).arity == 2;
    if (wrap) out += '(';
    render_rec(st, a, wrap ? -1 : c.prec, false, out);
    if (wrap) out += ')';
    return;
  }
  bool wrap;
  if (ctx_prec < 0) {
    wrap = false;
  } else if (c.prec != ctx_prec) {
    wrap = c.prec < ctx_prec;
  } else {
    // equal precedence: parenthesize against associativity
    wrap = as_right_child != c.right_assoc;
  }
  if (wrap) out += '(';
  render_rec(st, st.arg(f, 0), c.prec, false, out);
  out += ' ';
  out += c.token;
  out += ' ';
  render_rec(st, st.arg(f, 1), c.prec, true, out);
  if (wrap) out += ')';
}

}  // namespace

std::string render_formula(const formula_store& store, formula_id f) {
  std::string out;
  render_rec(store, f, -1, false, out);
  return out;
}

namespace {
void vars_rec(const formula_store& st, formula_id f, uint64_t& seen,
              std::vector<int>& out) {
  if (st.is_var(f)) {
    uint64_t bit = uint64_t{1} << st.var_index(f);
    if (!(seen & bit)) {
      seen |= bit;
      out.push_back(st.var_index(f));
    }
    return;
  }
  for (int k = 0; k < st.arity(f); ++k) vars_rec(st, st.arg(f, k), seen, out);
}
}  // namespace

std::vector<int> vars_of(const formula_store& store, formula_id f) {
  std::vector<int> out;
  uint64_t seen = 0;
  vars_rec(store, f, seen, out);
  return out;
}

namespace {
void encode_rec(const formula_store& st, formula_id f, formula_code& out) {
  if (st.is_var(f)) {
    out.push_back(static_cast<uint8_t>(st.var_index(f)));
    return;
  }
  for (int k = 0; k < st.arity(f); ++k) encode_rec(st, st.arg(f, k), out);
  out.push_back(static_cast<uint8_t>(0x80 | st.conn_index(f)));
}
}  // namespace

formula_code encode_formula(const formula_store& store, formula_id f) {
  formula_code out;
  encode_rec(store, f, out);
  return out;
}

formula_id decode_formula(const formula_code& code, formula_store& store,
                          std::span<const std::string> var_names) {
  std::vector<formula_id> stack;
  for (uint8_t b : code) {
    if (b & 0x80) {
      int conn = b & 0x7f;
      int ar = store.sig().connectives.at(conn).arity;
      if (static_cast<int>(stack.size()) < ar)
        throw std::invalid_argument("bad formula code");
      if (ar == 1) {
        stack.back() = store.app1(conn, stack.back());
      } else {
        formula_id rhs = stack.back();
        stack.pop_back();
        stack.back() = store.app2(conn, stack.back(), rhs);
      }
    } else {
      stack.push_back(store.var(var_names[b]));
    }
  }
  if (stack.size() != 1) throw std::invalid_argument("bad formula code");
  return stack[0];
}

formula_code_enumerator::formula_code_enumerator(const signature& sig,
                                                 int num_vars, int max_depth)
    : sig_(sig), num_vars_(num_vars), max_depth_(max_depth) {
  if (num_vars_ <= 0) throw std::invalid_argument("need at least one variable");
  build_levels();
}

void formula_code_enumerator::build_levels() {
  // levels_[d] = codes of exact depth d, for every d < max_depth_
  levels_.resize(std::max(max_depth_, 1));
  for (int v = 0; v < num_vars_; ++v)
    levels_[0].push_back({static_cast<uint8_t>(v)});
  for (int d = 1; d < max_depth_; ++d) {
    std::vector<std::pair<const formula_code*, int>> below;  // (code, depth)
    for (int e = 0; e < d; ++e)
      for (const auto& cc : levels_[e]) below.push_back({&cc, e});
    for (size_t ci = 0; ci < sig_.connectives.size(); ++ci) {
      const connective& c = sig_.connectives[ci];
      uint8_t op = static_cast<uint8_t>(0x80 | ci);
      if (c.arity == 1) {
        for (const auto& a : levels_[d - 1]) {
          formula_code f = a;
          f.push_back(op);
          levels_[d].push_back(std::move(f));
        }
      } else if (c.arity == 2) {
        for (auto& [pa, ea] : below) {
          for (auto& [pb, eb] : below) {
            if (std::max(ea, eb) != d - 1) continue;
            formula_code f = *pa;
            f.insert(f.end(), pb->begin(), pb->end());
            f.push_back(op);
            levels_[d].push_back(std::move(f));
          }
        }
      }
    }
  }
}

bool formula_code_enumerator::next(formula_code& out) {
  if (done_) return false;
  // depths strictly below max_depth_ come from the materialized levels
  while (cur_depth_ < max_depth_) {
    auto& lvl = levels_[cur_depth_];
    if (a_i_ < lvl.size()) {
      out = lvl[a_i_++];
      return true;
    }
    ++cur_depth_;
    a_i_ = 0;
  }
  // top level: generated on the fly over (connective, left, right)
  if (max_depth_ == 0) {
    done_ = true;
    return false;
  }
  struct view {
    const std::vector<std::vector<formula_code>>* levels;
    int max_d;
    size_t total = 0;
    view(const std::vector<std::vector<formula_code>>* l, int m)
        : levels(l), max_d(m) {
      for (int e = 0; e < m; ++e) total += (*levels)[e].size();
    }
    const formula_code& at(size_t i, int& exact_depth) const {
      for (int e = 0; e < max_d; ++e) {
        if (i < (*levels)[e].size()) {
          exact_depth = e;
          return (*levels)[e][i];
        }
        i -= (*levels)[e].size();
      }
      throw std::out_of_range("enumerator index");
    }
  };
  view below(&levels_, max_depth_);
  int d = max_depth_;
  while (conn_i_ < sig_.connectives.size()) {
    const connective& c = sig_.connectives[conn_i_];
    uint8_t op = static_cast<uint8_t>(0x80 | conn_i_);
    if (c.arity == 1) {
      auto& prev = levels_[d - 1];
      if (a_i_ < prev.size()) {
        out = prev[a_i_++];
        out.push_back(op);
        return true;
      }
      ++conn_i_;
      a_i_ = 0;
      b_i_ = 0;
      continue;
    }
    // binary: pairs with max(exact depths) == d-1
    while (a_i_ < below.total) {
      int ea = 0, eb = 0;
      const formula_code& a = below.at(a_i_, ea);
      while (b_i_ < below.total) {
        const formula_code& b = below.at(b_i_, eb);
        ++b_i_;
        if (std::max(ea, eb) != d - 1) continue;
        out = a;
        out.insert(out.end(), b.begin(), b.end());
        out.push_back(op);
        return true;
      }
      b_i_ = 0;
      ++a_i_;
    }
    ++conn_i_;
    a_i_ = 0;
    b_i_ = 0;
  }
  done_ = true;
  return false;
}

formula_enumerator::formula_enumerator(formula_store& store,
                                       std::vector<std::string> vars,
                                       int max_depth)
    : store_(store),
      vars_(std::move(vars)),
      codes_(store.sig(), static_cast<int>(vars_.size()), max_depth) {}

std::optional<formula_id> formula_enumerator::next() {
  if (!codes_.next(buf_)) return std::nullopt;
  return decode_formula(buf_, store_, vars_);
}

}  // namespace tabkit
