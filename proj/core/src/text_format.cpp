#include "mmrt/text_format.hpp"

#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace mmrt {

namespace {

const std::set<std::string, std::less<>> kReserved = {
    "megamodel", "model", "initial", "final",  "decision", "op",     "call",   "else",      "as",
    "name",      "map",   "behavior", "status", "reads",    "writes", "annotates",
};

enum class Tok { Ident, String, LBrace, RBrace, Semi, Colon, Comma, Equals, Dot, Arrow, LBracket, End };

struct Token {
  Tok kind;
  std::string text;
  SourceSpan span;
};

class Scanner {
 public:
  Scanner(std::string_view text, std::string_view file) : text_(text), file_(file) {}

  SourceSpan here() const { return {file_, line_, col_}; }

  const Token& peek() {
    if (!lookahead_) lookahead_ = scan();
    return *lookahead_;
  }

  Token next() {
    Token t = peek();
    lookahead_.reset();
    return t;
  }

  // Raw condition text after a '[' token, up to the matching ']'.
  std::pair<std::string, SourceSpan> condition_body() {
    SourceSpan start = here();
    std::string body;
    while (pos_ < text_.size() && text_[pos_] != ']') body.push_back(advance());
    if (pos_ >= text_.size()) throw Error("ERR_SYNTAX", syntax_message(start, "unterminated condition"), start);
    advance();
    return {body, start};
  }

  static std::string syntax_message(const SourceSpan& at, const std::string& what) {
    std::ostringstream os;
    os << at << ": " << what;
    return os.str();
  }

 private:
  char advance() {
    char c = text_[pos_++];
    if (c == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    return c;
  }

  void skip_space() {
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (c == '#') {
        while (pos_ < text_.size() && text_[pos_] != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }

  Token scan() {
    skip_space();
    SourceSpan at = here();
    if (pos_ >= text_.size()) return {Tok::End, "<end of input>", at};
    char c = text_[pos_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::string id;
      while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
        id.push_back(advance());
      }
      return {Tok::Ident, id, at};
    }
    if (c == '"') {
      advance();
      std::string s;
      for (;;) {
        if (pos_ >= text_.size() || text_[pos_] == '\n') {
          throw Error("ERR_SYNTAX", syntax_message(at, "unterminated string"), at);
        }
        char d = advance();
        if (d == '"') break;
        if (d == '\\') {
          if (pos_ >= text_.size()) throw Error("ERR_SYNTAX", syntax_message(at, "unterminated string"), at);
          char e = advance();
          if (e == 'n') s.push_back('\n');
          else if (e == '"' || e == '\\') s.push_back(e);
          else throw Error("ERR_SYNTAX", syntax_message(at, std::string("unknown escape \\") + e), at);
        } else {
          s.push_back(d);
        }
      }
      return {Tok::String, s, at};
    }
    advance();
    switch (c) {
      case '{': return {Tok::LBrace, "{", at};
      case '}': return {Tok::RBrace, "}", at};
      case ';': return {Tok::Semi, ";", at};
      case ':': return {Tok::Colon, ":", at};
      case ',': return {Tok::Comma, ",", at};
      case '=': return {Tok::Equals, "=", at};
      case '.': return {Tok::Dot, ".", at};
      case '[': return {Tok::LBracket, "[", at};
      case '-':
        if (pos_ < text_.size() && text_[pos_] == '>') {
          advance();
          return {Tok::Arrow, "->", at};
        }
        break;
      default: break;
    }
    throw Error("ERR_SYNTAX", syntax_message(at, std::string("unexpected character '") + c + "'"), at);
  }

  std::string_view text_;
  std::string file_;
  std::size_t pos_ = 0;
  std::uint32_t line_ = 1;
  std::uint32_t col_ = 1;
  std::optional<Token> lookahead_;
};

class MegamodelParser {
 public:
  MegamodelParser(std::string_view text, std::string_view file) : scan_(text, file) {}

  std::vector<MegamodelDef> parse_file() {
    std::vector<MegamodelDef> defs;
    std::set<std::string> names;
    while (scan_.peek().kind != Tok::End) {
      Token kw = expect_keyword("megamodel");
      MegamodelDef def = parse_megamodel(kw.span);
      if (!names.insert(def.name).second) {
        throw Error("ERR_DUP_NAME", Scanner::syntax_message(def.span, "duplicate megamodel '" + def.name + "'"), def.span);
      }
      defs.push_back(std::move(def));
    }
    return defs;
  }

 private:
  [[noreturn]] void fail(const Token& at, const std::string& what) {
    throw Error("ERR_SYNTAX", Scanner::syntax_message(at.span, what + ", found '" + at.text + "'"), at.span);
  }

  Token expect(Tok kind, const char* what) {
    if (scan_.peek().kind != kind) fail(scan_.peek(), std::string("expected ") + what);
    return scan_.next();
  }

  Token expect_keyword(std::string_view kw) {
    const Token& t = scan_.peek();
    if (t.kind != Tok::Ident || t.text != kw) fail(t, "expected '" + std::string(kw) + "'");
    return scan_.next();
  }

  bool accept(Tok kind) {
    if (scan_.peek().kind != kind) return false;
    scan_.next();
    return true;
  }

  bool at_keyword(std::string_view kw) {
    const Token& t = scan_.peek();
    return t.kind == Tok::Ident && t.text == kw;
  }

  Token identifier(const char* what) {
    Token t = expect(Tok::Ident, what);
    if (kReserved.count(t.text) != 0) fail(t, std::string("expected ") + what + " (reserved word)");
    return t;
  }

  std::string optional_name(const std::string& id) {
    if (!at_keyword("name")) return id;
    scan_.next();
    return expect(Tok::String, "quoted name").text;
  }

  MegamodelDef parse_megamodel(const SourceSpan& start) {
    MegamodelDef def;
    def.span = start;
    def.name = identifier("megamodel name").text;
    expect(Tok::LBrace, "'{'");
    std::vector<std::pair<std::optional<Token>, std::size_t>> explicit_ids;
    while (!accept(Tok::RBrace)) {
      const Token& t = scan_.peek();
      if (t.kind == Tok::End) fail(t, "expected '}'");
      if (t.kind != Tok::Ident) fail(t, "expected a declaration or transition");
      if (t.text == "model") {
        parse_model(def);
      } else if (t.text == "initial" || t.text == "final" || t.text == "decision") {
        parse_simple_op(def);
      } else if (t.text == "op") {
        parse_model_op(def);
      } else if (t.text == "call") {
        parse_call(def);
      } else {
        auto as_id = parse_transition(def);
        explicit_ids.emplace_back(std::move(as_id), def.transitions.size() - 1);
      }
    }
    // Transition ids depend on operation kinds, which may be declared later.
    for (auto& [as_id, index] : explicit_ids) {
      Transition& tr = def.transitions[index];
      tr.id = as_id ? as_id->text : derived_transition_id(def, tr);
    }
    check_unique(def);
    return def;
  }

  void check_unique(const MegamodelDef& def) {
    std::set<std::string> ids;
    auto visit = [&](const std::string& id, const SourceSpan& span) {
      if (!ids.insert(id).second) {
        throw Error("ERR_DUP_NAME", Scanner::syntax_message(span, "duplicate element '" + id + "' in " + def.name), span);
      }
    };
    for (const auto& m : def.models) visit(m.id, m.span);
    for (const auto& op : def.operations) visit(op.id, op.span);
    for (const auto& t : def.transitions) visit(t.id, t.span);
  }

  void parse_model(MegamodelDef& def) {
    Token kw = scan_.next();
    ModelDecl m;
    m.span = kw.span;
    m.id = identifier("model id").text;
    m.name = optional_name(m.id);
    if (accept(Tok::Colon)) {
      do {
        m.stereotypes.push_back(identifier("stereotype").text);
      } while (accept(Tok::Comma));
    }
    if (accept(Tok::Equals)) {
      expect_keyword("megamodel");
      m.payload_kind = PayloadKind::Megamodel;
      m.megamodel_ref = identifier("megamodel name").text;
    }
    expect(Tok::Semi, "';'");
    def.models.push_back(std::move(m));
  }

  void parse_simple_op(MegamodelDef& def) {
    Token kw = scan_.next();
    Operation op;
    op.span = kw.span;
    op.id = identifier("operation id").text;
    op.name = optional_name(op.id);
    if (kw.text == "initial") op.kind = InitialOp{};
    else if (kw.text == "final") op.kind = FinalOp{};
    else op.kind = DecisionOp{};
    expect(Tok::Semi, "';'");
    def.operations.push_back(std::move(op));
  }

  void parse_model_op(MegamodelDef& def) {
    Token kw = scan_.next();
    Operation op;
    op.span = kw.span;
    op.id = identifier("operation id").text;
    op.name = optional_name(op.id);
    expect(Tok::Colon, "':'");
    Token step_tok = expect(Tok::Ident, "step kind");
    auto step = step_kind_from(step_tok.text);
    if (!step) fail(step_tok, "expected Monitor, Analyze, Plan, Execute or Other");
    ModelOp mop;
    mop.step = *step;
    expect_keyword("behavior");
    mop.behavior = expect(Tok::String, "quoted behavior key").text;
    expect(Tok::LBrace, "'{'");
    while (!accept(Tok::RBrace)) {
      Token item = expect(Tok::Ident, "'reads', 'writes', 'annotates' or 'status'");
      if (item.text == "status") {
        do {
          mop.statuses.push_back(identifier("status").text);
        } while (accept(Tok::Comma));
      } else if (item.text == "reads" || item.text == "writes" || item.text == "annotates") {
        UseMode mode = item.text == "reads" ? UseMode::Read : item.text == "writes" ? UseMode::Write : UseMode::Annotate;
        do {
          mop.uses.push_back({identifier("model id").text, mode});
        } while (accept(Tok::Comma));
      } else {
        fail(item, "expected 'reads', 'writes', 'annotates' or 'status'");
      }
      expect(Tok::Semi, "';'");
    }
    op.kind = std::move(mop);
    def.operations.push_back(std::move(op));
  }

  void parse_call(MegamodelDef& def) {
    Token kw = scan_.next();
    Operation op;
    op.span = kw.span;
    op.id = identifier("operation id").text;
    op.name = optional_name(op.id);
    expect(Tok::Equals, "'='");
    MegamodelCall call;
    call.callee = identifier("megamodel name").text;
    expect(Tok::Dot, "'.'");
    call.entry = identifier("initial operation").text;
    expect_keyword("map");
    expect(Tok::LBrace, "'{'");
    if (!accept(Tok::RBrace)) {
      do {
        std::string fin = identifier("final operation").text;
        expect(Tok::Arrow, "'->'");
        call.final_mapping.emplace_back(std::move(fin), identifier("status").text);
      } while (accept(Tok::Comma));
      expect(Tok::RBrace, "'}'");
    }
    expect(Tok::Semi, "';'");
    op.kind = std::move(call);
    def.operations.push_back(std::move(op));
  }

  std::optional<Token> parse_transition(MegamodelDef& def) {
    Transition t;
    Token src = identifier("operation id");
    t.span = src.span;
    t.source = src.text;
    if (accept(Tok::Dot)) t.status = identifier("status").text;
    expect(Tok::Arrow, "'->'");
    if (at_keyword("else")) {
      scan_.next();
      t.is_default = true;
    } else if (accept(Tok::LBracket)) {
      auto [body, at] = scan_.condition_body();
      t.condition = cond::parse_condition(body, at);
    }
    t.target = identifier("target operation").text;
    std::optional<Token> as_id;
    if (at_keyword("as")) {
      scan_.next();
      Token id = identifier("transition id");
      if (accept(Tok::Dot)) id.text += "." + identifier("transition id").text;
      as_id = id;
    }
    expect(Tok::Semi, "';'");
    def.transitions.push_back(std::move(t));
    return as_id;
  }

  Scanner scan_;
};

std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_name(std::ostream& os, const std::string& id, const std::string& name) {
  if (name != id) os << " name " << quote(name);
}

void write_def(std::ostream& os, const MegamodelDef& def) {
  os << "megamodel " << def.name << " {\n";
  for (const auto& m : def.models) {
    os << "  model " << m.id;
    write_name(os, m.id, m.name);
    for (std::size_t i = 0; i < m.stereotypes.size(); ++i) os << (i == 0 ? " : " : ", ") << m.stereotypes[i];
    if (m.megamodel_ref) os << " = megamodel " << *m.megamodel_ref;
    os << ";\n";
  }
  for (const auto& op : def.operations) {
    std::visit(
        [&](const auto& k) {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, InitialOp>) {
            os << "  initial " << op.id;
            write_name(os, op.id, op.name);
            os << ";\n";
          } else if constexpr (std::is_same_v<T, FinalOp>) {
            os << "  final " << op.id;
            write_name(os, op.id, op.name);
            os << ";\n";
          } else if constexpr (std::is_same_v<T, DecisionOp>) {
            os << "  decision " << op.id;
            write_name(os, op.id, op.name);
            os << ";\n";
          } else if constexpr (std::is_same_v<T, ModelOp>) {
            os << "  op " << op.id;
            write_name(os, op.id, op.name);
            os << " : " << to_string(k.step) << " behavior " << quote(k.behavior) << " {\n";
            for (const auto& u : k.uses) os << "    " << to_string(u.mode) << ' ' << u.model << ";\n";
            os << "    status ";
            for (std::size_t i = 0; i < k.statuses.size(); ++i) os << (i == 0 ? "" : ", ") << k.statuses[i];
            os << ";\n  }\n";
          } else {
            os << "  call " << op.id;
            write_name(os, op.id, op.name);
            os << " = " << k.callee << '.' << k.entry << " map {";
            for (std::size_t i = 0; i < k.final_mapping.size(); ++i) {
              os << (i == 0 ? " " : ", ") << k.final_mapping[i].first << " -> " << k.final_mapping[i].second;
            }
            os << (k.final_mapping.empty() ? "};\n" : " };\n");
          }
        },
        op.kind);
  }
  for (const auto& t : def.transitions) {
    os << "  " << t.source;
    if (t.status) os << '.' << *t.status;
    os << " -> ";
    if (t.is_default) os << "else ";
    if (t.condition) os << '[' << cond::print(*t.condition) << "] ";
    os << t.target;
    if (t.id != derived_transition_id(def, t)) os << " as " << t.id;
    os << ";\n";
  }
  os << "}\n";
}

}  // namespace

std::vector<MegamodelDef> parse_megamodels(std::string_view text, std::string_view file) {
  return MegamodelParser(text, file).parse_file();
}

std::string serialize(const std::vector<MegamodelDef>& defs) {
  std::ostringstream os;
  for (std::size_t i = 0; i < defs.size(); ++i) {
    if (i != 0) os << '\n';
    write_def(os, defs[i]);
  }
  return os.str();
}

std::string serialize(const MegamodelDef& def) { return serialize(std::vector<MegamodelDef>{def}); }

std::vector<MegamodelDef> load_megamodel_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("ERR_IO", "cannot read '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw Error("ERR_IO", "cannot read '" + path + "'");
  return parse_megamodels(buf.str(), path);
}

}  // namespace mmrt
