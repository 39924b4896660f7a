#include "medrails/rail_dsl.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <unordered_set>

namespace medrails {

namespace {

constexpr std::string_view kVersionHeader = "rails/1";

bool is_ident_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}

bool is_ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

// Cursor over one logical line; columns are 1-based bytes.
class LineCursor {
  public:
    LineCursor(std::string_view text, int line) : text_(text), line_(line) {}

    void skip_ws() {
        while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_;
    }

    bool at_end() {
        skip_ws();
        return pos_ >= text_.size();
    }

    int col() const { return static_cast<int>(pos_) + 1; }
    int line() const { return line_; }

    char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

    bool consume(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    [[noreturn]] void fail(const std::string& message) const {
        throw RailParseError(RailParseError::Kind::Syntax, line_, col(), message);
    }

    std::string expect_word() {
        skip_ws();
        size_t start = pos_;
        while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_])) &&
               text_[pos_] != ':' && text_[pos_] != '=')
            ++pos_;
        if (pos_ == start) fail("expected a word");
        return std::string(text_.substr(start, pos_ - start));
    }

    std::string expect_identifier(const char* what) {
        skip_ws();
        size_t start = pos_;
        if (pos_ >= text_.size() || !is_ident_start(text_[pos_]))
            fail(std::string("expected ") + what);
        while (pos_ < text_.size() && is_ident_char(text_[pos_])) ++pos_;
        return std::string(text_.substr(start, pos_ - start));
    }

    // Quoted string with \" and \\ escapes only.
    std::string expect_string() {
        skip_ws();
        if (pos_ >= text_.size() || text_[pos_] != '"') fail("expected opening '\"'");
        ++pos_;
        std::string out;
        while (pos_ < text_.size()) {
            char c = text_[pos_];
            if (c == '"') {
                ++pos_;
                return out;
            }
            if (c == '\\') {
                if (pos_ + 1 >= text_.size()) fail("dangling escape");
                char esc = text_[pos_ + 1];
                if (esc != '"' && esc != '\\')
                    fail(std::string("unsupported escape '\\") + esc + "'");
                out.push_back(esc);
                pos_ += 2;
                continue;
            }
            out.push_back(c);
            ++pos_;
        }
        fail("unterminated string");
    }

    void expect_end(const char* construct) {
        skip_ws();
        if (pos_ < text_.size())
            fail(std::string("unexpected trailing text after ") + construct);
    }

  private:
    std::string_view text_;
    size_t pos_ = 0;
    int line_;
};

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    size_t start = 0;
    while (start <= text.size()) {
        size_t nl = text.find('\n', start);
        std::string_view line =
            nl == std::string_view::npos ? text.substr(start) : text.substr(start, nl - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(line);
        if (nl == std::string_view::npos) break;
        start = nl + 1;
    }
    return lines;
}

bool blank_or_comment(std::string_view line) {
    for (char c : line) {
        if (c == ' ' || c == '\t') continue;
        return c == '#';
    }
    return true;
}

void escape_into(std::string& out, std::string_view s) {
    out.push_back('"');
    for (char c : s) {
        if (c == '"' || c == '\\') out.push_back('\\');
        out.push_back(c);
    }
    out.push_back('"');
}

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace

const CanonicalForm* RailSpec::find_form(std::string_view name) const {
    for (const auto& f : forms)
        if (f.name == name) return &f;
    return nullptr;
}

const FlowRule* RailSpec::find_flow(std::string_view trigger) const {
    for (const auto& f : flows)
        if (f.trigger == trigger) return &f;
    return nullptr;
}

RailParseError::RailParseError(Kind kind, int line, int col, std::string message,
                               std::string name)
    : std::runtime_error("rails:" + std::to_string(line) + ":" + std::to_string(col) + ": " +
                         message),
      kind_(kind),
      line_(line),
      col_(col),
      name_(std::move(name)) {}

RailSpec parse_rail_source(std::string_view text) {
    RailSpec spec;
    const auto lines = split_lines(text);

    bool saw_header = false;
    bool saw_param_k = false;
    bool saw_param_tau = false;
    CanonicalForm* open_form = nullptr;
    std::unordered_set<std::string> form_names;

    for (size_t i = 0; i < lines.size(); ++i) {
        const int lineno = static_cast<int>(i) + 1;
        if (blank_or_comment(lines[i])) continue;

        LineCursor cur(lines[i], lineno);
        if (!saw_header) {
            cur.skip_ws();
            std::string word = cur.expect_word();
            if (word != kVersionHeader)
                throw RailParseError(RailParseError::Kind::Syntax, lineno, 1,
                                     "expected version header 'rails/1'");
            cur.expect_end("version header");
            saw_header = true;
            continue;
        }

        const std::string keyword = cur.expect_identifier("a keyword");
        if (keyword == "param") {
            const int key_col = cur.col();
            std::string key = cur.expect_identifier("param name");
            if (!cur.consume('='))
                cur.fail("expected '=' after param name");
            std::string value = cur.expect_word();
            cur.expect_end("param");
            if (key == "k") {
                if (saw_param_k)
                    throw RailParseError(RailParseError::Kind::Syntax, lineno, key_col,
                                         "duplicate param k");
                int k = 0;
                auto res = std::from_chars(value.data(), value.data() + value.size(), k);
                if (res.ec != std::errc() || res.ptr != value.data() + value.size())
                    throw RailParseError(RailParseError::Kind::Syntax, lineno, key_col,
                                         "param k must be an integer");
                spec.params.k = k;
                saw_param_k = true;
            } else if (key == "tau") {
                if (saw_param_tau)
                    throw RailParseError(RailParseError::Kind::Syntax, lineno, key_col,
                                         "duplicate param tau");
                double tau = 0.0;
                auto res = std::from_chars(value.data(), value.data() + value.size(), tau);
                if (res.ec != std::errc() || res.ptr != value.data() + value.size())
                    throw RailParseError(RailParseError::Kind::Syntax, lineno, key_col,
                                         "param tau must be a real number");
                spec.params.tau = tau;
                saw_param_tau = true;
            } else {
                throw RailParseError(RailParseError::Kind::Syntax, lineno, key_col,
                                     "unknown param '" + key + "' (expected k or tau)");
            }
        } else if (keyword == "form") {
            CanonicalForm form;
            form.pos = {lineno, 1};
            const int kind_col = cur.col();
            std::string kind = cur.expect_identifier("form kind");
            if (kind == "user_intent") {
                form.kind = FormKind::UserIntent;
            } else if (kind == "attack_pattern") {
                form.kind = FormKind::AttackPattern;
            } else {
                throw RailParseError(RailParseError::Kind::Syntax, lineno, kind_col,
                                     "unknown form kind '" + kind +
                                         "' (expected user_intent or attack_pattern)");
            }
            form.name = cur.expect_identifier("form name");
            cur.skip_ws();
            if (cur.peek() != ':') {
                const int cat_col = cur.col();
                std::string key = cur.expect_identifier("'category'");
                if (key != "category")
                    throw RailParseError(RailParseError::Kind::Syntax, lineno, cat_col,
                                         "expected category=<label> or ':'");
                if (!cur.consume('=')) cur.fail("expected '=' after category");
                const int label_col = cur.col();
                std::string label = cur.expect_word();
                auto parsed = try_parse_any_label(label);
                if (!parsed)
                    throw RailParseError(RailParseError::Kind::Syntax, lineno, label_col,
                                         "unknown taxonomy label '" + label + "'");
                form.category = *parsed;
            }
            if (!cur.consume(':')) cur.fail("expected ':' at end of form header");
            cur.expect_end("form header");

            if (form_names.count(form.name))
                throw RailParseError(RailParseError::Kind::DuplicateForm, lineno, 1,
                                     "duplicate form '" + form.name + "'", form.name);
            if (form.kind == FormKind::AttackPattern && !form.category)
                throw RailParseError(RailParseError::Kind::MissingCategory, lineno, 1,
                                     "attack_pattern form '" + form.name +
                                         "' requires category=<label>",
                                     form.name);
            form_names.insert(form.name);
            spec.forms.push_back(std::move(form));
            open_form = &spec.forms.back();
        } else if (keyword == "ex") {
            if (open_form == nullptr)
                throw RailParseError(RailParseError::Kind::Syntax, lineno, 1,
                                     "'ex' outside of a form block");
            std::string utterance = cur.expect_string();
            cur.expect_end("example");
            open_form->examples.push_back(std::move(utterance));
        } else if (keyword == "flow") {
            open_form = nullptr;
            FlowRule flow;
            flow.pos = {lineno, 1};
            flow.trigger = cur.expect_identifier("flow trigger");
            cur.skip_ws();
            if (!cur.consume('-') || !cur.consume('>')) cur.fail("expected '->'");
            const int action_col = cur.col();
            std::string action = cur.expect_identifier("flow action");
            if (action == "block") {
                flow.action = FlowAction::Block;
                flow.message = cur.expect_string();
            } else if (action == "allow") {
                flow.action = FlowAction::Allow;
            } else if (action == "rewrite") {
                flow.action = FlowAction::Rewrite;
                flow.message = cur.expect_string();
            } else {
                throw RailParseError(RailParseError::Kind::Syntax, lineno, action_col,
                                     "unknown flow action '" + action +
                                         "' (expected block, allow, or rewrite)");
            }
            cur.expect_end("flow");
            spec.flows.push_back(std::move(flow));
        } else {
            throw RailParseError(RailParseError::Kind::Syntax, lineno, 1,
                                 "unknown keyword '" + keyword + "'");
        }
    }

    if (!saw_header && !lines.empty()) {
        // Entirely blank/comment input still needs the header.
        bool any_content = false;
        for (const auto& l : lines)
            if (!blank_or_comment(l)) any_content = true;
        if (!any_content)
            throw RailParseError(RailParseError::Kind::Syntax, 1, 1,
                                 "missing version header 'rails/1'");
    }
    if (!saw_header)
        throw RailParseError(RailParseError::Kind::Syntax, 1, 1,
                             "missing version header 'rails/1'");

    for (const auto& form : spec.forms) {
        if (form.examples.empty())
            throw RailParseError(RailParseError::Kind::Syntax, form.pos.line, form.pos.col,
                                 "form '" + form.name + "' has no examples");
    }
    for (const auto& flow : spec.flows) {
        if (!spec.find_form(flow.trigger))
            throw RailParseError(RailParseError::Kind::UnresolvedTrigger, flow.pos.line,
                                 flow.pos.col,
                                 "flow triggers undeclared form '" + flow.trigger + "'",
                                 flow.trigger);
    }
    return spec;
}

std::string render_rail_spec(const RailSpec& spec) {
    std::string out;
    out += kVersionHeader;
    out += '\n';
    if (spec.params.k) out += "param k=" + std::to_string(*spec.params.k) + "\n";
    if (spec.params.tau) out += "param tau=" + format_double(*spec.params.tau) + "\n";
    for (const auto& form : spec.forms) {
        out += "form ";
        out += form_kind_name(form.kind);
        out += ' ';
        out += form.name;
        if (form.category) {
            out += " category=";
            out += canonical_label(*form.category);
        }
        out += ":\n";
        for (const auto& ex : form.examples) {
            out += "  ex ";
            escape_into(out, ex);
            out += '\n';
        }
    }
    for (const auto& flow : spec.flows) {
        out += "flow " + flow.trigger + " -> ";
        out += flow_action_name(flow.action);
        if (flow.action != FlowAction::Allow) {
            out += ' ';
            escape_into(out, flow.message);
        }
        out += '\n';
    }
    return out;
}

std::string_view form_kind_name(FormKind k) {
    return k == FormKind::UserIntent ? "user_intent" : "attack_pattern";
}

std::string_view flow_action_name(FlowAction a) {
    switch (a) {
        case FlowAction::Block: return "block";
        case FlowAction::Allow: return "allow";
        case FlowAction::Rewrite: return "rewrite";
    }
    return "block";
}

}  // namespace medrails
