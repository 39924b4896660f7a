#include "medrails/input_rail.hpp"

#include <fstream>

namespace medrails {

std::vector<DenyRule> deny_rules_from_lines(std::string_view text) {
    std::vector<DenyRule> rules;
    size_t start = 0;
    int lineno = 0;
    while (start <= text.size()) {
        size_t nl = text.find('\n', start);
        std::string line(nl == std::string_view::npos ? text.substr(start)
                                                      : text.substr(start, nl - start));
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        size_t first = line.find_first_not_of(" \t");
        if (first != std::string::npos && line[first] != '#') {
            DenyRule rule;
            rule.id = "deny:" + std::to_string(lineno);
            rule.pattern = line.substr(first);
            try {
                rule.regex = std::regex(rule.pattern, std::regex::ECMAScript | std::regex::icase);
            } catch (const std::regex_error& e) {
                throw std::runtime_error("deny-list line " + std::to_string(lineno) +
                                         ": bad pattern: " + e.what());
            }
            rules.push_back(std::move(rule));
        }
        if (nl == std::string_view::npos) break;
        start = nl + 1;
    }
    return rules;
}

std::vector<DenyRule> load_deny_rules(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open deny-list file: " + path.string());
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deny_rules_from_lines(content);
}

InputRail::InputRail(const RailSpec& spec, std::vector<DenyRule> deny_rules, int k, double tau)
    : spec_(spec), deny_rules_(std::move(deny_rules)), tau_(tau) {
    std::vector<CanonicalForm> attack_forms;
    for (const auto& form : spec_.forms)
        if (form.kind == FormKind::AttackPattern) attack_forms.push_back(form);
    if (!attack_forms.empty()) index_ = MatcherIndex::build(attack_forms, k, tau);
}

std::vector<RuleHit> InputRail::scan_deny_rules(std::string_view text) const {
    std::vector<RuleHit> hits;
    for (const auto& rule : deny_rules_) {
        try {
            std::cmatch m;
            if (std::regex_search(text.data(), text.data() + text.size(), m, rule.regex)) {
                hits.push_back({rule.id, static_cast<size_t>(m.position(0)),
                                static_cast<size_t>(m.position(0) + m.length(0))});
            }
        } catch (const std::regex_error&) {
            // A pattern that blows the matcher's limits on this input is
            // treated as a non-match; screening must not throw.
        }
    }
    return hits;
}

InputScreenReport InputRail::screen(std::string_view prompt) const {
    InputScreenReport report;
    report.rule_hits = scan_deny_rules(prompt);
    if (index_) report.matches = index_->nearest(prompt);

    const MatchResult* top = report.matches.empty() ? nullptr : &report.matches.front();

    if (!report.rule_hits.empty()) {
        report.verdict.decision = Decision::Block;
        report.verdict.category = TaxonomyLabel(JailbreakCategory::PromptInjection);
        report.verdict.confidence = 1.0;
        for (const auto& hit : report.rule_hits)
            report.verdict.evidence.push_back({"input:denylist", hit.pattern_id, 1.0});
        if (top && top->similarity >= tau_) {
            report.verdict.evidence.push_back({"input:knn", top->form_name, top->similarity});
            const FlowRule* flow = spec_.find_flow(top->form_name);
            if (flow && flow->action == FlowAction::Block) report.message = flow->message;
        }
        return report;
    }

    if (top && top->similarity >= tau_) {
        const CanonicalForm* form = spec_.find_form(top->form_name);
        const FlowRule* flow = spec_.find_flow(top->form_name);
        report.verdict.decision =
            flow && flow->action == FlowAction::Rewrite ? Decision::Rewrite : Decision::Block;
        if (form && form->category) report.verdict.category = form->category;
        report.verdict.confidence = top->similarity;
        report.verdict.evidence.push_back({"input:knn", top->form_name, top->similarity});
        if (flow && flow->action != FlowAction::Allow) report.message = flow->message;
        return report;
    }

    report.verdict.decision = Decision::Allow;
    report.verdict.confidence = top ? std::max(top->similarity, 0.0) : 0.0;
    return report;
}

}  // namespace medrails
