#include "larp/memory_processing.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

namespace larp {

namespace {

std::string render_item(const ObservationItem& item) {
    switch (item.kind) {
        case ObservationItemKind::entity_seen: return "seen " + item.subject + ": " + item.detail;
        case ObservationItemKind::utterance_heard:
            return item.subject + " said: " + item.detail;
        case ObservationItemKind::event: return "event from " + item.subject + ": " + item.detail;
    }
    return item.detail;
}

std::string item_digest(const ObservationItem& item) {
    return "obs:" + hex_u64(fnv1a(std::to_string(static_cast<int>(item.kind)) + ":" +
                                  item.subject + ":" + item.detail));
}

std::string render_bundle(const RetrievalBundle& bundle) {
    std::string out = "Q" + std::to_string(bundle.question.index + 1) + ": " +
                      bundle.question.text + "\n";
    for (const auto& r : bundle.logic_results) {
        out += "  logic:";
        for (const auto& [var, term] : r.bindings)
            out += " " + var + "=" + logicql::pretty_print(term);
        out += " (p=" + std::to_string(r.probability) + ")\n";
    }
    for (const MemoryRecord& rec : bundle.surviving) {
        out += "  memory[" + std::to_string(rec.id) + "]: ";
        if (rec.kind == MemoryKind::episodic_qa)
            out += rec.question + " -> " + rec.content;
        else
            out += rec.content;
        out += "\n";
    }
    return out;
}

// Parses an optional "[n]" index suffix after a directive tag; returns -1
// when absent.
int parse_ref(const std::string& head) {
    auto lb = head.find('[');
    if (lb == std::string::npos) return -1;
    auto rb = head.find(']', lb);
    if (rb == std::string::npos) return -1;
    try {
        return std::stoi(head.substr(lb + 1, rb - lb - 1));
    } catch (...) {
        return -1;
    }
}

}  // namespace

std::vector<std::pair<std::string, std::string>> parse_qa_pairs(const std::string& reply) {
    std::vector<std::pair<std::string, std::string>> pairs;
    std::string pending_question;
    for (const std::string& raw : split_lines(reply)) {
        std::string line = trim(raw);
        if (line.rfind("Q:", 0) == 0) {
            pending_question = trim(line.substr(2));
        } else if (line.rfind("A:", 0) == 0 && !pending_question.empty()) {
            std::string answer = trim(line.substr(2));
            if (!answer.empty()) pairs.emplace_back(pending_question, answer);
            pending_question.clear();
        }
    }
    return pairs;
}

std::vector<std::string> parse_numbered_lines(const std::string& reply) {
    std::vector<std::string> out;
    for (const std::string& raw : split_lines(reply)) {
        std::string line = trim(raw);
        if (line.empty()) continue;
        size_t i = 0;
        if (line[0] == 'Q' || line[0] == 'q') ++i;
        size_t digits_start = i;
        while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
        if (i == digits_start || i >= line.size()) continue;
        if (line[i] != ':' && line[i] != '.' && line[i] != ')') continue;
        std::string body = trim(line.substr(i + 1));
        if (!body.empty()) out.push_back(body);
    }
    return out;
}

MemoryProcessor::MemoryProcessor(LlmBridge& bridge, const PromptLibrary& prompts, LtmStore& ltm,
                                 logicql::KnowledgeBase& kb, WorkingMemory& wm, Persona persona,
                                 MemoryProcessingConfig config)
    : bridge_(bridge), prompts_(prompts), ltm_(ltm), kb_(kb), wm_(wm),
      persona_(std::move(persona)), config_(config) {}

double MemoryProcessor::score_importance(const std::string& item_text) {
    ChatRequest req;
    req.role_tag = "importance";
    req.messages = {{Speaker::user, prompts_.render("importance", {{"persona", persona_.summary()},
                                                                   {"item", item_text}})}};
    std::string reply = trim(bridge_.complete(req).text);
    try {
        size_t consumed = 0;
        double score = std::stod(reply, &consumed);
        if (consumed != reply.size()) return 0.5;
        return std::clamp(score, 0.0, 10.0) / 10.0;
    } catch (...) {
        return 0.5;  // ImportanceParseFailure: fall back, not fatal
    }
}

std::vector<WorkingMemoryEntry> MemoryProcessor::encode_observation(
    const Observation& observation) {
    std::vector<WorkingMemoryEntry> entries;
    for (const ObservationItem& item : observation.items) {
        WorkingMemoryEntry entry;
        entry.key = item_digest(item);
        entry.value = render_item(item);
        entry.producer = "perception";
        entry.created_at = observation.tick;
        entry.salience = score_importance(entry.value);
        entries.push_back(entry);
        wm_.put(entry);
    }
    return entries;
}

std::vector<std::int64_t> MemoryProcessor::generate_qa_pairs(const std::string& content,
                                                             Tick now) {
    ChatRequest req;
    req.role_tag = "qa_gen";
    req.messages = {{Speaker::user, prompts_.render("qa_gen", {{"content", content}})}};
    std::string reply = bridge_.complete(req).text;
    std::vector<std::int64_t> ids;
    for (const auto& [question, answer] : parse_qa_pairs(reply)) {
        LtmStore::StoreRequest sreq;
        sreq.character_id = persona_.character_id;
        sreq.kind = MemoryKind::episodic_qa;
        sreq.question = question;
        sreq.content = answer;
        sreq.created_at = now;
        sreq.provenance = Provenance::reflected;
        ids.push_back(ltm_.store(sreq));
    }
    return ids;
}

ReflectionReport MemoryProcessor::reflect(Tick now) {
    ReflectionReport report;
    const auto snapshot = wm_.snapshot();

    std::vector<WorkingMemoryEntry> kept;
    for (const WorkingMemoryEntry& e : snapshot) {
        if (e.salience < config_.ineffective_salience) {
            report.outcomes.push_back({e, "filtered", "salience below threshold"});
        } else {
            kept.push_back(e);
        }
    }

    std::map<size_t, std::string> classification;  // index into kept
    std::map<size_t, std::string> detail;
    std::vector<std::string> mem_sentences;

    if (!kept.empty()) {
        std::string listing;
        for (size_t i = 0; i < kept.size(); ++i)
            listing += std::to_string(i + 1) + ". " + kept[i].value + "\n";
        ChatRequest req;
        req.role_tag = "reflect_memory";
        req.messages = {{Speaker::system, "persona: " + persona_.summary()},
                        {Speaker::user, prompts_.render("reflect_memory", {{"entries", listing}})}};
        std::string reply = bridge_.complete(req).text;

        for (const std::string& raw : split_lines(reply)) {
            std::string line = trim(raw);
            auto colon = line.find(':');
            if (colon == std::string::npos) continue;
            std::string head = trim(line.substr(0, colon));
            std::string body = trim(line.substr(colon + 1));
            if (body.empty()) continue;
            int ref = parse_ref(head);
            size_t idx = ref >= 1 && static_cast<size_t>(ref) <= kept.size()
                             ? static_cast<size_t>(ref - 1)
                             : kept.size();

            if (head.rfind("MEM", 0) == 0) {
                LtmStore::StoreRequest sreq;
                sreq.character_id = persona_.character_id;
                sreq.kind = MemoryKind::episodic_nl;
                sreq.content = body;
                sreq.created_at = now;
                sreq.provenance = Provenance::reflected;
                sreq.importance = idx < kept.size() ? kept[idx].salience : 0.5;
                report.stored_episodic_ids.push_back(ltm_.store(sreq));
                mem_sentences.push_back(body);
                if (idx < kept.size() && !classification.count(idx)) {
                    classification[idx] = "stored_episodic";
                    detail[idx] = body;
                }
            } else if (head.rfind("FACT", 0) == 0) {
                bool ok = true;
                std::string why;
                try {
                    auto clauses = logicql::parse_program(body);
                    for (const auto& c : clauses) kb_.assert_clause(c);
                    if (clauses.empty()) { ok = false; why = "empty fact"; }
                } catch (const Error& e) {
                    ok = false;
                    why = e.what();
                }
                if (ok) {
                    report.asserted_facts.push_back(body);
                    // Also persist the symbolic memory in the long-term store.
                    LtmStore::StoreRequest sreq;
                    sreq.character_id = persona_.character_id;
                    sreq.kind = MemoryKind::semantic_fact;
                    sreq.content = body;
                    sreq.created_at = now;
                    sreq.provenance = Provenance::reflected;
                    ltm_.store(sreq);
                } else {
                    report.dropped_facts.push_back(body + " (" + why + ")");
                }
                if (idx < kept.size()) {
                    // Semantic classification wins over an earlier episodic one.
                    classification[idx] = ok ? "stored_semantic_ok" : "stored_semantic_dropped";
                    detail[idx] = body;
                }
            }
        }
    }

    // Entries the summary did not reference keep their own text as episodic
    // memory, so nothing present at trigger time is lost.
    for (size_t i = 0; i < kept.size(); ++i) {
        if (!classification.count(i)) {
            LtmStore::StoreRequest sreq;
            sreq.character_id = persona_.character_id;
            sreq.kind = MemoryKind::episodic_nl;
            sreq.content = kept[i].value;
            sreq.created_at = now;
            sreq.provenance = Provenance::reflected;
            sreq.importance = kept[i].salience;
            report.stored_episodic_ids.push_back(ltm_.store(sreq));
            classification[i] = "stored_episodic";
            detail[i] = kept[i].value;
        }
        report.outcomes.push_back({kept[i], classification[i], detail[i]});
    }

    if (!mem_sentences.empty()) {
        std::string joined;
        for (const std::string& s : mem_sentences) {
            if (!joined.empty()) joined += " ";
            joined += s;
        }
        generate_qa_pairs(joined, now);
    }

    // Processed entries leave working memory.
    for (const WorkingMemoryEntry& e : snapshot) wm_.erase(e.key);
    return report;
}

std::vector<SelfAskQuestion> MemoryProcessor::self_ask(const std::string& context) {
    ChatRequest req;
    req.role_tag = "self_ask";
    req.messages = {{Speaker::user, prompts_.render("self_ask", {{"persona", persona_.summary()},
                                                                 {"context", context}})}};
    std::string reply = bridge_.complete(req).text;
    std::vector<SelfAskQuestion> questions;
    for (const std::string& q : parse_numbered_lines(reply)) {
        if (static_cast<int>(questions.size()) >= config_.max_questions) break;
        questions.push_back({q, static_cast<int>(questions.size())});
    }
    return questions;
}

RetrievalBundle MemoryProcessor::compound_retrieve(const SelfAskQuestion& question, Tick now) {
    RetrievalBundle bundle;
    bundle.question = question;

    // Channel 1: predicate-logic query against the semantic knowledge base.
    {
        ChatRequest req;
        req.role_tag = "logic_gen";
        req.messages = {{Speaker::user,
                         prompts_.render("logic_gen", {{"persona", persona_.summary()},
                                                       {"question", question.text}})}};
        bundle.logic_query_text = trim(bridge_.complete(req).text);
        try {
            logicql::Atom q = logicql::parse_query(bundle.logic_query_text);
            bundle.logic_results = kb_.evaluate(q);
        } catch (const Error&) {
            bundle.logic_parse_failed = true;  // channel degrades to empty
        }
    }

    // Channel 2: keyword match over natural-language episodic memories.
    {
        ChatRequest req;
        req.role_tag = "keyword_extract";
        req.messages = {{Speaker::user,
                         prompts_.render("keyword_extract", {{"question", question.text}})}};
        std::vector<std::string> keywords;
        for (const std::string& kw : split(bridge_.complete(req).text, ',')) {
            std::string w = trim(kw);
            if (!w.empty()) keywords.push_back(w);
        }
        bundle.keyword_results =
            ltm_.keyword_search(keywords, persona_.character_id, config_.retrieval_k);
    }

    // Channel 3: question-answer pairs by sentence similarity.
    bundle.qa_results = ltm_.qa_search(question.text, persona_.character_id, config_.retrieval_k);

    // Merge episodic channels (dedupe by id, keep the best score), apply the
    // forgetting filter, then count the retrieval on every survivor.
    std::map<std::int64_t, ScoredRecord> merged;
    for (const ScoredRecord& sr : bundle.keyword_results) {
        auto [it, inserted] = merged.try_emplace(sr.record.id, sr);
        if (!inserted && sr.score > it->second.score) it->second = sr;
    }
    for (const ScoredRecord& sr : bundle.qa_results) {
        auto [it, inserted] = merged.try_emplace(sr.record.id, sr);
        if (!inserted && sr.score > it->second.score) it->second = sr;
    }
    std::vector<ScoredRecord> ordered(merged.size());
    std::transform(merged.begin(), merged.end(), ordered.begin(),
                   [](const auto& kv) { return kv.second; });
    std::stable_sort(ordered.begin(), ordered.end(), [](const ScoredRecord& a, const ScoredRecord& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.record.id < b.record.id;
    });
    std::vector<MemoryRecord> candidates;
    candidates.reserve(ordered.size());
    for (const ScoredRecord& sr : ordered) candidates.push_back(sr.record);

    for (const MemoryRecord& survivor : forget_filter(candidates, now, persona_.decay))
        bundle.surviving.push_back(ltm_.touch(survivor.id, now));
    return bundle;
}

RecallResult MemoryProcessor::recall_loop(const Observation& observation, Tick now) {
    RecallResult result;
    std::string context = observation.render();
    std::set<std::int64_t> supporting;
    std::string last_reply;

    for (int iter = 1; iter <= config_.max_iterations; ++iter) {
        result.iterations = iter;
        auto questions = self_ask(context);
        if (questions.empty()) {
            result.answer = "I recall nothing relevant.";
            result.terminated_by = "final_answer";
            result.supporting_record_ids.assign(supporting.begin(), supporting.end());
            return result;
        }
        std::string bundles_text;
        for (const SelfAskQuestion& q : questions) {
            RetrievalBundle bundle = compound_retrieve(q, now);
            for (const MemoryRecord& r : bundle.surviving) supporting.insert(r.id);
            bundles_text += render_bundle(bundle);
            result.bundles.push_back(std::move(bundle));
        }
        ChatRequest req;
        req.role_tag = "cot_answer";
        req.messages = {{Speaker::user,
                         prompts_.render("cot_answer", {{"persona", persona_.summary()},
                                                        {"bundles", bundles_text}})}};
        last_reply = bridge_.complete(req).text;
        std::string trimmed = trim(last_reply);
        if (trimmed.rfind("FINAL:", 0) == 0) {
            result.answer = trim(trimmed.substr(6));
            result.terminated_by = "final_answer";
            result.supporting_record_ids.assign(supporting.begin(), supporting.end());
            return result;
        }
        context += "\n" + last_reply;
    }
    result.answer = last_reply;
    result.terminated_by = "iteration_cap";
    result.supporting_record_ids.assign(supporting.begin(), supporting.end());
    return result;
}

std::optional<std::int64_t> MemoryProcessor::reconstruct_memory(const MemoryRecord& record,
                                                                const std::string& answer_context,
                                                                Tick now) {
    if (record.kind != MemoryKind::episodic_nl)
        throw Error("only episodic_nl memories can be reconstructed");
    ChatRequest req;
    req.role_tag = "reconstruct";
    req.messages = {{Speaker::user,
                     prompts_.render("reconstruct", {{"persona", persona_.summary()},
                                                     {"memory", record.content},
                                                     {"context", answer_context}})}};
    std::string rewrite = trim(bridge_.complete(req).text);
    if (rewrite.empty()) return std::nullopt;

    LtmStore::StoreRequest sreq;
    sreq.character_id = record.character_id;
    sreq.kind = MemoryKind::episodic_nl;
    sreq.content = rewrite;
    sreq.created_at = now;
    sreq.provenance = Provenance::reconstructed;
    sreq.importance = record.importance;
    sreq.distortion_count = record.distortion_count + 1;
    sreq.parent_id = record.id;
    return ltm_.store(sreq);
}

}  // namespace larp
