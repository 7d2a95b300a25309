#include "larp/ltm_store.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "larp/logicql.hpp"

namespace larp {

std::string to_string(MemoryKind k) {
    switch (k) {
        case MemoryKind::episodic_nl: return "episodic_nl";
        case MemoryKind::episodic_qa: return "episodic_qa";
        case MemoryKind::semantic_fact: return "semantic_fact";
    }
    return "?";
}

std::string to_string(Provenance p) {
    switch (p) {
        case Provenance::observed: return "observed";
        case Provenance::reflected: return "reflected";
        case Provenance::reconstructed: return "reconstructed";
    }
    return "?";
}

MemoryKind memory_kind_from_string(const std::string& s) {
    if (s == "episodic_nl") return MemoryKind::episodic_nl;
    if (s == "episodic_qa") return MemoryKind::episodic_qa;
    if (s == "semantic_fact") return MemoryKind::semantic_fact;
    throw CorruptSnapshot("unknown memory kind '" + s + "'");
}

Provenance provenance_from_string(const std::string& s) {
    if (s == "observed") return Provenance::observed;
    if (s == "reflected") return Provenance::reflected;
    if (s == "reconstructed") return Provenance::reconstructed;
    throw CorruptSnapshot("unknown provenance '" + s + "'");
}

double decay_probability(const MemoryRecord& record, Tick now, const DecayParams& params) {
    const double t = static_cast<double>(now - record.last_retrieved_at);
    const double n = static_cast<double>(record.retrieval_count);
    if (n == 0.0) return 0.0;
    const double raw =
        params.alpha * record.importance * n * std::pow(1.0 + params.beta * t, -params.psi);
    return std::clamp(raw, 0.0, 1.0);
}

std::vector<MemoryRecord> forget_filter(const std::vector<MemoryRecord>& records, Tick now,
                                        const DecayParams& params) {
    std::vector<MemoryRecord> retained;
    retained.reserve(records.size());
    if (params.retrieval_mode == RetrievalMode::deterministic_threshold) {
        for (const MemoryRecord& r : records) {
            if (decay_probability(r, now, params) < params.threshold) retained.push_back(r);
        }
    } else {
        std::mt19937_64 rng(params.rng_seed);
        std::uniform_real_distribution<double> dist(0.0, 1.0);
        for (const MemoryRecord& r : records) {
            const double sigma = decay_probability(r, now, params);
            if (dist(rng) >= sigma) retained.push_back(r);
        }
    }
    return retained;
}

std::int64_t LtmStore::store(const StoreRequest& req) {
    if (req.character_id.empty()) throw InvalidRecord("character_id must be non-empty");
    if (req.kind == MemoryKind::semantic_fact) {
        try {
            logicql::parse_program(req.content);
        } catch (const ParseError& e) {
            throw InvalidRecord(std::string("semantic fact does not parse: ") + e.what());
        }
    }
    MemoryRecord rec;
    rec.id = next_id_++;
    rec.character_id = req.character_id;
    rec.kind = req.kind;
    rec.content = req.content;
    rec.question = req.question;
    rec.embedding = embed(req.kind == MemoryKind::episodic_qa ? req.question : req.content);
    rec.importance = std::clamp(req.importance, 0.0, 1.0);
    rec.retrieval_count = 0;
    rec.created_at = req.created_at;
    rec.last_retrieved_at = req.created_at;
    rec.provenance = req.provenance;
    rec.distortion_count = req.distortion_count;
    rec.parent_id = req.parent_id;
    records_.push_back(std::move(rec));
    return records_.back().id;
}

const MemoryRecord& LtmStore::get(std::int64_t id) const {
    for (const MemoryRecord& r : records_)
        if (r.id == id) return r;
    throw UnknownId("no memory record with id " + std::to_string(id));
}

bool LtmStore::contains(std::int64_t id) const {
    return std::any_of(records_.begin(), records_.end(),
                       [&](const MemoryRecord& r) { return r.id == id; });
}

MemoryRecord LtmStore::touch(std::int64_t id, Tick now) {
    for (MemoryRecord& r : records_) {
        if (r.id == id) {
            r.retrieval_count += 1;
            if (now > r.last_retrieved_at) r.last_retrieved_at = now;
            return r;
        }
    }
    throw UnknownId("no memory record with id " + std::to_string(id));
}

std::vector<const MemoryRecord*> LtmStore::records_for(const std::string& character_id) const {
    std::vector<const MemoryRecord*> out;
    for (const MemoryRecord& r : records_)
        if (r.character_id == character_id) out.push_back(&r);
    return out;
}

std::vector<ScoredRecord> LtmStore::vector_search(const std::vector<float>& query,
                                                  const std::string& character_id,
                                                  const std::set<MemoryKind>& kinds,
                                                  size_t k) const {
    std::vector<ScoredRecord> scored;
    if (k == 0) return scored;
    const double qnorm = cosine(query, query);
    if (qnorm == 0.0) return scored;  // zero-vector query
    for (const MemoryRecord& r : records_) {
        if (r.character_id != character_id || !kinds.contains(r.kind)) continue;
        scored.push_back({r, cosine(query, r.embedding)});
    }
    std::stable_sort(scored.begin(), scored.end(), [](const ScoredRecord& a, const ScoredRecord& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.record.id < b.record.id;
    });
    if (scored.size() > k) scored.resize(k);
    return scored;
}

std::vector<ScoredRecord> LtmStore::keyword_search(const std::vector<std::string>& keywords,
                                                   const std::string& character_id,
                                                   size_t k) const {
    std::vector<ScoredRecord> scored;
    if (k == 0 || keywords.empty()) return scored;
    std::set<std::string> distinct;
    for (const std::string& kw : keywords) {
        std::string w = to_lower(trim(kw));
        if (!w.empty()) distinct.insert(w);
    }
    for (const MemoryRecord& r : records_) {
        if (r.character_id != character_id || r.kind != MemoryKind::episodic_nl) continue;
        auto ws = words_of(r.content);
        std::set<std::string> content_words(ws.begin(), ws.end());
        int score = 0;
        for (const std::string& kw : distinct)
            if (content_words.contains(kw)) ++score;
        if (score > 0) scored.push_back({r, static_cast<double>(score)});
    }
    std::stable_sort(scored.begin(), scored.end(), [](const ScoredRecord& a, const ScoredRecord& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.record.created_at != b.record.created_at)
            return a.record.created_at > b.record.created_at;
        return a.record.id < b.record.id;
    });
    if (scored.size() > k) scored.resize(k);
    return scored;
}

std::vector<ScoredRecord> LtmStore::qa_search(const std::string& question,
                                              const std::string& character_id, size_t k) const {
    return vector_search(embed(question), character_id, {MemoryKind::episodic_qa}, k);
}

namespace {

std::string hex_float(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    static const char* digits = "0123456789abcdef";
    std::string out(8, '0');
    for (int i = 7; i >= 0; --i) {
        out[static_cast<size_t>(i)] = digits[bits & 0xf];
        bits >>= 4;
    }
    return out;
}

float float_from_hex(std::string_view hex) {
    if (hex.size() != 8) throw CorruptSnapshot("bad float width in snapshot");
    std::uint32_t bits = 0;
    for (char c : hex) {
        bits <<= 4;
        if (c >= '0' && c <= '9') bits |= static_cast<std::uint32_t>(c - '0');
        else if (c >= 'a' && c <= 'f') bits |= static_cast<std::uint32_t>(c - 'a' + 10);
        else throw CorruptSnapshot("bad hex digit in snapshot");
    }
    float v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
}

std::string hex_double(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    return hex_u64(bits);
}

double double_from_hex(std::string_view hex) {
    if (hex.size() != 16) throw CorruptSnapshot("bad double width in snapshot");
    std::uint64_t bits = 0;
    for (char c : hex) {
        bits <<= 4;
        if (c >= '0' && c <= '9') bits |= static_cast<std::uint64_t>(c - '0');
        else if (c >= 'a' && c <= 'f') bits |= static_cast<std::uint64_t>(c - 'a' + 10);
        else throw CorruptSnapshot("bad hex digit in snapshot");
    }
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
}

std::string field_value(const std::string& field, const std::string& tag) {
    if (field.size() < tag.size() + 1 || field.compare(0, tag.size(), tag) != 0 ||
        field[tag.size()] != '=')
        throw CorruptSnapshot("expected field '" + tag + "'");
    return field.substr(tag.size() + 1);
}

constexpr const char* kLtmMagic = "LARPLTM 1";

}  // namespace

std::string LtmStore::serialize() const {
    std::string body = std::string(kLtmMagic) + "\n";
    for (const MemoryRecord& r : records_) {
        std::string emb;
        emb.reserve(r.embedding.size() * 8);
        for (float v : r.embedding) emb += hex_float(v);
        std::ostringstream line;
        line << "id=" << r.id << "\tchar=" << escape_line(r.character_id)
             << "\tkind=" << to_string(r.kind) << "\tcontent=" << escape_line(r.content)
             << "\tquestion=" << escape_line(r.question) << "\timp=" << hex_double(r.importance)
             << "\tn=" << r.retrieval_count << "\tcreated=" << r.created_at
             << "\tlast=" << r.last_retrieved_at << "\tprov=" << to_string(r.provenance)
             << "\tdist=" << r.distortion_count
             << "\tparent=" << (r.parent_id ? std::to_string(*r.parent_id) : std::string("-"))
             << "\temb=" << emb;
        body += line.str();
        body += "\n";
    }
    body += "checksum=" + hex_u64(fnv1a(body)) + "\n";
    return body;
}

LtmStore LtmStore::deserialize(const std::string& text) {
    auto lines = split_lines(text);
    if (lines.empty() || lines[0] != kLtmMagic)
        throw CorruptSnapshot("missing or mismatched LTM snapshot header");
    if (lines.size() < 2 || lines.back().rfind("checksum=", 0) != 0)
        throw CorruptSnapshot("missing LTM snapshot checksum");
    std::string expected = lines.back().substr(9);
    std::string body;
    for (size_t i = 0; i + 1 < lines.size(); ++i) body += lines[i] + "\n";
    if (hex_u64(fnv1a(body)) != expected) throw CorruptSnapshot("LTM snapshot checksum mismatch");

    LtmStore store;
    for (size_t i = 1; i + 1 < lines.size(); ++i) {
        auto fields = split(lines[i], '\t');
        if (fields.size() != 13) throw CorruptSnapshot("bad LTM record field count");
        MemoryRecord r;
        r.id = std::stoll(field_value(fields[0], "id"));
        r.character_id = unescape_line(field_value(fields[1], "char"));
        r.kind = memory_kind_from_string(field_value(fields[2], "kind"));
        r.content = unescape_line(field_value(fields[3], "content"));
        r.question = unescape_line(field_value(fields[4], "question"));
        r.importance = double_from_hex(field_value(fields[5], "imp"));
        r.retrieval_count = std::stoll(field_value(fields[6], "n"));
        r.created_at = std::stoll(field_value(fields[7], "created"));
        r.last_retrieved_at = std::stoll(field_value(fields[8], "last"));
        r.provenance = provenance_from_string(field_value(fields[9], "prov"));
        r.distortion_count = std::stoll(field_value(fields[10], "dist"));
        std::string parent = field_value(fields[11], "parent");
        if (parent != "-") r.parent_id = std::stoll(parent);
        std::string emb = field_value(fields[12], "emb");
        if (emb.size() % 8 != 0) throw CorruptSnapshot("bad embedding width");
        r.embedding.reserve(emb.size() / 8);
        for (size_t j = 0; j < emb.size(); j += 8)
            r.embedding.push_back(float_from_hex(std::string_view(emb).substr(j, 8)));
        store.next_id_ = std::max(store.next_id_, r.id + 1);
        store.records_.push_back(std::move(r));
    }
    return store;
}

void LtmStore::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoFailure("cannot open '" + path + "' for writing");
    out << serialize();
    if (!out) throw IoFailure("write to '" + path + "' failed");
}

LtmStore LtmStore::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoFailure("cannot open '" + path + "' for reading");
    std::ostringstream buf;
    buf << in.rdbuf();
    return deserialize(buf.str());
}

}  // namespace larp
