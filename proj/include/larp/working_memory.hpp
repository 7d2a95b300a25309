#pragma once

#include <string>
#include <vector>

#include "larp/common.hpp"

namespace larp {

struct WorkingMemoryEntry {
    std::string key;
    std::string value;
    std::string producer;  // "perception" | "recall" | "unit:<id>"
    Tick created_at = 0;
    double salience = 0.5;  // [0,1]

    bool operator==(const WorkingMemoryEntry&) const = default;
};

struct WorkingMemoryConfig {
    int capacity = 7;               // K, the 7±2 item limit
    Tick ttl = 30;                  // retention in ticks
    int reflection_threshold = 7;   // R
};

// Bounded, time-limited cache feeding the decision units. Evictions are
// reported, never silently dropped, so reflection can see them.
class WorkingMemory {
public:
    explicit WorkingMemory(WorkingMemoryConfig config = {}) : config_(config) {}

    // Same key overwrites in place (refreshing created_at). Over capacity the
    // minimum-salience entry goes (ties: oldest, then key ascending).
    std::vector<WorkingMemoryEntry> put(WorkingMemoryEntry entry);

    // Removes entries with now - created_at > ttl and returns them.
    std::vector<WorkingMemoryEntry> expire(Tick now);

    // Salience desc, then recency desc, then key asc.
    std::vector<WorkingMemoryEntry> snapshot() const;

    bool should_reflect() const { return size() >= static_cast<size_t>(config_.reflection_threshold); }

    bool erase(const std::string& key);
    bool contains(const std::string& key) const;
    size_t size() const { return entries_.size(); }
    const WorkingMemoryConfig& config() const { return config_; }

private:
    WorkingMemoryConfig config_;
    std::vector<WorkingMemoryEntry> entries_;  // insertion order
};

}  // namespace larp
