#include "larp/working_memory.hpp"

#include <algorithm>

namespace larp {

std::vector<WorkingMemoryEntry> WorkingMemory::put(WorkingMemoryEntry entry) {
    entry.salience = std::clamp(entry.salience, 0.0, 1.0);
    for (WorkingMemoryEntry& e : entries_) {
        if (e.key == entry.key) {
            e = std::move(entry);
            return {};
        }
    }
    entries_.push_back(std::move(entry));
    std::vector<WorkingMemoryEntry> evicted;
    while (entries_.size() > static_cast<size_t>(config_.capacity)) {
        auto victim = std::min_element(
            entries_.begin(), entries_.end(),
            [](const WorkingMemoryEntry& a, const WorkingMemoryEntry& b) {
                if (a.salience != b.salience) return a.salience < b.salience;
                if (a.created_at != b.created_at) return a.created_at < b.created_at;
                return a.key < b.key;
            });
        evicted.push_back(*victim);
        entries_.erase(victim);
    }
    return evicted;
}

std::vector<WorkingMemoryEntry> WorkingMemory::expire(Tick now) {
    std::vector<WorkingMemoryEntry> expired;
    std::erase_if(entries_, [&](const WorkingMemoryEntry& e) {
        if (now - e.created_at > config_.ttl) {
            expired.push_back(e);
            return true;
        }
        return false;
    });
    return expired;
}

std::vector<WorkingMemoryEntry> WorkingMemory::snapshot() const {
    std::vector<WorkingMemoryEntry> out = entries_;
    std::stable_sort(out.begin(), out.end(),
                     [](const WorkingMemoryEntry& a, const WorkingMemoryEntry& b) {
                         if (a.salience != b.salience) return a.salience > b.salience;
                         if (a.created_at != b.created_at) return a.created_at > b.created_at;
                         return a.key < b.key;
                     });
    return out;
}

bool WorkingMemory::erase(const std::string& key) {
    return std::erase_if(entries_, [&](const WorkingMemoryEntry& e) { return e.key == key; }) > 0;
}

bool WorkingMemory::contains(const std::string& key) const {
    return std::any_of(entries_.begin(), entries_.end(),
                       [&](const WorkingMemoryEntry& e) { return e.key == key; });
}

}  // namespace larp
