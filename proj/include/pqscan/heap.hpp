#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <vector>

#include "pqscan/errors.hpp"

namespace pqscan {

// Bounded max-heap of the R best (distance, id) candidates seen so far.
// Ordering is lexicographic on (distance, id), so at equal distance the lower
// id wins; this makes scan results deterministic and independent of scan order.
template <class D>
class CandidateHeap {
public:
    struct Entry {
        D dist;
        uint32_t id;
        friend bool operator<(const Entry& a, const Entry& b) {
            return a.dist < b.dist || (a.dist == b.dist && a.id < b.id);
        }
        friend bool operator==(const Entry& a, const Entry& b) { return a.dist == b.dist && a.id == b.id; }
    };

    explicit CandidateHeap(size_t capacity) : cap_(capacity) {
        if (cap_ == 0) throw config_error("candidate heap capacity must be positive");
        heap_.reserve(cap_);
    }

    size_t capacity() const { return cap_; }
    size_t size() const { return heap_.size(); }
    bool full() const { return heap_.size() == cap_; }

    // Worst distance currently kept; max() while the heap has spare room so
    // that every candidate passes the pre-admission distance check.
    D worst() const { return full() ? heap_.front().dist : std::numeric_limits<D>::max(); }

    void push(D dist, uint32_t id) {
        if (!full()) {
            heap_.push_back({dist, id});
            std::push_heap(heap_.begin(), heap_.end());
            return;
        }
        const Entry& top = heap_.front();
        if (dist > top.dist || (dist == top.dist && id >= top.id)) return;
        std::pop_heap(heap_.begin(), heap_.end());
        heap_.back() = {dist, id};
        std::push_heap(heap_.begin(), heap_.end());
    }

    // Removes and returns the current worst entry (pop order is distance-descending).
    Entry pop_worst() {
        std::pop_heap(heap_.begin(), heap_.end());
        Entry e = heap_.back();
        heap_.pop_back();
        return e;
    }

    // Contents sorted ascending by (distance, id). The heap itself is untouched.
    std::vector<Entry> sorted() const {
        std::vector<Entry> out(heap_);
        std::sort(out.begin(), out.end());
        return out;
    }

private:
    size_t cap_;
    std::vector<Entry> heap_;
};

} // namespace pqscan
