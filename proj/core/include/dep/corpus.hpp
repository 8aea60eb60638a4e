#pragma once

// Review corpus data model: ingestion of line-delimited JSON records,
// per-user recency indexing, peer lookup per item, train/validation/test
// splitting, and a seeded synthetic generator for desk-scale experiments.
//
// A Corpus is immutable after construction; all queries are read-only and
// thread-safe.

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace dep {

struct Review {
    std::string user_id;
    std::string item_id;
    std::string title;
    double rating = 0.0;  // in [1, 5]
    std::string text;
    std::int64_t timestamp = 0;  // milliseconds
};

struct Item {
    std::string item_id;
    std::string title;
    std::string description;
};

struct IngestReport {
    std::size_t accepted = 0;
    std::vector<std::string> rejected;  // "<file>:<line>: reason"
};

// Ordered most recent first; never contains the target (user, item) pair.
using RetrievedHistory = std::vector<Review>;

class Corpus {
  public:
    Corpus(std::vector<Review> reviews, std::vector<Item> items);

    const std::vector<Review>& reviews() const { return reviews_; }
    const std::vector<Item>& items() const { return items_; }
    const Item* find_item(const std::string& item_id) const;
    const std::vector<std::string>& user_ids() const { return user_ids_; }

    // Indices into reviews() for one user, most recent first
    // (timestamp desc, item_id asc on ties).
    const std::vector<int>& user_reviews(const std::string& user_id) const;
    const std::vector<int>& item_reviews(const std::string& item_id) const;

    // The user's K most recent reviews excluding any review of target_item.
    RetrievedHistory retrieve_recent(const std::string& user_id, const std::string& target_item,
                                     int k) const;

    // Up to m_max reviews of `item_id` by users other than exclude_user,
    // most recent first, at most one (the newest) per peer user. When
    // before_ts is set, only reviews strictly older than it qualify.
    std::vector<Review> peers(const std::string& item_id, const std::string& exclude_user,
                              int m_max, std::optional<std::int64_t> before_ts = {}) const;

    std::uint64_t content_hash() const { return content_hash_; }

  private:
    std::vector<Review> reviews_;
    std::vector<Item> items_;
    std::vector<std::string> user_ids_;  // sorted
    std::unordered_map<std::string, std::vector<int>> by_user_;
    std::unordered_map<std::string, std::vector<int>> by_item_;
    std::unordered_map<std::string, int> item_index_;
    std::uint64_t content_hash_ = 0;
};

// Reads line-delimited JSON records (main: user_id,item_id,title,text,
// rating,timestamp; meta: item_id,title,description). Malformed lines and
// reviews referencing unknown items are collected into `report`; throws
// only when a file is unreadable or no valid review remains.
Corpus ingest(const std::string& main_path, const std::string& meta_path, IngestReport* report);

void write_corpus(const Corpus& corpus, const std::string& main_path, const std::string& meta_path);

struct SynthConfig {
    int users = 50;
    int items = 40;
    int reviews_per_user = 6;
    std::uint64_t seed = 7;

    std::uint64_t content_hash() const;
};

// Deterministic corpus with a planted per-user style: every review of a
// user embeds that user's catchphrase, and items get >=2 reviewers where
// density permits. Throws if users*items cannot host the requested count.
Corpus generate_synthetic(const SynthConfig& config);

// One evaluation target: a held-out review plus everything retrievable.
struct TargetInstance {
    int review_index = -1;  // into corpus.reviews()
};

struct SplitPolicy {
    int validation_size = 8;
    std::uint64_t seed = 0;
};

struct Splits {
    std::vector<TargetInstance> train;       // each user's most recent review
    std::vector<TargetInstance> validation;  // seeded sample of second-most-recent
    std::vector<TargetInstance> test;        // remaining second/third-most-recent
};

// Train targets: the most recent review of every user with >=2 reviews.
// The next-most-recent review of each such user becomes a held-out target;
// a seeded sample of validation_size of those goes to validation, the rest
// to test. Targets are disjoint by construction.
Splits split(const Corpus& corpus, const SplitPolicy& policy);

}  // namespace dep
