#include "dep/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "dep/hash.hpp"

namespace dep {

namespace {

using nlohmann::json;

const std::vector<int> kEmptyIndex;

// Most recent first; ties by item_id ascending, then user_id ascending.
bool review_order(const Review& a, const Review& b) {
    if (a.timestamp != b.timestamp) return a.timestamp > b.timestamp;
    if (a.item_id != b.item_id) return a.item_id < b.item_id;
    return a.user_id < b.user_id;
}

}  // namespace

Corpus::Corpus(std::vector<Review> reviews, std::vector<Item> items)
    : reviews_(std::move(reviews)), items_(std::move(items)) {
    for (std::size_t i = 0; i < items_.size(); ++i) {
        if (!item_index_.emplace(items_[i].item_id, static_cast<int>(i)).second) {
            throw std::invalid_argument("corpus: duplicate item_id " + items_[i].item_id);
        }
    }
    for (std::size_t i = 0; i < reviews_.size(); ++i) {
        const Review& r = reviews_[i];
        if (item_index_.find(r.item_id) == item_index_.end()) {
            throw std::invalid_argument("corpus: review references unknown item " + r.item_id);
        }
        by_user_[r.user_id].push_back(static_cast<int>(i));
        by_item_[r.item_id].push_back(static_cast<int>(i));
    }
    auto sort_index = [this](std::vector<int>& idx) {
        std::sort(idx.begin(), idx.end(),
                  [this](int a, int b) { return review_order(reviews_[static_cast<std::size_t>(a)],
                                                             reviews_[static_cast<std::size_t>(b)]); });
    };
    for (auto& [user, idx] : by_user_) {
        sort_index(idx);
        user_ids_.push_back(user);
    }
    for (auto& [item, idx] : by_item_) sort_index(idx);
    std::sort(user_ids_.begin(), user_ids_.end());

    // Content hash over canonically ordered records.
    std::vector<int> order(reviews_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [this](int a, int b) {
        const Review& ra = reviews_[static_cast<std::size_t>(a)];
        const Review& rb = reviews_[static_cast<std::size_t>(b)];
        if (ra.user_id != rb.user_id) return ra.user_id < rb.user_id;
        if (ra.item_id != rb.item_id) return ra.item_id < rb.item_id;
        return ra.timestamp < rb.timestamp;
    });
    HashAccumulator h;
    h.update("corpus-v1");
    for (int i : order) {
        const Review& r = reviews_[static_cast<std::size_t>(i)];
        h.update(r.user_id);
        h.update("\x1f");
        h.update(r.item_id);
        h.update("\x1f");
        h.update(r.title);
        h.update("\x1f");
        h.update(r.text);
        h.update("\x1f");
        h.update_f64(r.rating);
        h.update_u64(static_cast<std::uint64_t>(r.timestamp));
    }
    std::vector<Item> sorted_items = items_;
    std::sort(sorted_items.begin(), sorted_items.end(),
              [](const Item& a, const Item& b) { return a.item_id < b.item_id; });
    for (const Item& it : sorted_items) {
        h.update(it.item_id);
        h.update("\x1f");
        h.update(it.title);
        h.update("\x1f");
        h.update(it.description);
        h.update("\x1f");
    }
    content_hash_ = h.digest();
}

const Item* Corpus::find_item(const std::string& item_id) const {
    auto it = item_index_.find(item_id);
    return it == item_index_.end() ? nullptr : &items_[static_cast<std::size_t>(it->second)];
}

const std::vector<int>& Corpus::user_reviews(const std::string& user_id) const {
    auto it = by_user_.find(user_id);
    return it == by_user_.end() ? kEmptyIndex : it->second;
}

const std::vector<int>& Corpus::item_reviews(const std::string& item_id) const {
    auto it = by_item_.find(item_id);
    return it == by_item_.end() ? kEmptyIndex : it->second;
}

RetrievedHistory Corpus::retrieve_recent(const std::string& user_id,
                                         const std::string& target_item, int k) const {
    if (k < 0) throw std::invalid_argument("retrieve_recent: k must be >= 0");
    RetrievedHistory out;
    for (int idx : user_reviews(user_id)) {
        if (static_cast<int>(out.size()) >= k) break;
        const Review& r = reviews_[static_cast<std::size_t>(idx)];
        if (r.item_id == target_item) continue;
        out.push_back(r);
    }
    return out;
}

std::vector<Review> Corpus::peers(const std::string& item_id, const std::string& exclude_user,
                                  int m_max, std::optional<std::int64_t> before_ts) const {
    if (m_max < 0) throw std::invalid_argument("peers: m_max must be >= 0");
    std::vector<Review> out;
    std::set<std::string> seen;
    for (int idx : item_reviews(item_id)) {
        if (static_cast<int>(out.size()) >= m_max) break;
        const Review& r = reviews_[static_cast<std::size_t>(idx)];
        if (r.user_id == exclude_user) continue;
        if (before_ts && r.timestamp >= *before_ts) continue;
        if (!seen.insert(r.user_id).second) continue;  // newest per peer only
        out.push_back(r);
    }
    return out;
}

namespace {

bool parse_review(const json& j, Review* out, std::string* reason) {
    if (!j.is_object()) {
        *reason = "not an object";
        return false;
    }
    const char* required[] = {"user_id", "item_id", "title", "text", "rating", "timestamp"};
    for (const char* key : required) {
        if (!j.contains(key)) {
            *reason = std::string("missing field ") + key;
            return false;
        }
    }
    if (!j["user_id"].is_string() || !j["item_id"].is_string() || !j["title"].is_string() ||
        !j["text"].is_string()) {
        *reason = "string field has wrong type";
        return false;
    }
    if (!j["rating"].is_number()) {
        *reason = "rating is not a number";
        return false;
    }
    if (!j["timestamp"].is_number_integer()) {
        *reason = "timestamp is not an integer";
        return false;
    }
    out->user_id = j["user_id"].get<std::string>();
    out->item_id = j["item_id"].get<std::string>();
    out->title = j["title"].get<std::string>();
    out->text = j["text"].get<std::string>();
    out->rating = j["rating"].get<double>();
    out->timestamp = j["timestamp"].get<std::int64_t>();
    if (out->rating < 1.0 || out->rating > 5.0) {
        *reason = "rating outside [1,5]";
        return false;
    }
    return true;
}

bool parse_item(const json& j, Item* out, std::string* reason) {
    if (!j.is_object() || !j.contains("item_id") || !j["item_id"].is_string()) {
        *reason = "missing item_id";
        return false;
    }
    out->item_id = j["item_id"].get<std::string>();
    out->title = j.value("title", std::string());
    out->description = j.value("description", std::string());
    return true;
}

}  // namespace

Corpus ingest(const std::string& main_path, const std::string& meta_path, IngestReport* report) {
    IngestReport local;
    IngestReport& rep = report ? *report : local;

    std::ifstream meta(meta_path);
    if (!meta) throw std::runtime_error("ingest: cannot read " + meta_path);
    std::vector<Item> items;
    std::set<std::string> item_ids;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(meta, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::string reason;
        Item item;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            rep.rejected.push_back(meta_path + ":" + std::to_string(lineno) + ": invalid JSON");
            continue;
        }
        if (!parse_item(j, &item, &reason)) {
            rep.rejected.push_back(meta_path + ":" + std::to_string(lineno) + ": " + reason);
            continue;
        }
        if (!item_ids.insert(item.item_id).second) {
            rep.rejected.push_back(meta_path + ":" + std::to_string(lineno) + ": duplicate item_id");
            continue;
        }
        items.push_back(std::move(item));
    }

    std::ifstream main(main_path);
    if (!main) throw std::runtime_error("ingest: cannot read " + main_path);
    std::vector<Review> reviews;
    std::set<std::string> review_keys;
    lineno = 0;
    while (std::getline(main, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::string reason;
        Review r;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            rep.rejected.push_back(main_path + ":" + std::to_string(lineno) + ": invalid JSON");
            continue;
        }
        if (!parse_review(j, &r, &reason)) {
            rep.rejected.push_back(main_path + ":" + std::to_string(lineno) + ": " + reason);
            continue;
        }
        if (item_ids.find(r.item_id) == item_ids.end()) {
            rep.rejected.push_back(main_path + ":" + std::to_string(lineno) +
                                   ": unknown item " + r.item_id);
            continue;
        }
        std::string key = r.user_id + "\x1f" + r.item_id + "\x1f" + std::to_string(r.timestamp);
        if (!review_keys.insert(key).second) {
            rep.rejected.push_back(main_path + ":" + std::to_string(lineno) +
                                   ": duplicate (user,item,timestamp)");
            continue;
        }
        reviews.push_back(std::move(r));
        ++rep.accepted;
    }
    if (reviews.empty()) throw std::runtime_error("ingest: no valid review records in " + main_path);
    return Corpus(std::move(reviews), std::move(items));
}

void write_corpus(const Corpus& corpus, const std::string& main_path,
                  const std::string& meta_path) {
    std::ofstream main(main_path, std::ios::binary);
    if (!main) throw std::runtime_error("write_corpus: cannot write " + main_path);
    for (const Review& r : corpus.reviews()) {
        json j{{"user_id", r.user_id}, {"item_id", r.item_id},   {"title", r.title},
               {"text", r.text},       {"rating", r.rating},     {"timestamp", r.timestamp}};
        main << j.dump() << "\n";
    }
    std::ofstream meta(meta_path, std::ios::binary);
    if (!meta) throw std::runtime_error("write_corpus: cannot write " + meta_path);
    for (const Item& it : corpus.items()) {
        json j{{"item_id", it.item_id}, {"title", it.title}, {"description", it.description}};
        meta << j.dump() << "\n";
    }
}

namespace {

const char* kAdjectives[] = {
    "zesty",  "mellow", "crisp",  "somber", "giddy",  "stark",   "plush",  "briny",
    "dusky",  "jaunty", "placid", "rugged", "sleek",  "tangy",   "vivid",  "wistful",
    "breezy", "candid", "dapper", "earnest", "fickle", "gallant", "hearty", "impish"};
const char* kNouns[] = {
    "marmalade", "thunder", "velvet",  "ledger",  "harbor",  "lantern", "compass", "meadow",
    "ember",     "quartz",  "ribbon",  "saddle",  "timber",  "walnut",  "anchor",  "bramble",
    "cobble",    "drizzle", "fathom",  "gosling", "hemlock", "ivory",   "juniper", "kestrel"};
const char* kRatingPhrases[] = {"awful one of five", "weak two of five", "fair three of five",
                                "solid four of five", "superb five of five"};

constexpr std::int64_t kBaseTimestamp = 1600000000000;

std::string zero_pad(int v, int width) {
    std::string s = std::to_string(v);
    while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
    return s;
}

}  // namespace

std::uint64_t SynthConfig::content_hash() const {
    HashAccumulator h;
    h.update("synth-v1");
    h.update_u64(static_cast<std::uint64_t>(users));
    h.update_u64(static_cast<std::uint64_t>(items));
    h.update_u64(static_cast<std::uint64_t>(reviews_per_user));
    h.update_u64(seed);
    return h.digest();
}

Corpus generate_synthetic(const SynthConfig& config) {
    if (config.users < 1 || config.items < 1 || config.reviews_per_user < 1) {
        throw std::invalid_argument("generate_synthetic: counts must be positive");
    }
    if (config.reviews_per_user > config.items) {
        throw std::invalid_argument(
            "generate_synthetic: more reviews per user than items (infeasible density)");
    }
    const int n_adj = static_cast<int>(std::size(kAdjectives));
    const int n_noun = static_cast<int>(std::size(kNouns));

    Rng rng(derive_seed(config.seed, "synth"));

    // Distinct catchphrases: a seeded walk over the adjective x noun grid.
    std::vector<int> combo(static_cast<std::size_t>(n_adj * n_noun));
    for (std::size_t i = 0; i < combo.size(); ++i) combo[i] = static_cast<int>(i);
    for (std::size_t i = combo.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng.next_below(i));
        std::swap(combo[i - 1], combo[j]);
    }

    std::vector<Item> items;
    items.reserve(static_cast<std::size_t>(config.items));
    for (int i = 0; i < config.items; ++i) {
        Item item;
        item.item_id = "i" + zero_pad(i, 4);
        const char* a = kAdjectives[rng.next_below(static_cast<std::uint64_t>(n_adj))];
        const char* n = kNouns[rng.next_below(static_cast<std::uint64_t>(n_noun))];
        item.title = std::string(a) + " " + n;
        item.description = "a " + std::string(a) + " " + n + " for every shelf";
        items.push_back(std::move(item));
    }

    std::vector<Review> reviews;
    reviews.reserve(static_cast<std::size_t>(config.users * config.reviews_per_user));
    std::vector<int> item_load(static_cast<std::size_t>(config.items), 0);

    for (int u = 0; u < config.users; ++u) {
        const std::string user_id = "u" + zero_pad(u, 4);
        const int c = combo[static_cast<std::size_t>(u) % combo.size()];
        const std::string catchphrase =
            std::string(kAdjectives[c / n_noun]) + " " + kNouns[c % n_noun];
        const int rating_bias = static_cast<int>(rng.next_below(3)) - 1;

        // Favor the least-reviewed items so peers exist wherever density
        // permits; the per-user rotation decorrelates equal-load picks.
        std::vector<int> order(static_cast<std::size_t>(config.items));
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            if (item_load[static_cast<std::size_t>(a)] != item_load[static_cast<std::size_t>(b)]) {
                return item_load[static_cast<std::size_t>(a)] < item_load[static_cast<std::size_t>(b)];
            }
            return (a + u * 7) % config.items < (b + u * 7) % config.items;
        });

        for (int j = 0; j < config.reviews_per_user; ++j) {
            const int item_idx = order[static_cast<std::size_t>(j)];
            ++item_load[static_cast<std::size_t>(item_idx)];
            const Item& item = items[static_cast<std::size_t>(item_idx)];

            const int item_effect =
                static_cast<int>(splitmix64(config.seed ^ fnv1a64(item.item_id)) % 3) - 1;
            int rating = 3 + rating_bias + item_effect;
            rating = std::max(1, std::min(5, rating));

            Review r;
            r.user_id = user_id;
            r.item_id = item.item_id;
            r.title = "my take on " + item.title;
            r.rating = rating;
            r.text = catchphrase + "! " + kRatingPhrases[rating - 1] + ". " + catchphrase + ".";
            r.timestamp = kBaseTimestamp +
                          static_cast<std::int64_t>(u) * 1000003 +
                          static_cast<std::int64_t>(j) * 86400000;
            reviews.push_back(std::move(r));
        }
    }
    return Corpus(std::move(reviews), std::move(items));
}

Splits split(const Corpus& corpus, const SplitPolicy& policy) {
    Splits out;
    std::vector<TargetInstance> heldout;
    for (const std::string& user : corpus.user_ids()) {
        const std::vector<int>& idx = corpus.user_reviews(user);
        if (idx.size() < 2) continue;  // nothing left to retrieve for a target
        out.train.push_back(TargetInstance{idx[0]});
        heldout.push_back(TargetInstance{idx[1]});
    }
    // Seeded validation sample from the held-out pool; the rest is test.
    std::vector<std::size_t> order(heldout.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(derive_seed(policy.seed, "split"));
    for (std::size_t i = order.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng.next_below(i));
        std::swap(order[i - 1], order[j]);
    }
    const std::size_t val_n =
        std::min<std::size_t>(static_cast<std::size_t>(std::max(0, policy.validation_size)),
                              heldout.size());
    std::vector<bool> is_val(heldout.size(), false);
    for (std::size_t i = 0; i < val_n; ++i) is_val[order[i]] = true;
    for (std::size_t i = 0; i < heldout.size(); ++i) {
        (is_val[i] ? out.validation : out.test).push_back(heldout[i]);
    }
    return out;
}

}  // namespace dep
