#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "llmgate/common.hpp"

namespace llmgate {

class DuplicateArticleNumber : public Error {
public:
    using Error::Error;
};

class EmptyDocument : public Error {
public:
    using Error::Error;
};

/// One numbered rule from an organizational policy document; the unit of
/// retrieval and of violation citation.
struct PolicyArticle {
    std::string doc_id;
    int article_no = 0;
    std::string text;
    std::set<std::string> tags;
};

struct PolicyDocument {
    std::string doc_id;
    std::string title;
    int version = 1;
    std::vector<PolicyArticle> articles;  // ascending article_no
    std::string raw_text;
};

struct RetrievalResult {
    PolicyArticle article;
    double score = 0.0;
};

/// Splits policy text into numbered articles. Lines beginning with
/// "Article <N>:" or "Article <N>;" start a new article; following lines
/// belong to it until the next marker. Documents without markers fall back
/// to paragraph chunks (blank-line separated) numbered 1..n. Articles whose
/// body trims to nothing are dropped.
inline std::vector<PolicyArticle> parse_articles(std::string_view raw_text) {
    static const std::regex marker(R"(^\s*article\s+(\d+)\s*[:;]\s*(.*)$)",
                                   std::regex::icase);
    std::vector<PolicyArticle> out;
    std::set<int> seen;

    auto push = [&](int no, const std::string& body) {
        std::string text = trim(body);
        if (text.empty()) return;
        if (!seen.insert(no).second)
            throw DuplicateArticleNumber("duplicate article number " + std::to_string(no));
        PolicyArticle a;
        a.article_no = no;
        a.text = std::move(text);
        out.push_back(std::move(a));
    };

    bool any_marker = false;
    int cur_no = 0;
    std::string cur_body;
    for (const std::string& line : split_lines(raw_text)) {
        std::smatch m;
        if (std::regex_match(line, m, marker)) {
            long no = 0;
            try {
                no = std::stol(m[1].str());
            } catch (const std::exception&) {
                no = -1;  // out of range; treat as plain text
            }
            if (no >= 1 && no <= 1'000'000'000) {
                if (any_marker) push(cur_no, cur_body);
                any_marker = true;
                cur_no = static_cast<int>(no);
                cur_body = m[2].str();
                continue;
            }
        }
        if (any_marker) {
            cur_body.push_back('\n');
            cur_body.append(line);
        }
    }
    if (any_marker) {
        push(cur_no, cur_body);
        return out;
    }

    // Paragraph-chunk fallback for unstructured documents.
    std::string para;
    std::vector<std::string> paras;
    for (const std::string& line : split_lines(raw_text)) {
        if (trim(line).empty()) {
            if (!trim(para).empty()) paras.push_back(para);
            para.clear();
        } else {
            if (!para.empty()) para.push_back('\n');
            para.append(line);
        }
    }
    if (!trim(para).empty()) paras.push_back(para);
    int no = 1;
    for (const std::string& p : paras) push(no++, p);
    return out;
}

/// Immutable view of the store at a point in time. Retrieval against a
/// snapshot is a pure function of (snapshot, query, k); later ingests never
/// affect it.
class PolicySnapshot {
public:
    PolicySnapshot(std::string snapshot_id,
                   std::vector<std::shared_ptr<const PolicyDocument>> documents,
                   Millis created_at)
        : snapshot_id_(std::move(snapshot_id)),
          documents_(std::move(documents)),
          created_at_(created_at) {
        for (const auto& doc : documents_) {
            for (const PolicyArticle& a : doc->articles) {
                Entry e;
                e.article = &a;
                auto tokens = tokenize(a.text);
                e.length = tokens.size();
                for (const std::string& t : tokens) e.tf[t] += 1;
                for (const auto& [term, n] : e.tf) df_[term] += 1;
                total_len_ += e.length;
                entries_.push_back(std::move(e));
            }
        }
    }

    const std::string& snapshot_id() const { return snapshot_id_; }
    Millis created_at() const { return created_at_; }
    const std::vector<std::shared_ptr<const PolicyDocument>>& documents() const {
        return documents_;
    }

    std::size_t article_count() const { return entries_.size(); }

    bool empty() const { return entries_.empty(); }

    /// BM25 (k1 = 1.2, b = 0.75) over lowercase alphanumeric token bags.
    /// Returns min(k, article_count) results sorted by
    /// (score desc, doc_id asc, article_no asc). Articles sharing no token
    /// with the query score exactly 0.
    std::vector<RetrievalResult> retrieve(std::string_view query, std::size_t k) const {
        if (k < 1) throw Error("retrieve: k must be >= 1");
        const auto qtokens = tokenize(query);
        const double n_docs = static_cast<double>(entries_.size());
        const double avgdl =
            entries_.empty() ? 0.0 : static_cast<double>(total_len_) / n_docs;

        std::vector<RetrievalResult> results;
        results.reserve(entries_.size());
        for (const Entry& e : entries_) {
            double score = 0.0;
            for (const std::string& t : qtokens) {
                auto it = e.tf.find(t);
                if (it == e.tf.end()) continue;
                const double tf = static_cast<double>(it->second);
                const double df = static_cast<double>(df_.at(t));
                const double idf = std::log(1.0 + (n_docs - df + 0.5) / (df + 0.5));
                const double norm =
                    kK1 * (1.0 - kB + kB * (static_cast<double>(e.length) / avgdl));
                score += idf * (tf * (kK1 + 1.0)) / (tf + norm);
            }
            results.push_back(RetrievalResult{*e.article, score});
        }
        std::sort(results.begin(), results.end(),
                  [](const RetrievalResult& a, const RetrievalResult& b) {
                      if (a.score != b.score) return a.score > b.score;
                      if (a.article.doc_id != b.article.doc_id)
                          return a.article.doc_id < b.article.doc_id;
                      return a.article.article_no < b.article.article_no;
                  });
        if (results.size() > k) results.resize(k);
        return results;
    }

    static constexpr double kK1 = 1.2;
    static constexpr double kB = 0.75;

private:
    struct Entry {
        const PolicyArticle* article;  // owned by documents_
        std::unordered_map<std::string, int> tf;
        std::size_t length = 0;
    };

    std::string snapshot_id_;
    std::vector<std::shared_ptr<const PolicyDocument>> documents_;
    Millis created_at_ = 0;
    std::vector<Entry> entries_;
    std::unordered_map<std::string, int> df_;
    std::size_t total_len_ = 0;
};

using SnapshotPtr = std::shared_ptr<const PolicySnapshot>;

/// Read-mostly store. Ingestion serializes writes; snapshots are immutable
/// and shared, so readers never block on writers.
class PolicyStore {
public:
    explicit PolicyStore(Clock clock = system_clock()) : clock_(std::move(clock)) {}

    /// Parses and stores a document. The title doubles as the document id;
    /// re-ingesting a title bumps the version and replaces the previous
    /// articles in future snapshots.
    std::string ingest_document(const std::string& title, std::string_view raw_text) {
        if (trim(title).empty()) throw Error("ingest_document: title must be non-empty");
        auto articles = parse_articles(raw_text);
        if (articles.empty())
            throw EmptyDocument("document '" + title + "' parsed to zero articles");

        std::lock_guard lock(mutex_);
        auto doc = std::make_shared<PolicyDocument>();
        doc->doc_id = title;
        doc->title = title;
        doc->raw_text = std::string(raw_text);
        auto it = documents_.find(title);
        doc->version = it == documents_.end() ? 1 : it->second->version + 1;
        for (PolicyArticle& a : articles) a.doc_id = doc->doc_id;
        doc->articles = std::move(articles);
        documents_[title] = std::move(doc);
        ++ingest_count_;
        return title;
    }

    SnapshotPtr snapshot() const {
        std::lock_guard lock(mutex_);
        std::vector<std::shared_ptr<const PolicyDocument>> docs;
        docs.reserve(documents_.size());
        for (const auto& [title, doc] : documents_) docs.push_back(doc);
        return std::make_shared<PolicySnapshot>("s" + std::to_string(ingest_count_),
                                                std::move(docs), clock_());
    }

    std::vector<std::shared_ptr<const PolicyDocument>> list_documents() const {
        std::lock_guard lock(mutex_);
        std::vector<std::shared_ptr<const PolicyDocument>> docs;
        docs.reserve(documents_.size());
        for (const auto& [title, doc] : documents_) docs.push_back(doc);
        return docs;
    }

private:
    Clock clock_;
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<const PolicyDocument>> documents_;  // by doc_id
    std::uint64_t ingest_count_ = 0;
};

inline std::vector<RetrievalResult> retrieve(const PolicySnapshot& snapshot,
                                             std::string_view query, std::size_t k) {
    return snapshot.retrieve(query, k);
}

}  // namespace llmgate
