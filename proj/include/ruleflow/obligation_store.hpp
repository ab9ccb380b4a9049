#pragma once

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ruleflow/errors.hpp"
#include "ruleflow/reasoner.hpp"

namespace ruleflow {

// ── obligation store ────────────────────────────────────────────────────────

/// One stored activation: which graph and process triggered which obligation,
/// with the argument/validity snapshots in canonical inline form.
struct StoreRecord {
    std::string graph;
    std::string process;
    std::string action;
    std::vector<std::string> args;
    std::vector<std::string> validity;
    std::string stage;
    bool violation = false;
    std::string recorded_at;

    /// Identity of the logical obligation, independent of where and when it
    /// was triggered — used by deduplicated listings.
    std::string logical_key() const {
        std::string key = action;
        key += '\x1e';
        for (const std::string& a : args) key += a + '\x1f';
        key += '\x1e';
        std::vector<std::string> sorted = validity;
        std::sort(sorted.begin(), sorted.end());
        for (const std::string& v : sorted) key += v + '\x1f';
        key += '\x1e' + stage + '\x1e' + (violation ? "1" : "0");
        return key;
    }
};

namespace detail {

class LockedFile {
public:
    LockedFile(const std::string& path, int open_flags, int lock_op) {
        fd_ = ::open(path.c_str(), open_flags, 0644);
        if (fd_ < 0) {
            throw IoError("cannot open obligation store '" + path + "': " + std::strerror(errno));
        }
        if (::flock(fd_, lock_op) != 0) {
            int err = errno;
            ::close(fd_);
            throw IoError("cannot lock obligation store '" + path + "': " + std::strerror(err));
        }
    }

    ~LockedFile() {
        if (fd_ >= 0) {
            ::flock(fd_, LOCK_UN);
            ::close(fd_);
        }
    }

    LockedFile(const LockedFile&) = delete;
    LockedFile& operator=(const LockedFile&) = delete;

    int fd() const { return fd_; }

private:
    int fd_ = -1;
};

}  // namespace detail

/**
 * Appends activation records to a store file: one JSON object per line,
 * append-only, written under an exclusive advisory lock (single writer at a
 * time; existing lines are never rewritten).
 */
inline void record_activations(const std::string& path, const std::string& graph_id,
                               const std::vector<ActivatedObligation>& activations,
                               const std::string& recorded_at) {
    if (activations.empty()) return;
    std::string payload;
    for (const ActivatedObligation& rec : activations) {
        std::vector<std::string> args;
        for (const Attribute& a : rec.args) args.push_back(attribute_inline(a));
        std::vector<std::string> validity;
        for (const Attribute& a : rec.validity) validity.push_back(attribute_inline(a));
        nlohmann::ordered_json line{{"graph", graph_id},       {"process", rec.process},
                                    {"action", rec.action_class}, {"args", args},
                                    {"validity", validity},    {"stage", rec.context},
                                    {"violation", rec.violation}, {"recordedAt", recorded_at}};
        payload += line.dump();
        payload += "\n";
    }
    detail::LockedFile file(path, O_WRONLY | O_CREAT | O_APPEND, LOCK_EX);
    std::size_t written = 0;
    while (written < payload.size()) {
        ssize_t n = ::write(file.fd(), payload.data() + written, payload.size() - written);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw IoError("cannot append to obligation store '" + path +
                          "': " + std::strerror(errno));
        }
        written += std::size_t(n);
    }
}

/// Reads every record in the store, oldest first (file order).
inline std::vector<StoreRecord> load_store(const std::string& path) {
    std::string content;
    {
        detail::LockedFile file(path, O_RDONLY, LOCK_SH);
        char buffer[4096];
        ssize_t n;
        while ((n = ::read(file.fd(), buffer, sizeof buffer)) > 0) {
            content.append(buffer, std::size_t(n));
        }
        if (n < 0) {
            throw IoError("cannot read obligation store '" + path + "': " + std::strerror(errno));
        }
    }
    std::vector<StoreRecord> records;
    std::size_t start = 0;
    int line_no = 0;
    while (start < content.size()) {
        std::size_t end = content.find('\n', start);
        if (end == std::string::npos) end = content.size();
        std::string line = content.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw IoError("obligation store '" + path + "' line " + std::to_string(line_no) +
                          " is not valid JSON: " + e.what());
        }
        StoreRecord rec;
        rec.graph = j.value("graph", std::string{});
        rec.process = j.value("process", std::string{});
        rec.action = j.value("action", std::string{});
        for (const nlohmann::json& a : j.value("args", nlohmann::json::array())) {
            rec.args.push_back(a.get<std::string>());
        }
        for (const nlohmann::json& v : j.value("validity", nlohmann::json::array())) {
            rec.validity.push_back(v.get<std::string>());
        }
        rec.stage = j.value("stage", std::string{});
        rec.violation = j.value("violation", false);
        rec.recorded_at = j.value("recordedAt", std::string{});
        records.push_back(std::move(rec));
    }
    return records;
}

struct StoreFilter {
    bool violations_only = false;
    bool dedup = false;  // collapse records of the same logical obligation
};

/// Filters store records, preserving order; with `dedup`, the first record of
/// each logical obligation survives.
inline std::vector<StoreRecord> list_records(const std::vector<StoreRecord>& records,
                                             const StoreFilter& filter) {
    std::vector<StoreRecord> out;
    std::set<std::string> seen;
    for (const StoreRecord& rec : records) {
        if (filter.violations_only && !rec.violation) continue;
        if (filter.dedup && !seen.insert(rec.logical_key()).second) continue;
        out.push_back(rec);
    }
    return out;
}

}  // namespace ruleflow
