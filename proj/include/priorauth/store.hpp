#pragma once

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <vector>

#include "priorauth/error.hpp"
#include "priorauth/record.hpp"

namespace priorauth {

/// Durable key-value store of adjudication records with an append-only
/// audit log. Updates are compare-and-set on the record version.
class RecordStore {
 public:
  virtual ~RecordStore() = default;

  /// Stores a new record. Throws Error if the id is taken.
  virtual void create(const AdjudicationRecord& rec) = 0;

  /// Replaces the record if the stored version equals `expected_version`;
  /// otherwise throws ConcurrentOverrideConflict. Throws UnknownRecord.
  virtual void update(const AdjudicationRecord& rec, std::uint64_t expected_version) = 0;

  virtual std::optional<AdjudicationRecord> get(const std::string& id) const = 0;

  /// Records sorted by id, optionally filtered by status.
  virtual std::vector<AdjudicationRecord> list(std::optional<RecordStatus> status = std::nullopt) const = 0;

  virtual void append_audit(const AuditEntry& entry) = 0;
  virtual std::vector<AuditEntry> audit_log() const = 0;
};

inline void check_record_id(const std::string& id) {
  const bool ok = !id.empty() && id.size() <= 128 && id[0] != '.' &&
                  std::all_of(id.begin(), id.end(), [](char c) {
                    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '-' || c == '_' || c == '.';
                  });
  if (!ok) throw Error("invalid record id '" + id + "'");
}

class MemoryStore final : public RecordStore {
 public:
  void create(const AdjudicationRecord& rec) override {
    check_record_id(rec.id);
    std::unique_lock lock(mu_);
    if (records_.contains(rec.id)) throw Error("record '" + rec.id + "' already exists");
    records_[rec.id] = std::make_shared<const AdjudicationRecord>(rec);
  }

  void update(const AdjudicationRecord& rec, std::uint64_t expected_version) override {
    std::unique_lock lock(mu_);
    auto it = records_.find(rec.id);
    if (it == records_.end()) throw UnknownRecord("no record '" + rec.id + "'");
    if (it->second->version != expected_version) {
      throw ConcurrentOverrideConflict("record '" + rec.id + "' is at version " + std::to_string(it->second->version) +
                                       ", not " + std::to_string(expected_version));
    }
    it->second = std::make_shared<const AdjudicationRecord>(rec);
  }

  std::optional<AdjudicationRecord> get(const std::string& id) const override {
    std::shared_ptr<const AdjudicationRecord> snap;
    {
      std::shared_lock lock(mu_);
      auto it = records_.find(id);
      if (it == records_.end()) return std::nullopt;
      snap = it->second;
    }
    return *snap;
  }

  std::vector<AdjudicationRecord> list(std::optional<RecordStatus> status = std::nullopt) const override {
    std::vector<std::shared_ptr<const AdjudicationRecord>> snaps;
    {
      std::shared_lock lock(mu_);
      for (const auto& [_, r] : records_) snaps.push_back(r);
    }
    std::vector<AdjudicationRecord> out;
    for (const auto& r : snaps) {
      if (!status || r->status == *status) out.push_back(*r);
    }
    return out;
  }

  void append_audit(const AuditEntry& entry) override {
    std::unique_lock lock(mu_);
    audit_.push_back(entry);
  }

  std::vector<AuditEntry> audit_log() const override {
    std::shared_lock lock(mu_);
    return audit_;
  }

 private:
  mutable std::shared_mutex mu_;
  std::map<std::string, std::shared_ptr<const AdjudicationRecord>> records_;
  std::vector<AuditEntry> audit_;
};

/// Records as <root>/records/<id>.json, replaced atomically by rename;
/// audit entries appended to <root>/audit.log as JSON lines. Writers take
/// an advisory file lock so several processes can share one directory.
class FileStore final : public RecordStore {
 public:
  explicit FileStore(std::filesystem::path root) : root_(std::move(root)) {
    std::filesystem::create_directories(root_ / "records");
  }

  const std::filesystem::path& root() const { return root_; }

  void create(const AdjudicationRecord& rec) override {
    check_record_id(rec.id);
    auto lock = lock_dir();
    if (std::filesystem::exists(path_of(rec.id))) throw Error("record '" + rec.id + "' already exists");
    write_atomic(rec);
  }

  void update(const AdjudicationRecord& rec, std::uint64_t expected_version) override {
    check_record_id(rec.id);
    auto lock = lock_dir();
    auto current = get(rec.id);
    if (!current) throw UnknownRecord("no record '" + rec.id + "'");
    if (current->version != expected_version) {
      throw ConcurrentOverrideConflict("record '" + rec.id + "' is at version " + std::to_string(current->version) +
                                       ", not " + std::to_string(expected_version));
    }
    write_atomic(rec);
  }

  std::optional<AdjudicationRecord> get(const std::string& id) const override {
    check_record_id(id);
    std::ifstream in(path_of(id));
    if (!in) return std::nullopt;
    std::stringstream buf;
    buf << in.rdbuf();
    auto j = nlohmann::json::parse(buf.str(), nullptr, false);
    if (j.is_discarded()) throw SchemaError("record file for '" + id + "' is not JSON");
    return record_from_json(j);
  }

  std::vector<AdjudicationRecord> list(std::optional<RecordStatus> status = std::nullopt) const override {
    std::vector<std::string> ids;
    for (const auto& e : std::filesystem::directory_iterator(root_ / "records")) {
      if (e.path().extension() == ".json") ids.push_back(e.path().stem().string());
    }
    std::sort(ids.begin(), ids.end());
    std::vector<AdjudicationRecord> out;
    for (const auto& id : ids) {
      auto r = get(id);
      if (r && (!status || r->status == *status)) out.push_back(std::move(*r));
    }
    return out;
  }

  void append_audit(const AuditEntry& entry) override {
    auto lock = lock_dir();
    std::ofstream out(root_ / "audit.log", std::ios::app);
    out << to_json(entry).dump() << '\n';
    out.flush();
    if (!out) throw Error("cannot append to audit log");
  }

  std::vector<AuditEntry> audit_log() const override {
    std::vector<AuditEntry> out;
    std::ifstream in(root_ / "audit.log");
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty()) out.push_back(audit_entry_from_json(nlohmann::json::parse(line)));
    }
    return out;
  }

 private:
  class DirLock {
   public:
    DirLock(std::mutex& mu, const std::filesystem::path& file) : guard_(mu) {
      fd_ = ::open(file.c_str(), O_CREAT | O_RDWR, 0644);
      if (fd_ >= 0) ::flock(fd_, LOCK_EX);
    }
    ~DirLock() {
      if (fd_ >= 0) {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
      }
    }
    DirLock(const DirLock&) = delete;
    DirLock& operator=(const DirLock&) = delete;

   private:
    std::lock_guard<std::mutex> guard_;
    int fd_ = -1;
  };

  DirLock lock_dir() const { return DirLock(mu_, root_ / ".lock"); }

  std::filesystem::path path_of(const std::string& id) const { return root_ / "records" / (id + ".json"); }

  void write_atomic(const AdjudicationRecord& rec) const {
    const auto target = path_of(rec.id);
    auto tmp = target;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::trunc);
      out << to_json(rec).dump(2) << '\n';
      out.flush();
      if (!out) throw Error("cannot write " + tmp.string());
    }
    std::filesystem::rename(tmp, target);
  }

  std::filesystem::path root_;
  mutable std::mutex mu_;
};

}  // namespace priorauth
