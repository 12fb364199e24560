#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace shapedis::pipeline {

inline constexpr const char* kToolVersion = "shapedis 0.1.0";
inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kLockFile = ".lock";

struct Artifact {
    std::string path;    // relative to the run directory
    std::string sha256;
    std::string stage;   // producing command
    /// Artifact name this one was derived from with its hash at the time.
    std::map<std::string, std::string> depends_on;
};

/// Persisted record of one run; lives at <run dir>/manifest.json.
struct RunManifest {
    std::string run_id;
    std::string tool_version = kToolVersion;
    std::string config_snapshot;  // JSON text
    std::string config_hash;
    std::map<std::string, std::vector<std::uint64_t>> seeds;  // purpose -> seeds
    std::map<std::string, Artifact> artifacts;  // keyed by name
    std::map<std::string, double> timings;      // seconds per command

    const Artifact* find(const std::string& name) const;
    /// Names of the artifacts produced by a stage.
    std::vector<std::string> produced_by(const std::string& stage) const;
    /// Drops every artifact of a stage (files stay untouched).
    void forget_stage(const std::string& stage);
};

RunManifest load_manifest(const std::filesystem::path& run_dir);
/// Atomic write (temp file + rename).
void save_manifest(const std::filesystem::path& run_dir, const RunManifest& manifest);
std::string manifest_to_json(const RunManifest& manifest);
RunManifest manifest_from_json(const std::string& text);

/// Hashes `path` (relative to the run dir) and records it.
Artifact& register_artifact(RunManifest& manifest, const std::filesystem::path& run_dir, const std::string& name,
                            const std::string& path, const std::string& stage,
                            std::map<std::string, std::string> depends_on = {});

/// Checks that `name` is recorded, exists on disk and still has its hash.
/// Throws DependencyError whose message ends with `hint`.
const Artifact& require_artifact(const RunManifest& manifest, const std::filesystem::path& run_dir,
                                 const std::string& name, const std::string& hint);

/// Files under the run directory not recorded in the manifest (the manifest
/// itself and the lock file excepted), sorted.
std::vector<std::string> find_orphans(const std::filesystem::path& run_dir, const RunManifest& manifest);

/// Exclusive lock on a run directory, released on destruction. Throws Error
/// if another process holds it.
class RunLock {
public:
    explicit RunLock(const std::filesystem::path& run_dir);
    ~RunLock();
    RunLock(const RunLock&) = delete;
    RunLock& operator=(const RunLock&) = delete;

private:
    std::filesystem::path path_;
};

/// $SHAPEDIS_RUNS_DIR or ./runs.
std::filesystem::path runs_root();

}  // namespace shapedis::pipeline
