#include "shapedis/pipeline/manifest.hpp"

#include "shapedis/common/error.hpp"
#include "shapedis/common/hash.hpp"

#include "json.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace shapedis::pipeline {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

const Artifact* RunManifest::find(const std::string& name) const {
    auto it = artifacts.find(name);
    return it == artifacts.end() ? nullptr : &it->second;
}

std::vector<std::string> RunManifest::produced_by(const std::string& stage) const {
    std::vector<std::string> out;
    for (const auto& [name, a] : artifacts) {
        if (a.stage == stage) out.push_back(name);
    }
    return out;
}

void RunManifest::forget_stage(const std::string& stage) {
    std::erase_if(artifacts, [&](const auto& kv) { return kv.second.stage == stage; });
    timings.erase(stage);
}

std::string manifest_to_json(const RunManifest& m) {
    ordered_json j;
    j["run_id"] = m.run_id;
    j["tool_version"] = m.tool_version;
    j["config_hash"] = m.config_hash;
    j["config"] = m.config_snapshot.empty() ? ordered_json::object() : ordered_json::parse(m.config_snapshot);
    j["seeds"] = m.seeds;
    ordered_json arts = ordered_json::object();
    for (const auto& [name, a] : m.artifacts) {
        ordered_json e;
        e["path"] = a.path;
        e["sha256"] = a.sha256;
        e["stage"] = a.stage;
        if (!a.depends_on.empty()) e["depends_on"] = a.depends_on;
        arts[name] = e;
    }
    j["artifacts"] = arts;
    j["timings"] = m.timings;
    return j.dump(2) + "\n";
}

RunManifest manifest_from_json(const std::string& text) {
    RunManifest m;
    try {
        const auto j = ordered_json::parse(text);
        m.run_id = j.at("run_id");
        m.tool_version = j.at("tool_version");
        m.config_hash = j.at("config_hash");
        m.config_snapshot = j.at("config").dump();
        m.seeds = j.at("seeds").get<std::map<std::string, std::vector<std::uint64_t>>>();
        for (const auto& [name, e] : j.at("artifacts").items()) {
            Artifact a;
            a.path = e.at("path");
            a.sha256 = e.at("sha256");
            a.stage = e.at("stage");
            if (e.contains("depends_on")) a.depends_on = e.at("depends_on").get<std::map<std::string, std::string>>();
            m.artifacts[name] = a;
        }
        m.timings = j.at("timings").get<std::map<std::string, double>>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed manifest: ") + e.what());
    }
    return m;
}

RunManifest load_manifest(const fs::path& run_dir) {
    const fs::path p = run_dir / kManifestFile;
    std::ifstream in(p, std::ios::binary);
    if (!in) {
        throw DependencyError("no manifest in " + run_dir.string() + "; run `shapedis make-data` for this run id first");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return manifest_from_json(ss.str());
}

void save_manifest(const fs::path& run_dir, const RunManifest& m) {
    fs::create_directories(run_dir);
    const fs::path p = run_dir / kManifestFile;
    const fs::path tmp = p.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw InputError("cannot write " + tmp.string());
        out << manifest_to_json(m);
    }
    fs::rename(tmp, p);
}

Artifact& register_artifact(RunManifest& m, const fs::path& run_dir, const std::string& name,
                            const std::string& path, const std::string& stage,
                            std::map<std::string, std::string> depends_on) {
    Artifact a;
    a.path = path;
    a.sha256 = sha256_file(run_dir / path);
    a.stage = stage;
    a.depends_on = std::move(depends_on);
    return m.artifacts[name] = std::move(a);
}

const Artifact& require_artifact(const RunManifest& m, const fs::path& run_dir, const std::string& name,
                                 const std::string& hint) {
    const Artifact* a = m.find(name);
    if (!a) throw DependencyError("missing upstream artifact '" + name + "'; " + hint);
    const fs::path p = run_dir / a->path;
    if (!fs::exists(p)) throw DependencyError("artifact '" + name + "' missing on disk (" + a->path + "); " + hint);
    if (sha256_file(p) != a->sha256) {
        throw DependencyError("artifact '" + name + "' does not match its recorded hash; " + hint);
    }
    for (const auto& [dep, hash] : a->depends_on) {
        const Artifact* up = m.find(dep);
        if (!up || up->sha256 != hash) {
            throw DependencyError("artifact '" + name + "' was built from a different '" + dep + "'; " + hint);
        }
    }
    return *a;
}

std::vector<std::string> find_orphans(const fs::path& run_dir, const RunManifest& m) {
    std::set<std::string> known{kManifestFile, kLockFile};
    for (const auto& [name, a] : m.artifacts) known.insert(fs::path(a.path).lexically_normal().generic_string());
    std::vector<std::string> orphans;
    if (!fs::exists(run_dir)) return orphans;
    for (const auto& e : fs::recursive_directory_iterator(run_dir)) {
        if (!e.is_regular_file()) continue;
        const auto rel = fs::relative(e.path(), run_dir).lexically_normal().generic_string();
        if (!known.count(rel)) orphans.push_back(rel);
    }
    std::sort(orphans.begin(), orphans.end());
    return orphans;
}

RunLock::RunLock(const fs::path& run_dir) : path_(run_dir / kLockFile) {
    fs::create_directories(run_dir);
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
        if (errno == EEXIST) {
            throw Error("run directory " + run_dir.string() + " is locked by another process (remove " +
                        path_.string() + " if it is stale)");
        }
        throw Error("cannot create lock " + path_.string() + ": " + std::strerror(errno));
    }
    const std::string pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
    ::close(fd);
}

RunLock::~RunLock() {
    std::error_code ec;
    fs::remove(path_, ec);
}

fs::path runs_root() {
    if (const char* env = std::getenv("SHAPEDIS_RUNS_DIR"); env && *env) return env;
    return "runs";
}

}  // namespace shapedis::pipeline
