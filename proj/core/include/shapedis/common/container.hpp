#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace shapedis {

/// Versioned binary container used by checkpoints.
///
/// Layout (little-endian):
///   magic bytes | uint32 version | uint32 entry count |
///   entries: uint32 name length, name bytes, uint64 payload length, payload.
/// Entries are written in name order so equal contents give equal files.
class Container {
public:
    void put(const std::string& name, std::string payload) { entries_[name] = std::move(payload); }
    void put_u64(const std::string& name, std::uint64_t value);

    bool has(const std::string& name) const { return entries_.count(name) != 0; }
    /// Throws FormatError when the entry is absent.
    const std::string& get(const std::string& name) const;
    std::uint64_t get_u64(const std::string& name) const;

    const std::map<std::string, std::string>& entries() const { return entries_; }

    std::string serialize(std::string_view magic, std::uint32_t version) const;
    static Container parse(std::string_view bytes, std::string_view magic, std::uint32_t version);

    void write(const std::filesystem::path& path, std::string_view magic, std::uint32_t version) const;
    static Container read(const std::filesystem::path& path, std::string_view magic,
                          std::uint32_t version);

private:
    std::map<std::string, std::string> entries_;
};

}  // namespace shapedis
