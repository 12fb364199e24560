#include "shapedis/common/container.hpp"

#include "shapedis/common/error.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace shapedis {
namespace {

template <class T>
void append_le(std::string& out, T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        out.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF));
    }
}

template <class T>
T read_le(std::string_view bytes, std::size_t& pos) {
    if (pos + sizeof(T) > bytes.size()) {
        throw FormatError("container truncated");
    }
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
    }
    pos += sizeof(T);
    return static_cast<T>(v);
}

}  // namespace

void Container::put_u64(const std::string& name, std::uint64_t value) {
    std::string s;
    append_le(s, value);
    entries_[name] = std::move(s);
}

const std::string& Container::get(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) {
        throw FormatError("container entry missing: " + name);
    }
    return it->second;
}

std::uint64_t Container::get_u64(const std::string& name) const {
    const std::string& s = get(name);
    std::size_t pos = 0;
    return read_le<std::uint64_t>(s, pos);
}

std::string Container::serialize(std::string_view magic, std::uint32_t version) const {
    std::string out(magic);
    append_le(out, version);
    append_le(out, static_cast<std::uint32_t>(entries_.size()));
    for (const auto& [name, payload] : entries_) {
        append_le(out, static_cast<std::uint32_t>(name.size()));
        out += name;
        append_le(out, static_cast<std::uint64_t>(payload.size()));
        out += payload;
    }
    return out;
}

Container Container::parse(std::string_view bytes, std::string_view magic, std::uint32_t version) {
    if (bytes.substr(0, magic.size()) != magic) {
        throw FormatError("bad magic, expected " + std::string(magic));
    }
    std::size_t pos = magic.size();
    const auto file_version = read_le<std::uint32_t>(bytes, pos);
    if (file_version != version) {
        throw FormatError("unsupported " + std::string(magic) + " version " +
                          std::to_string(file_version));
    }
    const auto count = read_le<std::uint32_t>(bytes, pos);
    Container c;
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto name_len = read_le<std::uint32_t>(bytes, pos);
        if (pos + name_len > bytes.size()) {
            throw FormatError("container truncated");
        }
        std::string name(bytes.substr(pos, name_len));
        pos += name_len;
        const auto len = read_le<std::uint64_t>(bytes, pos);
        if (pos + len > bytes.size()) {
            throw FormatError("container truncated");
        }
        c.entries_[name] = std::string(bytes.substr(pos, len));
        pos += len;
    }
    return c;
}

void Container::write(const std::filesystem::path& path, std::string_view magic,
                      std::uint32_t version) const {
    const std::string bytes = serialize(magic, version);
    auto tmp = path;
    tmp += ".tmp";
    {
        if (tmp.has_parent_path()) std::filesystem::create_directories(tmp.parent_path());
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw InputError("cannot write " + path.string());
        }
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw InputError("write failed: " + path.string());
    }
    std::filesystem::rename(tmp, path);
}

Container Container::read(const std::filesystem::path& path, std::string_view magic,
                          std::uint32_t version) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InputError("cannot read " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), magic, version);
}

}  // namespace shapedis
