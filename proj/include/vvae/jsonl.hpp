#ifndef VVAE_JSONL_HPP
#define VVAE_JSONL_HPP

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "vvae/error.hpp"

namespace vvae {

/// Compact single-line dump; invalid UTF-8 is replaced rather than thrown on.
inline std::string dump_line(const nlohmann::ordered_json& j) {
    return j.dump(-1, ' ', false, nlohmann::ordered_json::error_handler_t::replace);
}

/// Calls `fn(line_text, line_number)` for each non-blank line (1-based numbers).
inline void for_each_line(const std::string& path,
                          const std::function<void(const std::string&, std::size_t)>& fn) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path, "cannot open for reading");
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        fn(line, n);
    }
}

/// Writes `content` to a sibling temp file and renames it over `path`.
inline void write_file_atomic(const std::string& path, const std::string& content) {
    static std::atomic<unsigned> counter{0};
    const std::filesystem::path target(path);
    if (target.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(target.parent_path(), ec);
    }
    const std::string tmp = path + ".tmp." + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())) +
                            "." + std::to_string(counter.fetch_add(1));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError(tmp, "cannot open for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) throw IoError(tmp, "write failed");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, target, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw IoError(path, "rename failed");
    }
}

inline std::string to_jsonl(const std::vector<nlohmann::ordered_json>& rows) {
    std::string out;
    for (const auto& r : rows) {
        out += dump_line(r);
        out += '\n';
    }
    return out;
}

} // namespace vvae

#endif // VVAE_JSONL_HPP
