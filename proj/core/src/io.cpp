#include "mila/io.hpp"

#include <fstream>
#include <sstream>
#include <system_error>

#include "mila/diagnostic.hpp"

namespace mila {

namespace fs = std::filesystem;

std::string read_text_file(const fs::path& path, const std::string& code) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(code, "cannot read " + path.string(), path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file_atomic(const fs::path& path, std::string_view content, const std::string& code) {
    std::error_code ec;
    if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
    if (ec) throw Error(code, "cannot create " + path.parent_path().string() + ": " + ec.message(), path.string());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) {
            out.close();
            fs::remove(tmp, ec);
            throw Error(code, "cannot write " + path.string(), path.string());
        }
    }
    fs::rename(tmp, path, ec);
    if (ec) {
        std::error_code ignored;
        fs::remove(tmp, ignored);
        throw Error(code, "cannot replace " + path.string() + ": " + ec.message(), path.string());
    }
}

std::string_view strip_comment_lines(std::string_view text) {
    while (text.starts_with('#')) {
        auto nl = text.find('\n');
        if (nl == std::string_view::npos) return {};
        text.remove_prefix(nl + 1);
    }
    return text;
}

}  // namespace mila
