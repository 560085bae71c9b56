#include "pfstab/fileio.hpp"

#include <fstream>
#include <sstream>

#include "pfstab/error.hpp"

namespace pfstab {

std::string read_text_file(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) fail(ErrorKind::MissingArtifact, "missing file " + path.string());
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorKind::Io, "cannot write " + tmp.string());
        out << contents;
        if (!out.flush()) fail(ErrorKind::Io, "short write to " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) fail(ErrorKind::Io, "cannot rename " + tmp.string() + ": " + ec.message());
}

}  // namespace pfstab
