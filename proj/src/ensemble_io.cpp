#include <charconv>
#include <cstring>
#include <sstream>

#include <json.hpp>

#include "pfstab/error.hpp"
#include "pfstab/fileio.hpp"
#include "pfstab/rng.hpp"
#include "pfstab/text.hpp"
#include "pfstab/transfer.hpp"

namespace pfstab {

using nlohmann::json;

std::string format_pfmat(const SparseMatrix& m) {
    std::string out = "pfmat 1 " + std::to_string(m.rows()) + " " + std::to_string(m.cols()) + " " +
                      std::to_string(m.nnz()) + "\n";
    out.reserve(out.size() + m.nnz() * 40);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const auto cols = m.row_cols(i);
        const auto vals = m.row_values(i);
        for (std::size_t k = 0; k < cols.size(); ++k) {
            out += std::to_string(i);
            out += ' ';
            out += std::to_string(cols[k]);
            out += ' ';
            out += format_double(vals[k]);
            out += '\n';
        }
    }
    out += "checksum " + format_hex64(fnv1a64(out)) + "\n";
    return out;
}

namespace {

[[noreturn]] void corrupt(const std::string& origin, const std::string& what) {
    fail(ErrorKind::CorruptFile, origin + ": " + what);
}

template <typename T>
T parse_number(std::string_view token, const std::string& origin, std::size_t line) {
    T value{};
    const auto* end = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(token.data(), end, value);
    if (ec != std::errc() || ptr != end)
        corrupt(origin, "line " + std::to_string(line) + ": bad number '" + std::string(token) + "'");
    return value;
}

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> parts;
    std::size_t k = 0;
    while (k < line.size()) {
        while (k < line.size() && line[k] == ' ') ++k;
        std::size_t e = k;
        while (e < line.size() && line[e] != ' ') ++e;
        if (e > k) parts.push_back(line.substr(k, e - k));
        k = e;
    }
    return parts;
}

}  // namespace

SparseMatrix parse_pfmat(const std::string& text, const std::string& origin) {
    if (text.empty() || text.back() != '\n') corrupt(origin, "file is truncated");
    const std::size_t last_start = text.rfind('\n', text.size() - 2);
    const std::size_t body_end = last_start == std::string::npos ? 0 : last_start + 1;
    const std::string_view trailer(text.data() + body_end, text.size() - body_end - 1);
    const auto trailer_parts = split_ws(trailer);
    if (trailer_parts.size() != 2 || trailer_parts[0] != "checksum") corrupt(origin, "missing checksum line");
    const std::string_view body(text.data(), body_end);
    if (format_hex64(fnv1a64(body)) != trailer_parts[1]) corrupt(origin, "checksum mismatch");

    std::size_t pos = 0;
    std::size_t line_no = 0;
    auto next_line = [&]() -> std::string_view {
        const std::size_t e = body.find('\n', pos);
        const std::string_view line = body.substr(pos, e - pos);
        pos = e + 1;
        ++line_no;
        return line;
    };
    if (pos >= body.size()) corrupt(origin, "missing header");
    const auto header = split_ws(next_line());
    if (header.size() != 5 || header[0] != "pfmat" || header[1] != "1") corrupt(origin, "bad header");
    const auto rows = parse_number<std::size_t>(header[2], origin, 1);
    const auto cols = parse_number<std::size_t>(header[3], origin, 1);
    const auto nnz = parse_number<std::size_t>(header[4], origin, 1);

    std::vector<std::vector<Entry>> entries(rows);
    std::size_t prev_row = 0;
    for (std::size_t k = 0; k < nnz; ++k) {
        if (pos >= body.size()) corrupt(origin, "expected " + std::to_string(nnz) + " entries, got " + std::to_string(k));
        const auto parts = split_ws(next_line());
        if (parts.size() != 3) corrupt(origin, "line " + std::to_string(line_no) + ": expected '<row> <col> <value>'");
        const auto i = parse_number<std::size_t>(parts[0], origin, line_no);
        const auto j = parse_number<std::size_t>(parts[1], origin, line_no);
        const auto v = parse_number<double>(parts[2], origin, line_no);
        if (i >= rows || j >= cols) corrupt(origin, "line " + std::to_string(line_no) + ": index out of range");
        if (i < prev_row || (!entries[i].empty() && entries[i].back().col >= j))
            corrupt(origin, "line " + std::to_string(line_no) + ": entries not in row-major order");
        prev_row = i;
        entries[i].push_back({j, v});
    }
    if (pos != body.size()) corrupt(origin, "trailing data after " + std::to_string(nnz) + " entries");
    return SparseMatrix::from_rows(cols, entries);
}

void write_pfmat(const SparseMatrix& m, const std::filesystem::path& path) { write_text_file(path, format_pfmat(m)); }

SparseMatrix read_pfmat(const std::filesystem::path& path) { return parse_pfmat(read_text_file(path), path.string()); }

namespace {

std::string matrix_name(const char* prefix, std::size_t a) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s_a%03zu.pfmat", prefix, a);
    return buf;
}

std::uint64_t parse_hex(const std::string& s, const std::string& origin) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, 16);
    if (ec != std::errc() || ptr != s.data() + s.size()) corrupt(origin, "bad hex field '" + s + "'");
    return v;
}

}  // namespace

void save_ensemble(const TransferEnsemble& e, const std::filesystem::path& dir) {
    e.validate();
    json j;
    j["format"] = "pfstab-ensemble";
    j["version"] = 1;
    j["actions"] = e.action_count();
    j["restricted_size"] = e.restricted_size();
    j["sink"] = e.sink ? json(*e.sink) : json(nullptr);
    j["controls"] = e.controls;
    j["mass"] = e.mass;
    j["costs"] = e.costs;
    j["max_component_row_defect"] = e.max_component_row_defect;
    j["provenance"] = {{"grid_hash", format_hex64(e.provenance.grid_hash)},
                       {"build_hash", format_hex64(e.provenance.build_hash)},
                       {"sample_scheme", e.provenance.sample_scheme},
                       {"samples_per_cell", e.provenance.samples_per_cell},
                       {"out_of_domain", e.provenance.out_of_domain},
                       {"seed", e.provenance.seed},
                       {"model", e.provenance.model}};
    json full = json::array();
    json restricted = json::array();
    for (std::size_t a = 0; a < e.action_count(); ++a) {
        full.push_back(matrix_name("P", a));
        restricted.push_back(matrix_name("P1", a));
        write_pfmat(e.full[a], dir / matrix_name("P", a));
        write_pfmat(e.restricted[a], dir / matrix_name("P1", a));
    }
    j["full"] = full;
    j["restricted"] = restricted;
    write_text_file(dir / kEnsembleManifest, j.dump(1) + "\n");
}

TransferEnsemble load_ensemble(const std::filesystem::path& dir) {
    const auto manifest_path = dir / kEnsembleManifest;
    const std::string origin = manifest_path.string();
    json j;
    try {
        j = json::parse(read_text_file(manifest_path));
    } catch (const json::exception& ex) {
        corrupt(origin, ex.what());
    }
    TransferEnsemble e;
    try {
        if (j.at("format") != "pfstab-ensemble" || j.at("version") != 1) corrupt(origin, "unsupported manifest");
        const auto m = j.at("actions").get<std::size_t>();
        e.controls = j.at("controls").get<std::vector<Point>>();
        e.mass = j.at("mass").get<std::vector<double>>();
        e.costs = j.at("costs").get<std::vector<std::vector<double>>>();
        e.max_component_row_defect = j.at("max_component_row_defect").get<double>();
        if (!j.at("sink").is_null()) e.sink = j.at("sink").get<std::size_t>();
        const auto& p = j.at("provenance");
        e.provenance.grid_hash = parse_hex(p.at("grid_hash").get<std::string>(), origin);
        e.provenance.build_hash = parse_hex(p.at("build_hash").get<std::string>(), origin);
        e.provenance.sample_scheme = p.at("sample_scheme").get<std::string>();
        e.provenance.samples_per_cell = p.at("samples_per_cell").get<std::size_t>();
        e.provenance.out_of_domain = p.at("out_of_domain").get<std::string>();
        e.provenance.seed = p.at("seed").get<std::uint64_t>();
        e.provenance.model = p.at("model").get<std::string>();
        const auto full = j.at("full").get<std::vector<std::string>>();
        const auto restricted = j.at("restricted").get<std::vector<std::string>>();
        if (full.size() != m || restricted.size() != m || e.costs.size() != m)
            corrupt(origin, "action count does not match the listed matrices");
        if (j.at("restricted_size").get<std::size_t>() != e.mass.size())
            corrupt(origin, "restricted size does not match the mass vector");
        for (std::size_t a = 0; a < m; ++a) {
            e.full.push_back(read_pfmat(dir / full[a]));
            e.restricted.push_back(read_pfmat(dir / restricted[a]));
        }
    } catch (const json::exception& ex) {
        corrupt(origin, ex.what());
    }
    e.validate();
    return e;
}

}  // namespace pfstab
