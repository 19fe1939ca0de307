#include "critscore/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "critscore/errors.hpp"

namespace critscore {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

std::string g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

int GroupedDataset::n_scales() const {
    int d1 = 0;
    for (int j : scale_map) d1 = std::max(d1, j + 1);
    return d1;
}

void GroupedDataset::validate() const {
    if (groups.empty()) throw Error("dataset has no groups");
    const int d2 = static_cast<int>(groups[0].X.cols());
    const int q = static_cast<int>(groups[0].Z.cols());
    if (static_cast<int>(scale_map.size()) != q)
        throw Error("scale_map must assign every random-effect column");
    for (const auto& g : groups) {
        const auto r = g.y.size();
        if (r < 1) throw Error("every group needs at least one row");
        if (g.X.rows() != r || g.Z.rows() != r || g.X.cols() != d2 || g.Z.cols() != q)
            throw Error("inconsistent group dimensions");
        if (!g.y.allFinite() || !g.X.allFinite() || !g.Z.allFinite())
            throw Error("non-finite entries in dataset");
    }
    const int d1 = n_scales();
    std::vector<char> seen(d1, 0);
    for (int j : scale_map) {
        if (j < 0) throw Error("scale_map entries must be nonnegative");
        seen[j] = 1;
    }
    for (int j = 0; j < d1; ++j)
        if (!seen[j]) throw Error("scale parameter " + std::to_string(j + 1) + " has no column");
}

ModelFormula ModelFormula::parse(const std::string& text) {
    const auto tilde = text.find('~');
    if (tilde == std::string::npos) throw Error("formula: expected 'response ~ terms'");
    ModelFormula f;
    f.response = trim(text.substr(0, tilde));
    if (f.response.empty()) throw Error("formula: empty response");

    const std::string rest = text.substr(tilde + 1);
    const auto bar = rest.find('|');
    const std::string fixed_part = bar == std::string::npos ? rest : rest.substr(0, bar);
    const std::string random_part = bar == std::string::npos ? "" : rest.substr(bar + 1);

    for (const auto& piece : split(fixed_part, '+')) {
        const std::string term = trim(piece);
        if (!term.empty()) f.fixed_terms.push_back(term);
    }
    for (const auto& piece : split(random_part, '+')) {
        std::string term = trim(piece);
        if (term.empty()) continue;
        if (term.rfind("re(", 0) != 0) throw Error("formula: random terms must look like re(term)");
        const auto close = term.find(')');
        if (close == std::string::npos) throw Error("formula: unbalanced re(...)");
        const std::string inner = trim(term.substr(3, close - 3));
        if (inner.empty()) throw Error("formula: empty re() term");
        std::string label = inner;
        const std::string tail = trim(term.substr(close + 1));
        if (!tail.empty()) {
            if (tail[0] != ':') throw Error("formula: expected ':scale' after re(...)");
            label = trim(tail.substr(1));
            if (label.empty()) throw Error("formula: empty scale label");
        }
        f.random_terms.emplace_back(inner, label);
    }
    if (bar != std::string::npos && f.random_terms.empty())
        throw Error("formula: no random-effect terms after '|'");
    return f;
}

int LongTable::column_index(const std::string& name) const {
    const auto it = std::find(columns.begin(), columns.end(), name);
    return it == columns.end() ? -1 : static_cast<int>(it - columns.begin());
}

LongTable parse_long_table(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line)) throw CsvError("empty file");
    LongTable table;
    const std::vector<std::string> header_cells = split(trim(line), ',');
    int group_col = -1;
    for (std::size_t c = 0; c < header_cells.size(); ++c) {
        const std::string name = trim(header_cells[c]);
        if (name == "group") {
            group_col = static_cast<int>(c);
        } else {
            table.columns.push_back(name);
        }
    }
    if (group_col < 0) throw MissingColumn("group");

    long row_number = 0;
    while (std::getline(is, line)) {
        const std::string stripped = trim(line);
        if (stripped.empty()) continue;
        ++row_number;
        const std::vector<std::string> cells = split(stripped, ',');
        if (cells.size() != header_cells.size())
            throw CsvError("row " + std::to_string(row_number) + " has " +
                           std::to_string(cells.size()) + " cells, header has " +
                           std::to_string(header_cells.size()));
        std::vector<double> values;
        values.reserve(table.columns.size());
        std::size_t named = 0;
        std::string group_id;
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const std::string cell = trim(cells[c]);
            if (static_cast<int>(c) == group_col) {
                group_id = cell;
                continue;
            }
            const char* begin = cell.c_str();
            char* end = nullptr;
            const double v = std::strtod(begin, &end);
            if (cell.empty() || end != begin + cell.size())
                throw NonNumericCell(row_number, table.columns[named], cell);
            values.push_back(v);
            ++named;
        }
        if (group_id.empty()) throw EmptyGroup("(blank id at row " + std::to_string(row_number) + ")");
        table.group_of_row.push_back(group_id);
        table.rows.push_back(std::move(values));
    }
    return table;
}

LongTable read_long_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CsvError("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_long_table(buf.str());
}

std::string write_long_table(const LongTable& table) {
    std::ostringstream os;
    os << "group";
    for (const auto& c : table.columns) os << ',' << c;
    os << '\n';
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        os << table.group_of_row[i];
        for (double v : table.rows[i]) os << ',' << g17(v);
        os << '\n';
    }
    return os.str();
}

GroupedDataset build_dataset(const LongTable& table, const ModelFormula& formula) {
    if (table.n_rows() == 0) throw CsvError("no data rows");

    auto column_of_term = [&](const std::string& term) -> int {
        if (term == "1") return -1;  // intercept, no column needed
        const int idx = table.column_index(term);
        if (idx < 0) throw MissingColumn(term);
        return idx;
    };

    const int y_col = table.column_index(formula.response);
    if (y_col < 0) throw MissingColumn(formula.response);
    std::vector<int> fixed_cols, random_cols;
    for (const auto& t : formula.fixed_terms) fixed_cols.push_back(column_of_term(t));
    for (const auto& [t, label] : formula.random_terms) random_cols.push_back(column_of_term(t));
    if (formula.random_terms.empty()) throw Error("formula: at least one re() term is required");

    GroupedDataset data;
    // Scale labels in first-appearance order.
    for (const auto& [term, label] : formula.random_terms) {
        const auto it = std::find(data.scale_names.begin(), data.scale_names.end(), label);
        if (it == data.scale_names.end()) {
            data.scale_map.push_back(static_cast<int>(data.scale_names.size()));
            data.scale_names.push_back(label);
        } else {
            data.scale_map.push_back(static_cast<int>(it - data.scale_names.begin()));
        }
    }
    data.response_name = formula.response;
    data.fixed_names = formula.fixed_terms;
    for (const auto& [term, label] : formula.random_terms) data.random_names.push_back(term);

    // Group rows in first-appearance order.
    std::map<std::string, int> group_index;
    std::vector<std::vector<std::size_t>> group_rows;
    for (std::size_t i = 0; i < table.n_rows(); ++i) {
        const std::string& id = table.group_of_row[i];
        const auto it = group_index.find(id);
        if (it == group_index.end()) {
            group_index[id] = static_cast<int>(group_rows.size());
            data.group_ids.push_back(id);
            group_rows.push_back({i});
        } else {
            group_rows[it->second].push_back(i);
        }
    }

    for (std::size_t gi = 0; gi < group_rows.size(); ++gi) {
        const auto& rows = group_rows[gi];
        if (rows.empty()) throw EmptyGroup(data.group_ids[gi]);
        Group g;
        const int r = static_cast<int>(rows.size());
        g.y.resize(r);
        g.X.resize(r, static_cast<int>(fixed_cols.size()));
        g.Z.resize(r, static_cast<int>(random_cols.size()));
        for (int t = 0; t < r; ++t) {
            const auto& row = table.rows[rows[t]];
            g.y[t] = row[y_col];
            for (std::size_t c = 0; c < fixed_cols.size(); ++c)
                g.X(t, static_cast<int>(c)) = fixed_cols[c] < 0 ? 1.0 : row[fixed_cols[c]];
            for (std::size_t c = 0; c < random_cols.size(); ++c)
                g.Z(t, static_cast<int>(c)) = random_cols[c] < 0 ? 1.0 : row[random_cols[c]];
        }
        data.groups.push_back(std::move(g));
    }
    data.validate();
    return data;
}

GroupedDataset parse_long_csv(const std::string& path, const std::string& formula) {
    return build_dataset(read_long_csv(path), ModelFormula::parse(formula));
}

LongTable dataset_to_table(const GroupedDataset& data) {
    if (data.fixed_names.size() != static_cast<std::size_t>(data.n_fixed()) ||
        data.random_names.size() != static_cast<std::size_t>(data.n_random()))
        throw Error("dataset_to_table: dataset carries no column provenance");

    LongTable table;
    table.columns.push_back(data.response_name);
    // Unique non-intercept terms, keeping first-appearance order.
    std::vector<std::pair<std::string, std::pair<char, int>>> sources;  // name -> (X/Z, col)
    auto add_unique = [&](const std::string& name, char block, int col) {
        if (name == "1") return;
        for (const auto& c : table.columns)
            if (c == name) return;
        table.columns.push_back(name);
        sources.emplace_back(name, std::make_pair(block, col));
    };
    for (std::size_t c = 0; c < data.fixed_names.size(); ++c)
        add_unique(data.fixed_names[c], 'X', static_cast<int>(c));
    for (std::size_t c = 0; c < data.random_names.size(); ++c)
        add_unique(data.random_names[c], 'Z', static_cast<int>(c));

    for (int gi = 0; gi < data.n_groups(); ++gi) {
        const Group& g = data.groups[gi];
        const std::string id =
            gi < static_cast<int>(data.group_ids.size()) ? data.group_ids[gi]
                                                         : "g" + std::to_string(gi + 1);
        for (int t = 0; t < g.y.size(); ++t) {
            std::vector<double> row;
            row.push_back(g.y[t]);
            for (const auto& [name, src] : sources)
                row.push_back(src.first == 'X' ? g.X(t, src.second) : g.Z(t, src.second));
            table.group_of_row.push_back(id);
            table.rows.push_back(std::move(row));
        }
    }
    return table;
}

}  // namespace critscore
