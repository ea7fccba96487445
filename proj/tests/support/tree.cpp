#include "tree.hpp"

#include "collagen/media_io.hpp"

namespace collagen::demo {

namespace fs = std::filesystem;

std::map<std::string, std::string> read_tree(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        out.emplace(fs::relative(entry.path(), dir).generic_string(), read_text_file(entry.path()));
    }
    return out;
}

std::string first_tree_difference(const fs::path& a, const fs::path& b) {
    const auto ta = read_tree(a);
    const auto tb = read_tree(b);
    auto ia = ta.begin();
    auto ib = tb.begin();
    while (ia != ta.end() || ib != tb.end()) {
        if (ib == tb.end() || (ia != ta.end() && ia->first < ib->first)) return ia->first;
        if (ia == ta.end() || ib->first < ia->first) return ib->first;
        if (ia->second != ib->second) return ia->first;
        ++ia;
        ++ib;
    }
    return {};
}

}  // namespace collagen::demo
