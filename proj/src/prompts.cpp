// SPDX-License-Identifier: Apache-2.0
#include "crashfl/prompts.hpp"

#include <fstream>
#include <stdexcept>

#include "crashfl/default_prompts.hpp"

namespace crashfl {

namespace {

std::string trim_copy(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r' ||
                          s.front() == '\n'))
        s.remove_prefix(1);
    while (!s.empty() &&
           (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n'))
        s.remove_suffix(1);
    return std::string(s);
}

}  // namespace

PromptSet PromptSet::parse(std::string_view text) {
    PromptSet out;
    std::string current_name;
    std::string current_body;

    auto flush = [&] {
        if (!current_name.empty()) {
            out.blocks_[current_name] = trim_copy(current_body);
        }
        current_body.clear();
    };

    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        std::string_view line =
            text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        const std::string trimmed = trim_copy(line);
        if (trimmed.size() > 4 && trimmed.rfind("== ", 0) == 0 &&
            trimmed.substr(trimmed.size() - 3) == " ==") {
            flush();
            current_name = trimmed.substr(3, trimmed.size() - 6);
        } else if (!current_name.empty()) {
            current_body.append(line);
            current_body += '\n';
        }
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    flush();

    if (out.blocks_.empty()) {
        throw std::runtime_error("prompt file contains no blocks");
    }
    return out;
}

PromptSet PromptSet::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open prompt file: " + path.string());
    }
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse(text);
}

const PromptSet& PromptSet::builtin() {
    static const PromptSet instance = parse(detail::kDefaultPromptsText);
    return instance;
}

bool PromptSet::has(const std::string& name) const { return blocks_.count(name) > 0; }

const std::string& PromptSet::block(const std::string& name) const {
    auto it = blocks_.find(name);
    if (it == blocks_.end()) {
        throw std::out_of_range("no prompt block named '" + name + "'");
    }
    return it->second;
}

std::string render_template(std::string_view text,
                            const std::map<std::string, std::string>& vars) {
    std::string out;
    out.reserve(text.size());
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t open = text.find('{', pos);
        if (open == std::string_view::npos) {
            out.append(text.substr(pos));
            break;
        }
        const std::size_t close = text.find('}', open + 1);
        if (close == std::string_view::npos) {
            out.append(text.substr(pos));
            break;
        }
        out.append(text.substr(pos, open - pos));
        const std::string key(text.substr(open + 1, close - open - 1));
        auto it = vars.find(key);
        if (it != vars.end()) {
            out += it->second;
        } else {
            out.append(text.substr(open, close - open + 1));
        }
        pos = close + 1;
    }
    return out;
}

}  // namespace crashfl
