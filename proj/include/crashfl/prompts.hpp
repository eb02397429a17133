// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace crashfl {

/// Named prompt blocks loaded from a plain-text asset file. Blocks start at
/// lines of the form "== name ==". The compiled-in default mirrors
/// assets/prompts.txt; deployments can swap the file without rebuilding.
class PromptSet {
public:
    static PromptSet parse(std::string_view text);
    static PromptSet load(const std::filesystem::path& path);
    static const PromptSet& builtin();

    bool has(const std::string& name) const;
    const std::string& block(const std::string& name) const;  // throws std::out_of_range

private:
    std::map<std::string, std::string> blocks_;
};

/// Substitute {name} placeholders. Unknown placeholders are left intact.
std::string render_template(std::string_view text,
                            const std::map<std::string, std::string>& vars);

}  // namespace crashfl
