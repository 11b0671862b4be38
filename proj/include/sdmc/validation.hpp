#pragma once

#include <string>
#include <utility>
#include <vector>

namespace sdmc {

/// Collects invariant violations instead of aborting; empty means valid.
class ValidationReport {
public:
    void add(std::string message) { violations_.push_back(std::move(message)); }
    bool ok() const { return violations_.empty(); }
    const std::vector<std::string>& violations() const { return violations_; }

    std::string to_string() const {
        std::string out;
        for (const auto& v : violations_) {
            out += v;
            out += '\n';
        }
        return out;
    }

private:
    std::vector<std::string> violations_;
};

}  // namespace sdmc
