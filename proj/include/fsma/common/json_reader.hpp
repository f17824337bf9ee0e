#pragma once

#include "fsma/common/errors.hpp"

#include <json.hpp>

#include <set>
#include <string>

namespace fsma {

/// Strict reader over a JSON object: every key must be consumed before
/// finish(), otherwise the document is rejected as containing unknown keys.
class JsonReader {
public:
    JsonReader(const nlohmann::json& object, std::string path);

    bool has(const std::string& key) const { return object_->contains(key); }

    template <typename T>
    void read(const std::string& key, T& target) {
        if (!has(key)) return;
        used_.insert(key);
        try {
            target = object_->at(key).get<T>();
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(where(key) + ": " + e.what());
        }
    }

    template <typename T>
    T require(const std::string& key) {
        if (!has(key)) throw ValidationError(where(key) + ": required key missing");
        T value{};
        read(key, value);
        return value;
    }

    JsonReader child(const std::string& key);
    const nlohmann::json& raw(const std::string& key);

    /// Throws ValidationError naming every key that was never read.
    void finish() const;

    std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    const nlohmann::json* object_;
    std::string path_;
    std::set<std::string> used_;
};

nlohmann::json read_json_file(const std::string& path);

} // namespace fsma
