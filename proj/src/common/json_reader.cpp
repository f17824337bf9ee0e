#include "fsma/common/json_reader.hpp"

#include <fstream>

namespace fsma {

JsonReader::JsonReader(const nlohmann::json& object, std::string path) : object_(&object), path_(std::move(path)) {
    if (!object.is_object()) throw ValidationError((path_.empty() ? std::string("config") : path_) + ": expected an object");
}

JsonReader JsonReader::child(const std::string& key) {
    used_.insert(key);
    return JsonReader(object_->at(key), where(key));
}

const nlohmann::json& JsonReader::raw(const std::string& key) {
    if (!has(key)) throw ValidationError(where(key) + ": required key missing");
    used_.insert(key);
    return object_->at(key);
}

void JsonReader::finish() const {
    std::string unknown;
    for (const auto& [key, _] : object_->items()) {
        if (!used_.count(key)) unknown += (unknown.empty() ? "" : ", ") + where(key);
    }
    if (!unknown.empty()) throw ValidationError("unknown config key(s): " + unknown);
}

nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file '" + path + "'");
    try {
        return nlohmann::json::parse(in, nullptr, true, true);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("config file '" + path + "': " + e.what());
    }
}

} // namespace fsma
