#pragma once

// Closed-world reader over a JSON object: every key read is echoed, with its
// default if absent, into a resolved copy; leftover keys are rejected.

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ek/error.hpp"

namespace ek::config {

using json = nlohmann::json;

class Reader {
public:
    Reader(const json& src, json& out, std::string path) : src_(src), out_(out), path_(std::move(path)) {
        if (!src_.is_object()) throw ConfigError(where(), "expected an object");
        if (!out_.is_object()) out_ = json::object();
    }

    bool has(const std::string& key) const { return src_.contains(key); }
    const std::string& path() const { return path_; }
    std::string where(const std::string& key = "") const { return key.empty() ? (path_.empty() ? "/" : path_) : path_ + "/" + key; }

    template <class T>
    T get(const std::string& key, const T& def) {
        used_.insert(key);
        if (!src_.contains(key)) {
            out_[key] = def;
            return def;
        }
        T v = convert<T>(src_.at(key), key);
        out_[key] = v;
        return v;
    }

    template <class T>
    T require(const std::string& key) {
        used_.insert(key);
        if (!src_.contains(key)) throw ConfigError(where(key), "required key is missing");
        T v = convert<T>(src_.at(key), key);
        out_[key] = v;
        return v;
    }

    double get_positive(const std::string& key, double def) {
        double v = get<double>(key, def);
        if (!(v > 0.0)) throw ConfigError(where(key), "must be positive");
        return v;
    }

    std::string get_choice(const std::string& key, const std::string& def, const std::vector<std::string>& allowed) {
        std::string v = get<std::string>(key, def);
        for (const auto& a : allowed)
            if (a == v) return v;
        std::string msg = "'" + v + "' is not one of:";
        for (const auto& a : allowed) msg += " " + a;
        throw ConfigError(where(key), msg);
    }

    // nested object, empty when absent
    Reader child(const std::string& key) {
        used_.insert(key);
        static const json empty = json::object();
        const json& s = src_.contains(key) ? src_.at(key) : empty;
        if (!s.is_object()) throw ConfigError(where(key), "expected an object");
        return Reader(s, out_[key], where(key));
    }

    // array of objects
    std::vector<Reader> children(const std::string& key, bool required = false) {
        used_.insert(key);
        std::vector<Reader> r;
        if (!src_.contains(key)) {
            if (required) throw ConfigError(where(key), "required key is missing");
            out_[key] = json::array();
            return r;
        }
        const json& a = src_.at(key);
        if (!a.is_array()) throw ConfigError(where(key), "expected an array");
        out_[key] = json::array();
        for (std::size_t i = 0; i < a.size(); ++i) out_[key].push_back(json::object());
        for (std::size_t i = 0; i < a.size(); ++i)
            r.emplace_back(a[i], out_[key][i], where(key) + "/" + std::to_string(i));
        return r;
    }

    void finish() const {
        for (auto it = src_.begin(); it != src_.end(); ++it)
            if (!used_.count(it.key())) throw ConfigError(where(it.key()), "unknown key");
    }

private:
    template <class T>
    T convert(const json& v, const std::string& key) const {
        try {
            if constexpr (std::is_same_v<T, double>) {
                if (!v.is_number()) throw ConfigError(where(key), "expected a number");
            } else if constexpr (std::is_same_v<T, int> || std::is_same_v<T, std::uint64_t>) {
                if (!v.is_number_integer()) throw ConfigError(where(key), "expected an integer");
                if constexpr (std::is_same_v<T, std::uint64_t>)
                    if (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)
                        throw ConfigError(where(key), "expected a non-negative integer");
            } else if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) throw ConfigError(where(key), "expected true or false");
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!v.is_string()) throw ConfigError(where(key), "expected a string");
            }
            return v.get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(where(key), e.what());
        }
    }

    const json& src_;
    json& out_;
    std::string path_;
    std::set<std::string> used_;
};

// Kind-specific parameter block: validates `src`, returns it with defaults filled in.
json resolve_params(const std::string& kind, const json& src);

}  // namespace ek::config
