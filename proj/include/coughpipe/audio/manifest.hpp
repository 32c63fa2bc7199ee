#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "coughpipe/common.hpp"

namespace coughpipe::audio {

struct ManifestEntry {
    std::string audio_path;
    std::string event_id;
    std::string patient_id;
    Label label = Label::HEALTHY;
    std::string dataset_name;
};

/// Dataset manifest: one row per audio event, row order preserved.
struct Manifest {
    std::vector<ManifestEntry> entries;
};

constexpr const char* kManifestHeader = "audio_path,event_id,patient_id,label,dataset_name";

namespace detail {
inline std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}
}  // namespace detail

/// Loads a manifest CSV. Errors carry the 1-based line number.
inline Manifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("manifest not found: " + path);

    Manifest m;
    std::unordered_set<std::string> seen_ids;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line_no == 1) {
            if (trim(line) != kManifestHeader) {
                throw std::runtime_error(path + ":1: bad header, expected '" + std::string(kManifestHeader) + "'");
            }
            continue;
        }
        if (trim(line).empty()) continue;
        auto fields = detail::split_csv_row(line);
        if (fields.size() != 5) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected 5 fields, got " +
                                     std::to_string(fields.size()));
        }
        ManifestEntry e;
        e.audio_path = trim(fields[0]);
        e.event_id = trim(fields[1]);
        e.patient_id = trim(fields[2]);
        try {
            e.label = parse_label(fields[3]);
        } catch (const std::invalid_argument& ex) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + ex.what());
        }
        e.dataset_name = trim(fields[4]);
        if (e.event_id.empty()) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": empty event_id");
        }
        if (!seen_ids.insert(e.event_id).second) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": duplicate event_id '" + e.event_id + "'");
        }
        m.entries.push_back(std::move(e));
    }
    return m;
}

inline void write_manifest(const std::string& path, const Manifest& m) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write manifest: " + path);
    out << kManifestHeader << "\n";
    for (const auto& e : m.entries) {
        out << e.audio_path << ',' << e.event_id << ',' << e.patient_id << ',' << label_name(e.label) << ','
            << e.dataset_name << "\n";
    }
}

}  // namespace coughpipe::audio
