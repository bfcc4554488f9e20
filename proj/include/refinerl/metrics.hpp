#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace rfl {

// Append-only line-delimited JSON log with a fixed key order, so identical
// runs produce byte-identical files.
class JsonlWriter {
  public:
    explicit JsonlWriter(const std::filesystem::path& path) : path_(path) {
        if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
        out_.open(path, std::ios::binary);
        if (!out_) throw std::runtime_error("cannot open log " + path.string());
    }

    void write(const nlohmann::ordered_json& row) {
        out_ << row.dump() << '\n';
        if (!out_) throw std::runtime_error("write failed for " + path_.string());
    }

    void flush() { out_.flush(); }

  private:
    std::filesystem::path path_;
    std::ofstream out_;
};

class Stopwatch {
  public:
    Stopwatch() : start_(clock::now()) {}
    void restart() { start_ = clock::now(); }
    double elapsed_ms() const {
        return std::chrono::duration<double, std::milli>(clock::now() - start_).count();
    }

  private:
    using clock = std::chrono::steady_clock;
    clock::time_point start_;
};

}  // namespace rfl
