#pragma once

#include <atomic>
#include <filesystem>
#include <string>

#include <unistd.h>

namespace testutil {

/// Fresh directory under the system temp path, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string &tag) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("petkin_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir &) = delete;
    TempDir &operator=(const TempDir &) = delete;

    const std::filesystem::path &path() const { return path_; }
    std::filesystem::path operator/(const std::string &p) const { return path_ / p; }

private:
    std::filesystem::path path_;
};

inline double rel_err(double a, double b) { return std::abs(a - b) / std::abs(b); }

} // namespace testutil
