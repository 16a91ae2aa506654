#ifndef DSAL_TESTS_TMPDIR_HPP
#define DSAL_TESTS_TMPDIR_HPP

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <string>

// Scratch directory wiped on scope exit.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        const auto base = std::filesystem::temp_directory_path();
        path_ = base / ("dsal_test_" + std::to_string(::getpid()) + "_" +
                        std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string file(const std::string& name) const { return (path_ / name).string(); }
    std::string dir(const std::string& name) const {
        auto p = path_ / name;
        std::filesystem::create_directories(p);
        return p.string();
    }
    const std::filesystem::path& path() const { return path_; }

    void write_text(const std::string& name, const std::string& text) const {
        std::ofstream f(file(name), std::ios::binary);
        f << text;
    }

private:
    std::filesystem::path path_;
};

#endif
