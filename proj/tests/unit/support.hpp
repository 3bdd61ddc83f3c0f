#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>

#include <unistd.h>

#include "cotox/core_model.hpp"
#include "cotox/response_parser.hpp"

namespace testing_support {

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("cotox-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(std::string_view name) const { return path_ / name; }

  std::filesystem::path write(std::string_view name, std::string_view text) const {
    const auto p = path_ / name;
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream(p, std::ios::binary) << text;
    return p;
  }

 private:
  std::filesystem::path path_;
};

// Well-formed six-organ reply. `toxic` lists organs answered Toxic.
inline std::string model_reply(std::initializer_list<cotox::ToxicityType> toxic = {}) {
  cotox::ToxicityPrediction p;
  for (auto t : cotox::kAllToxicityTypes) {
    auto& ov = p[t];
    ov.reasoning = {"pathway note", "go note", "structure note", "mechanism note"};
    bool hit = false;
    for (auto x : toxic) hit = hit || x == t;
    ov.prediction = ov.answer = hit ? cotox::BinaryVerdict::Toxic : cotox::BinaryVerdict::NonToxic;
  }
  return cotox::to_model_json(p).dump(2);
}

}  // namespace testing_support
