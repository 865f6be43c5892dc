#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <string>
#include <vector>

#include "flavoraxis/corpus.hpp"
#include "flavoraxis/random.hpp"

namespace testutil {

namespace fs = std::filesystem;

inline fs::path fixture(const std::string& rel) { return fs::path(FLAVORAXIS_FIXTURE_DIR) / rel; }

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "fa") {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            (tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  std::string operator/(const std::string& rel) const { return (path_ / rel).string(); }

 private:
  fs::path path_;
};

// n x dim Gaussian rows with ids first_id.. and names "e<id>".
inline flavoraxis::EmbeddingMatrix random_matrix(std::size_t n, std::size_t dim, std::uint64_t seed,
                                                 std::int64_t first_id = 1) {
  flavoraxis::Stream rng(flavoraxis::Seed{seed}, 0);
  std::vector<flavoraxis::Entity> ents;
  std::vector<double> vals;
  for (std::size_t i = 0; i < n; ++i) {
    const auto id = first_id + static_cast<std::int64_t>(i);
    ents.push_back({id, "e" + std::to_string(id)});
    for (std::size_t d = 0; d < dim; ++d) vals.push_back(rng.normal());
  }
  return flavoraxis::EmbeddingMatrix(std::move(ents), std::move(vals), dim);
}

inline flavoraxis::EmbeddingMatrix matrix_from_rows(const std::vector<std::vector<double>>& rows,
                                                    std::int64_t first_id = 1) {
  std::vector<flavoraxis::Entity> ents;
  std::vector<double> vals;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto id = first_id + static_cast<std::int64_t>(i);
    ents.push_back({id, "e" + std::to_string(id)});
    vals.insert(vals.end(), rows[i].begin(), rows[i].end());
  }
  return flavoraxis::EmbeddingMatrix(std::move(ents), std::move(vals), rows.empty() ? 0 : rows[0].size());
}

}  // namespace testutil
