#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "tagweave/dataset.hpp"
#include "tagweave/rng.hpp"

namespace twtest {

// Scratch directory removed on scope exit.
class TempDir {
 public:
  TempDir() {
    static std::atomic<unsigned> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("tagweave_test_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path file(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

// Random multilabel fixture: `n_artists` artists with a couple of albums
// each, every track tagged with 1..3 of `n_tags` tags.
inline tagweave::AnnotationSet random_annotations(tagweave::Rng& rng, int n_artists,
                                                  int n_tags) {
  std::vector<std::string> tag_names;
  for (int t = 0; t < n_tags; ++t) tag_names.push_back("tag" + std::to_string(t));
  tagweave::TagSystem tags("fixture", tag_names);

  std::vector<tagweave::TrackRef> tracks;
  std::vector<std::uint8_t> occ;
  int track_counter = 0;
  int album_counter = 0;
  for (int a = 0; a < n_artists; ++a) {
    const int albums = 1 + static_cast<int>(rng.uniform_int(3));
    for (int al = 0; al < albums; ++al) {
      const std::string album_id = "al" + std::to_string(album_counter++);
      const int n_tracks = 1 + static_cast<int>(rng.uniform_int(4));
      for (int t = 0; t < n_tracks; ++t) {
        tracks.push_back(tagweave::TrackRef{"t" + std::to_string(track_counter++),
                                            album_id, "ar" + std::to_string(a), 0});
        std::vector<std::uint8_t> row(static_cast<std::size_t>(n_tags), 0);
        const int k = 1 + static_cast<int>(rng.uniform_int(3));
        for (int j = 0; j < k; ++j)
          row[static_cast<std::size_t>(rng.uniform_int(
              static_cast<std::uint64_t>(n_tags)))] = 1;
        occ.insert(occ.end(), row.begin(), row.end());
      }
    }
  }
  return tagweave::AnnotationSet(tags, std::move(tracks), std::move(occ));
}

}  // namespace twtest
