#pragma once

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "fgd/io.hpp"
#include "fgd/synthdata.hpp"

namespace fgd {

// On-disk sequence layout under <dir>/seq_NNNN/:
//   frame_KKK.ppm   RGB frame K
//   depth_KKK.pfm   depth map for frame K
//   flow_KKK.flo    ground-truth backward flow pairing frames K-1 and K
//   flowin_KKK.flo  input flow (ground truth plus noise)
//   mask_KKK.pfm    flow validity mask

namespace detail {

inline std::string index_name(const std::string& stem, int i,
                              const std::string& ext) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%03d", i);
  return stem + "_" + buf + ext;
}

}  // namespace detail

template <typename T>
void write_sequence(const std::filesystem::path& dir,
                    const SequenceSample<T>& seq) {
  std::filesystem::create_directories(dir);
  for (size_t t = 0; t < seq.frames.size(); ++t) {
    const int i = static_cast<int>(t);
    write_ppm((dir / detail::index_name("frame", i, ".ppm")).string(),
              seq.frames[t]);
    write_pfm((dir / detail::index_name("depth", i, ".pfm")).string(),
              seq.depths[t]);
    if (t == 0) continue;
    write_flo((dir / detail::index_name("flow", i, ".flo")).string(),
              seq.flows_gt[t - 1]);
    write_flo((dir / detail::index_name("flowin", i, ".flo")).string(),
              seq.flows_input[t - 1]);
    write_pfm((dir / detail::index_name("mask", i, ".pfm")).string(),
              seq.masks[t - 1]);
  }
}

template <typename T = float>
SequenceSample<T> read_sequence(const std::filesystem::path& dir) {
  SequenceSample<T> seq;
  for (int t = 0;; ++t) {
    const auto frame = dir / detail::index_name("frame", t, ".ppm");
    if (!std::filesystem::exists(frame)) break;
    seq.frames.push_back(read_ppm<T>(frame.string()));
    seq.depths.push_back(
        read_pfm<T>((dir / detail::index_name("depth", t, ".pfm")).string()));
    if (t == 0) continue;
    seq.flows_gt.push_back(
        read_flo<T>((dir / detail::index_name("flow", t, ".flo")).string()));
    seq.flows_input.push_back(
        read_flo<T>((dir / detail::index_name("flowin", t, ".flo")).string()));
    seq.masks.push_back(
        read_pfm<T>((dir / detail::index_name("mask", t, ".pfm")).string()));
  }
  if (seq.frames.empty())
    throw io_error("read_sequence: no frames in " + dir.string());
  return seq;
}

inline std::vector<std::filesystem::path> list_sequences(
    const std::filesystem::path& root) {
  if (!std::filesystem::is_directory(root))
    throw io_error("list_sequences: not a directory: " + root.string());
  std::vector<std::filesystem::path> dirs;
  for (const auto& e : std::filesystem::directory_iterator(root))
    if (e.is_directory() && e.path().filename().string().rfind("seq_", 0) == 0)
      dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty())
    throw io_error("list_sequences: no seq_* directories in " + root.string());
  return dirs;
}

template <typename T = float>
std::vector<SequenceSample<T>> read_dataset(const std::filesystem::path& root) {
  std::vector<SequenceSample<T>> out;
  for (const auto& dir : list_sequences(root)) out.push_back(read_sequence<T>(dir));
  return out;
}

}  // namespace fgd
