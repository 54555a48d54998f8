#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dixon/study.hpp"

namespace dixon::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitDivergence = 3;

// Parses argv and runs one subcommand. Errors are reported on stderr and
// mapped to the exit codes above.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);  // args exclude the program name

// A subject found under a command's input directory.
struct SubjectDir {
  std::string id;
  std::filesystem::path dir;
};

// Resolves a directory to subjects: a corpus root (manifest.json), a
// single study directory, or a directory of subject directories. For
// corpus-style subject directories `variant` ("scanner" or "truth") picks
// the sub-directory.
std::vector<SubjectDir> discover_subjects(const std::filesystem::path& dir, const std::string& variant = "scanner");

// Reads a fat/water pair; prefers fat_hat/water_hat, falls back to fat/water.
DixonStudy read_fat_water(const std::filesystem::path& dir);

// Portable graymap (P5, 8 bit). Values are clamped to [0, 1] before scaling.
void write_pgm(const std::filesystem::path& path, int width, int height, const std::vector<double>& values);

}  // namespace dixon::cli
