#pragma once

#include <filesystem>
#include <string>

#include "core/error.hpp"
#include "doctest.h"

/* Fresh per-test directory under the test runner's working directory. */
inline std::string scratch_dir(const std::string& name) {
  auto dir = std::filesystem::current_path() / ("scratch_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

#define CHECK_FAILS_WITH(code_, ...)                                  \
  do {                                                                \
    bool threw_ = false;                                              \
    try {                                                             \
      __VA_ARGS__;                                                    \
    } catch (const voxcond::Error& e_) {                              \
      threw_ = true;                                                  \
      CHECK(voxcond::error_code_name(e_.code()) ==                    \
            doctest::String(                                          \
                voxcond::error_code_name(voxcond::ErrorCode::code_))); \
    }                                                                 \
    CHECK_MESSAGE(threw_, "expected " #code_ " from: " #__VA_ARGS__); \
  } while (0)
