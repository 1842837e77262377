#pragma once

#include <system_error>

#include "fmc/error.hpp"

namespace fmc {

namespace detail {
std::filesystem::path staging_path(const std::filesystem::path& out_dir);
void commit_staging(const std::filesystem::path& staging, const std::filesystem::path& out_dir);
}  // namespace detail

template <typename Fn>
void write_atomically(const std::filesystem::path& out_dir, Fn&& write) {
  const std::filesystem::path staging = detail::staging_path(out_dir);
  std::filesystem::create_directories(staging);
  try {
    write(staging);
    detail::commit_staging(staging, out_dir);
  } catch (...) {
    std::error_code ec;
    std::filesystem::remove_all(staging, ec);
    throw;
  }
}

}  // namespace fmc
