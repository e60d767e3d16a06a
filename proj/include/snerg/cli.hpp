// Copyright 2026 The snerg-cpp Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace snerg::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Entry point for `snerg <subcommand> ...`; args exclude the program name.
/// Returns 0 on success, 1 on usage errors, 2 on runtime errors.
int run(const std::vector<std::string>& args);

/// Read-only static file server over a bundle directory, with an optional
/// second root for viewer assets (served under /viewer/).
class BundleServer
{
public:
    /// Throws std::runtime_error if either directory does not exist.
    explicit BundleServer(std::filesystem::path bundle_dir,
                          std::optional<std::filesystem::path> viewer_dir = std::nullopt);
    ~BundleServer();
    BundleServer(const BundleServer&) = delete;
    BundleServer& operator=(const BundleServer&) = delete;

    /// Binds the socket; port 0 picks a free port. Returns the bound port.
    /// Throws std::runtime_error when the address is unavailable.
    int bind(const std::string& host, int port);
    /// Serves until stop(); bind() must have succeeded.
    void serve();
    void stop();
    /// Blocks until the server accepts connections.
    void wait_until_ready() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace snerg::cli
