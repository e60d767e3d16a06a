// Copyright 2026 The snerg-cpp Authors
// SPDX-License-Identifier: Apache-2.0

#include <snerg/cli.hpp>

#include <httplib.h>

#include <stdexcept>

namespace snerg::cli {

struct BundleServer::Impl
{
    httplib::Server server;
    bool bound = false;
};

BundleServer::BundleServer(std::filesystem::path bundle_dir, std::optional<std::filesystem::path> viewer_dir)
    : impl_(std::make_unique<Impl>())
{
    if (!std::filesystem::is_directory(bundle_dir)) {
        throw std::runtime_error("bundle directory not found: " + bundle_dir.string());
    }
    if (viewer_dir && !std::filesystem::is_directory(*viewer_dir)) {
        throw std::runtime_error("viewer directory not found: " + viewer_dir->string());
    }
    auto& s = impl_->server;
    // httplib's default also sets SO_REUSEPORT, which would let a second
    // server silently share a port that is already taken.
    s.set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
    });
    s.set_file_extension_and_mimetype_mapping("json", "application/json");
    s.set_file_extension_and_mimetype_mapping("png", "image/png");
    s.set_file_extension_and_mimetype_mapping("csv", "text/csv");
    s.set_file_extension_and_mimetype_mapping("wasm", "application/wasm");
    // Viewer first so /viewer/... is not looked up in the bundle.
    if (viewer_dir) {
        s.set_mount_point("/viewer", viewer_dir->string());
    }
    s.set_mount_point("/", bundle_dir.string());
    s.set_file_request_handler([](const httplib::Request&, httplib::Response& res) {
        res.set_header("Cache-Control", "no-cache");
        res.set_header("Access-Control-Allow-Origin", "*");
    });
}

BundleServer::~BundleServer()
{
    if (impl_ && impl_->server.is_running()) {
        impl_->server.stop();
    }
}

int BundleServer::bind(const std::string& host, int port)
{
    int bound_port = port;
    if (port == 0) {
        bound_port = impl_->server.bind_to_any_port(host);
        if (bound_port < 0) {
            throw std::runtime_error("cannot bind " + host + " on any port");
        }
    } else if (!impl_->server.bind_to_port(host, port)) {
        throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port) + " (address in use?)");
    }
    impl_->bound = true;
    return bound_port;
}

void BundleServer::serve()
{
    if (!impl_->bound) {
        throw std::logic_error("BundleServer::serve before bind");
    }
    impl_->server.listen_after_bind();
}

void BundleServer::stop() { impl_->server.stop(); }

void BundleServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

} // namespace snerg::cli
