#pragma once

#include <filesystem>
#include <memory>

namespace httplib {
class Server;
}

namespace dhnplan::serve {

// Read-only static server over an output directory. GET /decision_space.json
// returns the exported bundle as stored; "/" serves index.html when the
// directory has one and redirects to the bundle otherwise.
// Throws Error when the bundle is missing or has an unsupported schema.
std::unique_ptr<httplib::Server> make_server(const std::filesystem::path& output_dir);

}  // namespace dhnplan::serve
