#include "dhnplan/serve.hpp"

#include <fstream>

// Before httplib.h: <resolv.h> defines a _res macro that clashes with Eigen.
#include "dhnplan/error.hpp"
#include "dhnplan/metrics.hpp"
#include "dhnplan/pipeline.hpp"

#include <httplib.h>
#include <json.hpp>

namespace dhnplan::serve {

namespace fs = std::filesystem;

std::unique_ptr<httplib::Server> make_server(const fs::path& output_dir) {
  const fs::path bundle = output_dir / pipeline::kDecisionSpaceJson;
  if (!fs::is_regular_file(bundle))
    throw Error("no decision space bundle at " + bundle.string() + "; run `plan run` first");
  std::ifstream in(bundle);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(bundle.string() + ": " + e.what());
  }
  metrics::decision_space_from_json(j);

  auto server = std::make_unique<httplib::Server>();
  if (!server->set_mount_point("/", output_dir.string()))
    throw Error("cannot serve " + output_dir.string());
  const bool has_index = fs::is_regular_file(output_dir / "index.html");
  if (!has_index) {
    server->Get("/", [](const httplib::Request&, httplib::Response& res) {
      res.set_redirect(std::string("/") + pipeline::kDecisionSpaceJson);
    });
  }
  return server;
}

}  // namespace dhnplan::serve
