// The HTTP listener around handle_request.

#pragma once

#include <memory>

#include <httplib.h>

#include "duct/frontdoor.hpp"

namespace duct {

// Routes are registered but the server is not started. The session must
// outlive the server.
std::unique_ptr<httplib::Server> make_server(const Session& session);

}  // namespace duct
