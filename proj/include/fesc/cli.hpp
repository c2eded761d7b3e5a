#pragma once

#include "fesc/assemble.hpp"

#include <json.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace fesc {

// exit codes of the command-line front end
enum ExitCode { kExitOk = 0, kExitUsage = 1, kExitFailure = 2 };

// full verification report of one catalog element on its reference fixture;
// `ok` receives the overall verdict
nlohmann::json verify_report(const ElementSpec& spec, std::shared_ptr<const SimplicialComplex> mesh, bool* ok);
// the fixture used when no mesh is given
std::shared_ptr<const SimplicialComplex> default_fixture(const ElementSpec& spec);
// named fixtures: triangle, square, annulus, tet, tet-pair, cube
std::shared_ptr<const SimplicialComplex> named_fixture(const std::string& name);

// args excludes the program name
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fesc
