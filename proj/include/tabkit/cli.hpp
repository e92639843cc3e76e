#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tabkit {

// Exit codes: 0 proved/holds/clean audit, 1 refuted/countermodel,
// 2 out of resources, 64 usage error.
int cli_main(int argc, const char* const* argv, std::ostream& out,
             std::ostream& err);

int cli_run(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

}  // namespace tabkit
