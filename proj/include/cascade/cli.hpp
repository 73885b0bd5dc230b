#ifndef CASCADE_CLI_HPP
#define CASCADE_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace cascade {

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name. Returns the process exit code; diagnostics go to `err`.
int cli_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace cascade

#endif // CASCADE_CLI_HPP
