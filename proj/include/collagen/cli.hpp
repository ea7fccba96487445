#pragma once

#include <atomic>
#include <ostream>
#include <string>
#include <vector>

namespace collagen {

/// Runs one command line (without the program name). Returns the exit
/// status: 0 on success, 1 on runtime failure (one JSON line on `err`),
/// 2 on usage errors.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const std::atomic<bool>* stop = nullptr);

}  // namespace collagen
