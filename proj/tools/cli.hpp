#pragma once

#include <string>
#include <vector>

namespace kadmap::cli {

// Exit codes. stderr carries `kadmap: error[<category>]: <message>`.
enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kConfig = 3,
  kIo = 4,
  kPreimageDepth = 5,
  kInput = 6,
};

const char* category_name(ExitCode code);

/// Runs the tool with argv[0] omitted.
int run(const std::vector<std::string>& args);

}  // namespace kadmap::cli
