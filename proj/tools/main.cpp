#include "cli.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <iostream>
#include <string>
#include <vector>

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("incentive"));
  std::vector<std::string> args(argv, argv + argc);
  return incentive::cli::run(args, std::cout, std::cerr);
}
