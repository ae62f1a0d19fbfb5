#include <iostream>

#include "cli.hpp"
#include "slogan/error.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  slogan::cli::RunConfig cfg;
  try {
    cfg = slogan::cli::parse_args_and_config(args);
  } catch (const slogan::cli::HelpRequested& h) {
    std::cout << h.text;
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return slogan::cli::run(cfg, std::cout, std::cerr);
}
