#include "commands.hpp"

int
main(int argc, char** argv)
{
  return border_rdd::cli::main_entry(argc, argv);
}
