#include <hsiseg/cli/commands.hpp>

int main(int argc, char** argv) { return hsiseg::cli::run(argc, argv); }
