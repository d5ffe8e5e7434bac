#include "cli.hpp"

int main(int argc, char** argv) { return israte::cli::run(argc, argv); }
