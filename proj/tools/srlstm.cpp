#include "srlstm/cli.hpp"

int main(int argc, char** argv) { return srlstm::cli::run(argc, argv); }
