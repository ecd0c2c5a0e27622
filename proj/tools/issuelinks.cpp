#include "issuelinks/cli.hpp"

int main(int argc, char** argv) { return issuelinks::cli::run(argc, argv); }
