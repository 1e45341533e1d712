// Copyright (c) 2026, The dlens Authors
// SPDX-License-Identifier: Apache-2.0

#include "dlens/cli.hpp"

int main(int argc, char** argv) { return dlens::cli::dispatch(argc, argv); }
