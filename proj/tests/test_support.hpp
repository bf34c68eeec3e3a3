#pragma once

#include <gtest/gtest.h>

#include "logo/core.hpp"
#include "random_data.hpp"

#define EXPECT_LOGO_ERROR(stmt, expected_code)                                         \
  do {                                                                                 \
    bool thrown_ = false;                                                              \
    try {                                                                              \
      (void)(stmt);                                                                    \
    } catch (const logo::Error& e_) {                                                  \
      thrown_ = true;                                                                  \
      EXPECT_EQ(e_.code(), expected_code) << e_.what();                                \
    }                                                                                  \
    EXPECT_TRUE(thrown_) << "expected " << logo::to_string(expected_code);             \
  } while (0)
