#pragma once

#include "kf/error.hpp"

#include <doctest.h>

// CHECK that `expr` throws kf::Error with the given code.
#define CHECK_KF_ERROR(expr, err_code)                                    \
    do {                                                                  \
        bool kf_thrown_ = false;                                          \
        try {                                                             \
            (void)(expr);                                                 \
        } catch (const kf::Error& kf_e_) {                                \
            kf_thrown_ = true;                                            \
            CHECK_MESSAGE(kf_e_.code() == (err_code), kf_e_.what());      \
        }                                                                 \
        CHECK_MESSAGE(kf_thrown_, #expr " did not throw");                \
    } while (0)
