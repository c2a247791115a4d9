#pragma once

#include "analytic.hpp"
#include "empirical.hpp"
#include "errors.hpp"
#include "inversion.hpp"
#include "multfunc.hpp"
#include "parallel.hpp"
#include "primes.hpp"
#include "rational.hpp"
#include "sieve.hpp"
