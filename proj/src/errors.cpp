// SPDX-License-Identifier: Apache-2.0
#include "volnet/errors.hpp"
