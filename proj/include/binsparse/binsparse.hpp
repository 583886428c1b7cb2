#pragma once

#include "binsparse/error.hpp"
#include "binsparse/dtypes.hpp"
#include "binsparse/typed_array.hpp"
#include "binsparse/levels.hpp"
#include "binsparse/descriptor.hpp"
#include "binsparse/tensor.hpp"
#include "binsparse/npy.hpp"
#include "binsparse/container.hpp"
#include "binsparse/textio.hpp"
