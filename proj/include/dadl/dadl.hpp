#pragma once

#include "dadl/dict_learning.hpp"
#include "dadl/domain_path.hpp"
#include "dadl/domain_synth.hpp"
#include "dadl/errors.hpp"
#include "dadl/matrix_io.hpp"
#include "dadl/numerics.hpp"
#include "dadl/pipeline.hpp"
#include "dadl/sparse_coding.hpp"
