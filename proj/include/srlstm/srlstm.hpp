#pragma once

#include "srlstm/adam.hpp"
#include "srlstm/checkpoint.hpp"
#include "srlstm/dataset.hpp"
#include "srlstm/error.hpp"
#include "srlstm/gradcheck.hpp"
#include "srlstm/harness.hpp"
#include "srlstm/idx.hpp"
#include "srlstm/loss.hpp"
#include "srlstm/lstm.hpp"
#include "srlstm/perturb.hpp"
#include "srlstm/report.hpp"
#include "srlstm/rng.hpp"
#include "srlstm/version.hpp"
