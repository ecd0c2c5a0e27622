#pragma once

#include "issuelinks/analysis.hpp"
#include "issuelinks/baseline.hpp"
#include "issuelinks/config.hpp"
#include "issuelinks/corpus.hpp"
#include "issuelinks/dataset.hpp"
#include "issuelinks/error.hpp"
#include "issuelinks/evaluation.hpp"
#include "issuelinks/forest.hpp"
#include "issuelinks/sparse.hpp"
#include "issuelinks/stats.hpp"
#include "issuelinks/svm.hpp"
#include "issuelinks/text.hpp"
