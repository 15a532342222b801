#pragma once

#include "swefixer/archive.hpp"
#include "swefixer/backend.hpp"
#include "swefixer/bm25.hpp"
#include "swefixer/chat_backend.hpp"
#include "swefixer/commands.hpp"
#include "swefixer/config.hpp"
#include "swefixer/dataset.hpp"
#include "swefixer/diff.hpp"
#include "swefixer/edit_engine.hpp"
#include "swefixer/error.hpp"
#include "swefixer/github_ingest.hpp"
#include "swefixer/glob.hpp"
#include "swefixer/inference.hpp"
#include "swefixer/python/parser.hpp"
#include "swefixer/python/tokenizer.hpp"
#include "swefixer/repo.hpp"
#include "swefixer/runner.hpp"
#include "swefixer/skeleton.hpp"
#include "swefixer/task_codec.hpp"
#include "swefixer/text.hpp"
