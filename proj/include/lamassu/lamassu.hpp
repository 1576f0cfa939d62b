#pragma once

#include "lamassu/block_store.hpp"
#include "lamassu/crypto.hpp"
#include "lamassu/errors.hpp"
#include "lamassu/file_engine.hpp"
#include "lamassu/key_store.hpp"
#include "lamassu/layout.hpp"
#include "lamassu/metadata.hpp"
#include "lamassu/toolkit.hpp"
