#pragma once

#include "annotation.hpp"
#include "attack.hpp"
#include "deflate.hpp"
#include "huffman.hpp"
#include "instrument.hpp"
#include "lz77.hpp"
#include "taint.hpp"
