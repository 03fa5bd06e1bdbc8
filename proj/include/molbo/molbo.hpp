#ifndef MOLBO_MOLBO_HPP
#define MOLBO_MOLBO_HPP

#include "molbo/acquisition.hpp"
#include "molbo/campaign.hpp"
#include "molbo/config.hpp"
#include "molbo/error.hpp"
#include "molbo/features.hpp"
#include "molbo/fingerprint.hpp"
#include "molbo/hash.hpp"
#include "molbo/library.hpp"
#include "molbo/metrics.hpp"
#include "molbo/parallel.hpp"
#include "molbo/rng.hpp"
#include "molbo/smiles.hpp"
#include "molbo/surrogate/surrogate.hpp"
#include "molbo/trace.hpp"
#include "molbo/version.hpp"

#endif
