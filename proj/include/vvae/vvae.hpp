#ifndef VVAE_VVAE_HPP
#define VVAE_VVAE_HPP

// Umbrella header. http_transport.hpp is not included: it needs OpenSSL's TLS
// library and is only required for the remote backend.

#include "vvae/bench_metrics.hpp"
#include "vvae/bound_verifier.hpp"
#include "vvae/corpus_ingest.hpp"
#include "vvae/dataset_builder.hpp"
#include "vvae/error.hpp"
#include "vvae/extraction_encoder.hpp"
#include "vvae/extraction_record.hpp"
#include "vvae/llm_client.hpp"
#include "vvae/persona_space.hpp"
#include "vvae/pipeline.hpp"
#include "vvae/prior_sampler.hpp"

#endif // VVAE_VVAE_HPP
