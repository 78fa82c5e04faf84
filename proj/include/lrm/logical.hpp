#pragma once

// A logical scoring model binds a query encoder, a document encoder and a
// comparison function; it says nothing about how top-k is computed.

#include <functional>
#include <string>

#include "lrm/analysis.hpp"
#include "lrm/reprs.hpp"

namespace lrm {

/// Analyzed text with its external id (document or query).
struct Text {
  std::string id;
  TokenList tokens;
};

using Encoder = std::function<Representation(const Text&)>;

struct LogicalScoringModel {
  std::string name;
  Encoder query_encoder;
  Encoder doc_encoder;
  Comparison phi = Comparison::inner_product;

  /// s(q, d) = φ(η_q(q), η_d(d)).
  double score(const Text& query, const Text& doc) const {
    return compare(phi, query_encoder(query), doc_encoder(doc));
  }
};

}  // namespace lrm
