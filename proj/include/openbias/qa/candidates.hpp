#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "openbias/core/error.hpp"
#include "openbias/qa/instance.hpp"
#include "openbias/qa/tokenizer.hpp"

namespace openbias::qa {

/// [BOS] context [SEP] question [SEP] option [EOS] for one answer option.
struct CandidateSequence {
  std::vector<TokenId> tokens;
  std::size_t option_index = 0;

  bool operator==(const CandidateSequence&) const = default;
};

/// One sequence per option, in option order. Context is truncated from the front
/// by the same amount for every option so that all candidates see the same
/// context; question and option tokens are never truncated.
inline std::vector<CandidateSequence> format_candidates(const QAInstance& q, const Tokenizer& tok,
                                                        std::size_t max_sequence_length) {
  auto context = tok.encode(q.context);
  const auto question = tok.encode(q.question);
  std::vector<std::vector<TokenId>> options;
  std::size_t longest_option = 0;
  for (const auto& opt : q.options) {
    options.push_back(tok.encode(opt));
    longest_option = std::max(longest_option, options.back().size());
  }

  constexpr std::size_t kReserved = 4;  // BOS, SEP, SEP, EOS
  const std::size_t fixed = kReserved + question.size() + longest_option;
  require(fixed <= max_sequence_length, ErrorKind::SequenceOverflow,
          "instance '" + q.id + "': question+option need " + std::to_string(fixed) + " tokens, limit is " +
              std::to_string(max_sequence_length));
  const std::size_t context_budget = max_sequence_length - fixed;
  if (context.size() > context_budget)
    context.erase(context.begin(), context.begin() + static_cast<std::ptrdiff_t>(context.size() - context_budget));

  std::vector<CandidateSequence> out;
  out.reserve(options.size());
  for (std::size_t i = 0; i < options.size(); ++i) {
    CandidateSequence seq;
    seq.option_index = i;
    auto& t = seq.tokens;
    t.reserve(kReserved + context.size() + question.size() + options[i].size());
    t.push_back(Tokenizer::kBos);
    t.insert(t.end(), context.begin(), context.end());
    t.push_back(Tokenizer::kSep);
    t.insert(t.end(), question.begin(), question.end());
    t.push_back(Tokenizer::kSep);
    t.insert(t.end(), options[i].begin(), options[i].end());
    t.push_back(Tokenizer::kEos);
    out.push_back(std::move(seq));
  }
  return out;
}

}  // namespace openbias::qa
