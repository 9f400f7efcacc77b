#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace pgsum {

struct BeamOptions {
  std::size_t beam_width = 4;
  std::size_t max_len = 30;
  std::size_t stop_token = 0;
};

template <typename State>
struct Hypothesis {
  std::vector<std::size_t> tokens;  // includes the stop token when finished by it
  double score = 0.0;               // accumulated log-probability
  State state;
};

/// Breadth-limited search over token sequences.
///
/// `expand(state)` returns {log_probs, pending}: log-probabilities over the
/// token alphabet for the next position plus whatever the caller needs to
/// build successor states. `advance(state, pending, token)` returns the
/// successor. A hypothesis finishes when it emits `stop_token` or reaches
/// `max_len` tokens. Every step keeps the `beam_width` best extensions over
/// all live hypotheses; ties go to the earlier hypothesis, then the lower
/// token id. Returns the finished hypothesis with the highest score; no
/// length normalization.
template <typename State, typename Expand, typename Advance>
Hypothesis<State> beam_search(State initial, const BeamOptions& options, Expand expand, Advance advance) {
  if (options.beam_width == 0) throw std::invalid_argument("beam_search: beam width must be positive");
  if (options.max_len == 0) throw std::invalid_argument("beam_search: max_len must be positive");

  std::vector<Hypothesis<State>> live;
  live.push_back({{}, 0.0, std::move(initial)});
  std::vector<Hypothesis<State>> finished;

  struct Candidate {
    std::size_t hyp;
    std::size_t token;
    double score;
  };

  for (std::size_t step = 0; step < options.max_len && !live.empty(); ++step) {
    using Pending = decltype(expand(live.front().state).second);
    std::vector<Pending> pending;
    std::vector<Candidate> candidates;
    pending.reserve(live.size());
    for (std::size_t h = 0; h < live.size(); ++h) {
      auto [log_probs, p] = expand(live[h].state);
      pending.push_back(std::move(p));
      for (std::size_t t = 0; t < log_probs.size(); ++t) {
        candidates.push_back({h, t, live[h].score + log_probs[t]});
      }
    }
    const std::size_t keep = std::min(options.beam_width, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep), candidates.end(),
                      [](const Candidate& a, const Candidate& b) {
                        if (a.score != b.score) return a.score > b.score;
                        if (a.hyp != b.hyp) return a.hyp < b.hyp;
                        return a.token < b.token;
                      });

    std::vector<Hypothesis<State>> next;
    for (std::size_t i = 0; i < keep; ++i) {
      const Candidate& c = candidates[i];
      Hypothesis<State> hyp{live[c.hyp].tokens, c.score, advance(live[c.hyp].state, pending[c.hyp], c.token)};
      hyp.tokens.push_back(c.token);
      if (c.token == options.stop_token || hyp.tokens.size() >= options.max_len) {
        finished.push_back(std::move(hyp));
      } else {
        next.push_back(std::move(hyp));
      }
    }
    live = std::move(next);
  }

  // Stable: among equal scores the first finished wins.
  auto best = std::max_element(finished.begin(), finished.end(), [](const auto& a, const auto& b) { return a.score < b.score; });
  return std::move(*best);
}

}  // namespace pgsum
