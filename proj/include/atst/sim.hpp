#pragma once

#include <functional>
#include <string>
#include <vector>

#include "atst/model.hpp"
#include "atst/rng.hpp"

namespace atst {

// One observation event: the state seen at the burst, the sequence committed
// there, the reward aggregated until the next reveal, and what was revealed
// next (kTerminal when the episode ended inside this segment).
struct BurstTuple {
  int observed_state = 0;
  ActionSequence action_seq;
  double aggregated_reward = 0.0;
  int next_observed = kTerminal;
  int rounds_in_segment = 0;
};

struct EpisodeTranscript {
  int initial_state = 0;
  std::vector<BurstTuple> bursts;
  double total_reward = 0.0;
  int rounds = 0;
};

// Agent callback: given the currently observed state and the burst index
// (0 for the episode start), commit to an action sequence.
using SequenceAgent = std::function<ActionSequence(int state, int burst_index)>;

// H ~ Geom(1 - gamma) on {1, 2, ...}.
int sample_geometric_horizon(double gamma, SeededRng& rng);

// Runs one episode of the ATST protocol: execute the committed sequence,
// accumulate reward, then per round check termination first and the
// data-burst second. If both fire in the same round the episode terminates
// and only (terminal, G) is revealed.
EpisodeTranscript run_episode(const LinearAtstMdp& mdp, int initial_state,
                              const SequenceAgent& agent, SeededRng& rng);

// CSV dump: (episode, burst_index, observed_state, actions_executed,
// aggregated_reward, next_observed, rounds_in_segment)
void write_transcripts_csv(const std::vector<EpisodeTranscript>& transcripts,
                           const std::string& path);

}  // namespace atst
