#include "atst/sim.hpp"

#include <fstream>

namespace atst {

int sample_geometric_horizon(double gamma, SeededRng& rng) {
  return rng.geometric_horizon(gamma);
}

EpisodeTranscript run_episode(const LinearAtstMdp& mdp, int initial_state,
                              const SequenceAgent& agent, SeededRng& rng) {
  EpisodeTranscript out;
  out.initial_state = initial_state;

  int s = initial_state;       // hidden environment state
  int anchor = initial_state;  // last state revealed to the agent
  int burst_index = 0;
  ActionSequence seq = agent(anchor, burst_index);
  int pos = 0;
  double segment_reward = 0.0;
  int segment_rounds = 0;

  while (true) {
    const int a = seq.at(pos++);
    segment_reward += mdp.reward(s, a);
    ++segment_rounds;
    ++out.rounds;
    const int s_next = rng.discrete(mdp.transition_row(s, a));

    // Fig. 1 ordering: termination check before the burst check.
    if (rng.bernoulli(1.0 - mdp.gamma())) {
      out.bursts.push_back(
          {anchor, seq, segment_reward, kTerminal, segment_rounds});
      out.total_reward += segment_reward;
      return out;
    }
    if (rng.bernoulli(mdp.beta(a))) {
      out.bursts.push_back(
          {anchor, seq, segment_reward, s_next, segment_rounds});
      out.total_reward += segment_reward;
      anchor = s_next;
      ++burst_index;
      seq = agent(anchor, burst_index);
      pos = 0;
      segment_reward = 0.0;
      segment_rounds = 0;
    }
    s = s_next;
  }
}

void write_transcripts_csv(const std::vector<EpisodeTranscript>& transcripts,
                           const std::string& path) {
  std::ofstream out(path);
  out << "episode,burst_index,observed_state,actions_executed,"
         "aggregated_reward,next_observed,rounds_in_segment\n";
  for (std::size_t k = 0; k < transcripts.size(); ++k) {
    const auto& tr = transcripts[k];
    for (std::size_t u = 0; u < tr.bursts.size(); ++u) {
      const auto& b = tr.bursts[u];
      out << k << ',' << u << ',' << b.observed_state << ',';
      for (int i = 0; i < b.rounds_in_segment; ++i) {
        if (i) out << ' ';
        out << b.action_seq.at(i);
      }
      out << ',' << b.aggregated_reward << ',';
      if (b.next_observed == kTerminal)
        out << "end";
      else
        out << b.next_observed;
      out << ',' << b.rounds_in_segment << '\n';
    }
  }
}

}  // namespace atst
