#include <array>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "storygen/data.hpp"
#include "storygen/rng.hpp"

namespace storygen {

namespace {

const std::array<const char*, 12> kNames = {"tom",   "anna",  "ben",  "clara", "david", "emma",
                                            "felix", "grace", "henry", "ivy",   "jack",  "lily"};
const std::array<const char*, 8> kAdjectives = {"red",    "shiny",   "old",    "broken",
                                                "golden", "tiny",    "strange", "wooden"};
const std::array<const char*, 12> kNouns = {"violin",  "kite",   "lantern", "puzzle",
                                            "telescope", "compass", "locket", "robot",
                                            "canoe",   "banjo",  "marble",  "whistle"};
const std::array<const char*, 6> kPlaces = {"market", "attic", "garden", "harbor", "library",
                                            "meadow"};

std::string fill(const std::string& templ, const std::string& name, const std::string& adj,
                 const std::string& noun, const std::string& place) {
  std::string out;
  for (std::size_t i = 0; i < templ.size(); ++i) {
    if (templ[i] != '%') {
      out += templ[i];
      continue;
    }
    ++i;
    switch (templ[i]) {
      case 'N': out += name; break;
      case 'A': out += adj; break;
      case 'O': out += noun; break;
      case 'P': out += place; break;
      default: out += templ[i]; break;
    }
  }
  return out;
}

const std::array<const char*, 3> kSecondSentences = {
    "%N showed it to a friend .",
    "%N carried it home .",
    "%N cleaned it carefully .",
};

const std::array<const char*, 3> kSpecificEndings = {
    "%N kept the %A %O forever .",
    "the %A %O made %N smile .",
    "%N loved the %A %O very much .",
};

const std::array<const char*, 3> kGenericEndings = {
    "it was a wonderful day .",
    "everyone felt happy .",
    "nothing else happened .",
};

}  // namespace

std::vector<StoryExample> synth_corpus(std::uint64_t seed, int n_stories) {
  if (n_stories < 1) throw std::invalid_argument("synth_corpus: n_stories must be >= 1");
  constexpr int kMaxCombos = 12 * 8 * 12 * 6;
  if (n_stories > kMaxCombos) {
    throw std::invalid_argument("synth_corpus: at most " + std::to_string(kMaxCombos) +
                                " distinct stories are available");
  }
  Rng rng(derive_seed(seed, 0x53594e5448ull));  // stream tag keeps this independent of callers
  std::vector<StoryExample> examples;
  // Distinct (name, adjective, noun, place) combos keep context -> ending a
  // function, so a model can in principle reproduce every ending exactly.
  std::set<std::tuple<std::size_t, std::size_t, std::size_t, std::size_t>> used;
  while (static_cast<int>(examples.size()) < n_stories) {
    std::size_t ni = rng.uniform_index(kNames.size());
    std::size_t ai = rng.uniform_index(kAdjectives.size());
    std::size_t oi = rng.uniform_index(kNouns.size());
    std::size_t pi = rng.uniform_index(kPlaces.size());
    if (!used.insert({ni, ai, oi, pi}).second) continue;
    std::string name = kNames[ni], adj = kAdjectives[ai], noun = kNouns[oi], place = kPlaces[pi];

    StoryExample ex;
    ex.story_id = "synth-" + std::to_string(examples.size());
    ex.context_sentences = {
        fill("%N found a %A %O at the %P .", name, adj, noun, place),
        fill(kSecondSentences[rng.uniform_index(kSecondSentences.size())], name, adj, noun, place),
        fill("the friend said the %O looked %A .", name, adj, noun, place),
        fill("%N decided to keep the %O .", name, adj, noun, place),
    };
    bool generic = rng.bernoulli(0.5);
    const char* ending = generic ? kGenericEndings[rng.uniform_index(kGenericEndings.size())]
                                 : kSpecificEndings[rng.uniform_index(kSpecificEndings.size())];
    ex.target_sentence = fill(ending, name, adj, noun, place);
    examples.push_back(std::move(ex));
  }
  return examples;
}

}  // namespace storygen
