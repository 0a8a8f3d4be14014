"""Unsupervised sentence-boundary learning in action.

The segmenter starts with a punctuation-only rule (break at .!? before
whitespace and an uppercase letter or digit) and learns exceptions from
a corpus: abbreviation types, period-straddling collocations, and
frequent sentence starters.
"""

from dsikit import SegmenterState, segment, train_segmenter

TEXT = "Samples were stored at 4 C. See Fig. 3 for details. Dr. Smith disagreed."

print("input:", TEXT)

untrained = SegmenterState.empty()
print("\nwith the empty (untrained) state:")
for span in segment(TEXT, untrained):
    print("  |", span.text)

# A corpus in which "Fig." and "Dr." behave like abbreviations: they are
# always period-terminated and usually followed by capitalized tokens.
corpus = [
    "See Fig. 2 for the setup. The trend is clear.",
    "As shown in Fig. 4 the effect saturates. Results follow.",
    "Dr. Jones prepared the assay. Dr. Li verified it.",
    "The protocol of Dr. Chen was used. See Fig. 7 for a sketch.",
] * 15

state = train_segmenter(corpus)
print("\nlearned abbreviations:", sorted(state.abbreviations))
print("learned sentence starters:", sorted(state.sentence_starters)[:8], "...")

print("\nwith the trained state:")
for span in segment(TEXT, state):
    print("  |", span.text)

print("\nserialized state is canonical JSON; retraining reproduces it "
      "byte for byte:", train_segmenter(corpus).to_json() == state.to_json())
