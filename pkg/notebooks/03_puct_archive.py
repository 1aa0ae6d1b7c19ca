"""
The start-state archive
=======================

Every discovered state can be reused as a starting point. States are scored
by their best child so far plus an exploration bonus that decays with visits.
"""

from discover.archive import Archive, puct_select, puct_select_batch

a = Archive()
seed = a.add_seed(None, 0.50)
print("one seed:", a.scores())

# Expand the seed; the two best children are kept.
kids = a.record_expansion(seed, [(None, 0.52), (None, 0.61), (None, 0.47)])
print("children:", kids, "scores:", {k: round(v, 4) for k, v in a.scores().items()})

# Expanding a child backs its visit up to the seed.
grand = a.record_expansion(kids[0], [(None, 0.66), (None, 0.40)])
for node in a.snapshot():
    print(node)

print("\nselect:", puct_select(a))

# A batch never picks two states from the same line unless it has to.
ids, fallback = puct_select_batch(a, 3)
print("batch of 3:", ids, "fallback used:", fallback)
