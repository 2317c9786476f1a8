"""Mid-zone negative selection: keep candidates whose similarity gap to
the target is neither tiny (likely false negatives) nor huge (easy,
uninformative), then draw one negative per step uniformly from the band.
"""

import numpy as np

from midzone import (
    AttributeWeights,
    EmbeddingMatrix,
    MidZoneConfig,
    QueryTriplet,
    forward,
    init_head,
    mid_zone,
    sample_negative,
    score_all,
)

rng = np.random.default_rng(12)
dim, n = 16, 200

corpus = EmbeddingMatrix([f"item-{i:03d}" for i in range(n)], rng.normal(size=(n, dim)))
head = init_head(dim, seed=4)
triplet = QueryTriplet(
    ref_id="item-000", text_emb=rng.normal(size=dim), attr_embs={}, target_id="item-042",
)

q = forward(head, AttributeWeights(0.0, 0.0), triplet, corpus)
table = score_all(q.q_star, corpus, triplet.target_id)
print(f"target similarity {table.s_tar:.4f}; gaps span "
      f"[{np.nanmin(table.delta):.4f}, {np.nanmax(table.delta):.4f}]")

# Quantile mode places the band on normalized ranks of the gap, so the
# member count tracks the band width regardless of the gap scale.
for alpha, beta in [(0.0, 1.0), (0.2, 0.8), (0.4, 0.6)]:
    members = mid_zone(table, MidZoneConfig("quantile", alpha, beta)).member_ids
    print(f"quantile band ({alpha}, {beta}): {len(members)} members")

# Absolute mode thresholds the raw gap instead.
for alpha, beta in [(0.0, 0.5), (0.1, 0.3)]:
    members = mid_zone(table, MidZoneConfig("absolute", alpha, beta)).member_ids
    print(f"absolute band ({alpha}, {beta}): {len(members)} members")

# Narrower bands are always subsets of wider ones.
wide = set(mid_zone(table, MidZoneConfig("quantile", 0.1, 0.9)).member_ids)
narrow = set(mid_zone(table, MidZoneConfig("quantile", 0.3, 0.7)).member_ids)
print("\nnarrow subset of wide:", narrow <= wide)

# Sampling is uniform over the members; an empty band falls back to the
# candidate nearest the band midpoint so training never stalls.
nset = mid_zone(table, MidZoneConfig("quantile", 0.2, 0.8))
draw_rng = np.random.default_rng(0)
draws = [sample_negative(nset, table, MidZoneConfig("quantile", 0.2, 0.8), draw_rng)
         for _ in range(5)]
print("five draws:", draws)

empty = mid_zone(table, MidZoneConfig("absolute", 900.0, 901.0))
fallback = sample_negative(empty, table, MidZoneConfig("absolute", 900.0, 901.0), draw_rng)
print("empty-band fallback:", fallback)
