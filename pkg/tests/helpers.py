import numpy as np

from midzone.corpus import EmbeddingMatrix, QueryTriplet


def make_corpus(rng, n=12, dim=6, prefix="item"):
    """Random corpus with no zero rows."""
    data = rng.normal(size=(n, dim))
    data += 0.05 * np.sign(data) + 0.01  # keeps rows bounded away from zero
    ids = [f"{prefix}-{i:03d}" for i in range(n)]
    return EmbeddingMatrix(ids, data)


def make_triplet(rng, corpus, with_attrs=("color",), subset_size=0):
    """Random triplet over an existing corpus."""
    dim = corpus.dim
    ref_pos, tgt_pos = rng.choice(corpus.count, size=2, replace=False)
    attr_embs = {a: rng.normal(size=dim) for a in with_attrs}
    subset = None
    if subset_size >= 2:
        others = [i for i in range(corpus.count) if i != tgt_pos]
        picks = rng.choice(len(others), size=subset_size - 1, replace=False)
        subset = tuple(
            [corpus.ids[tgt_pos]] + [corpus.ids[others[p]] for p in picks]
        )
    return QueryTriplet(
        ref_id=corpus.ids[ref_pos],
        text_emb=rng.normal(size=dim),
        attr_embs=attr_embs,
        target_id=corpus.ids[tgt_pos],
        subset_ids=subset,
    )
