"""Pure-Python scoring loops; fallback when the compiled kernel is absent.

Accumulation order matches ``_kernel_c`` exactly (entries ascending, then
pairs ascending, metrics innermost) so both backends produce identical
floating-point results.
"""

from __future__ import annotations

# metric slots: soft, augmented, boot-match, recall, precision, f1
METRIC_COUNT = 6


def _scores(sa: int, sb: int, aug_mode: int) -> tuple[float, ...]:
    inter = (sa & sb).bit_count()
    na = sa.bit_count()
    nb = sb.bit_count()
    soft = 1.0 if inter else 0.0
    if aug_mode == 0:
        m = na if na >= nb else nb
        aug = inter / m if m else 0.0
    else:
        aug = 2.0 * inter / (na + nb) if (na + nb) else 0.0
    rec = inter / nb if nb else 0.0
    prec = inter / na if na else 0.0
    f1 = 2.0 * inter / (na + nb) if (na + nb) else 0.0
    return (soft, aug, soft, rec, prec, f1)


def _metrics(masks, entry_a, entry_b, entry_pair, pair_sizes, aug_mode) -> list[float]:
    n_pairs = len(pair_sizes)
    acc = [[0.0] * METRIC_COUNT for _ in range(n_pairs)]
    for e in range(len(entry_a)):
        s = _scores(masks[entry_a[e]], masks[entry_b[e]], aug_mode)
        row = acc[entry_pair[e]]
        for m in range(METRIC_COUNT):
            row[m] += s[m]
    out = [0.0] * METRIC_COUNT
    for p in range(n_pairs):
        size = pair_sizes[p]
        row = acc[p]
        for m in range(METRIC_COUNT):
            out[m] += row[m] / size
    return [v / n_pairs for v in out]


def metrics_from_masks(masks, entry_a, entry_b, entry_pair, pair_sizes, aug_mode):
    """Six agreement means for one concrete assignment of cell label sets."""
    return _metrics(
        [int(v) for v in masks],
        entry_a.tolist(),
        entry_b.tolist(),
        entry_pair.tolist(),
        pair_sizes.tolist(),
        int(aug_mode),
    )


def bootstrap_accumulate(
    pool_masks, cell_base, idx, entry_a, entry_b, entry_pair, pair_sizes, aug_mode, sums, sumsqs
):
    """Score one chunk of resampling rounds; accumulate sums and squares in place.

    ``idx[r, c]`` indexes into cell ``c``'s sampling pool for round ``r``.
    """
    pool = [int(v) for v in pool_masks]
    base = cell_base.tolist()
    rows = idx.tolist()
    ea = entry_a.tolist()
    eb = entry_b.tolist()
    ep = entry_pair.tolist()
    sizes = pair_sizes.tolist()
    # chunk-local accumulators, folded in once at the end: keeps the float
    # association identical to the compiled kernel
    local_sums = [0.0] * METRIC_COUNT
    local_sumsqs = [0.0] * METRIC_COUNT
    for row in rows:
        masks = [pool[base[c] + row[c]] for c in range(len(base))]
        values = _metrics(masks, ea, eb, ep, sizes, int(aug_mode))
        for m in range(METRIC_COUNT):
            local_sums[m] += values[m]
            local_sumsqs[m] += values[m] * values[m]
    for m in range(METRIC_COUNT):
        sums[m] += local_sums[m]
        sumsqs[m] += local_sumsqs[m]
