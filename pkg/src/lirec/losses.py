"""Masked max-margin objectives on sigmoid scores.

Every loss takes a score array and returns ``(loss, d loss / d scores)``.
Score matrices are laid out ``pairs x classes``.
"""

from dataclasses import dataclass

import numpy as np

REDUCTIONS = ("sum", "sum-max")


@dataclass
class LossConfig:
    margin_int: float = 0.2
    margin_rel: float = 0.2
    margin_int_char: float = 0.2
    margin_rel_char: float = 0.2
    lam: float = 1.5
    negatives: str = "sum"
    weak: bool = False
    multinomial: bool = True
    burn_in: int = 20

    def validate(self):
        for name in ("margin_int", "margin_rel", "margin_int_char", "margin_rel_char"):
            m = getattr(self, name)
            if not 0.0 < m < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {m}")
        if not self.lam > 0:
            raise ValueError(f"lam must be positive, got {self.lam}")
        if self.negatives not in REDUCTIONS:
            raise ValueError(f"negatives must be one of {REDUCTIONS}")
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")

    def reduction(self, epoch):
        """Sum over all negatives until the burn-in ends, then the configured mode."""
        if self.negatives == "sum-max" and epoch >= self.burn_in:
            return "sum-max"
        return "sum"


def masked_hinge(S, pos, neg, margin, reduction="sum"):
    """sum over admissible cells c of [margin - S[pos] + S[c]]_+ .

    ``neg`` is a boolean mask of admissible negative cells.  With
    ``sum-max`` each row contributes only its largest hinge term.
    """
    S = np.asarray(S, dtype=np.float64)
    terms = margin - S[pos] + S
    grad = np.zeros_like(S)
    if reduction == "sum":
        active = neg & (terms > 0.0)
        loss = float(terms[active].sum())
        grad[active] = 1.0
        grad[pos] -= active.sum()
        return loss, grad
    if reduction != "sum-max":
        raise ValueError(f"unknown reduction {reduction!r}")
    masked = np.where(neg, terms, -np.inf)
    col = masked.argmax(axis=1)
    rows = np.arange(S.shape[0])
    best = masked[rows, col]
    hit = best > 0.0
    loss = float(best[hit].sum())
    grad[rows[hit], col[hit]] = 1.0
    grad[pos] -= hit.sum()
    return loss, grad


def _column_mask(n_classes, excluded):
    mask = np.ones(n_classes, dtype=bool)
    for a in excluded:
        mask[a] = False
    return mask


def loss_interaction(scores, a_star, overlap=(), margin=0.2):
    """Hinge over interaction labels, skipping overlapping labels and a*."""
    s = np.asarray(scores, dtype=np.float64)[None, :]
    neg = _column_mask(s.shape[1], set(overlap) | {a_star})[None, :]
    loss, g = masked_hinge(s, (0, a_star), neg, margin)
    return loss, g[0]


def loss_relationship(scores, r_star, margin=0.2):
    return loss_interaction(scores, r_star, (), margin)


def loss_joint(rel_loss, int_losses, lam=1.5):
    """Relationship loss plus lambda times the mean per-clip interaction loss."""
    if len(int_losses) < 1:
        raise ValueError("need at least one clip in the bundle")
    return rel_loss + lam / len(int_losses) * float(sum(int_losses))


def loss_pair_full(S, a_star, p_star, overlap=(), margin=0.2, reduction="sum"):
    """Known pair: negatives everywhere except overlapping columns and (p*, a*).

    Cells (p != p*, a*) stay admissible negatives.
    """
    S = np.asarray(S, dtype=np.float64)
    if not 0 <= p_star < S.shape[0]:
        raise ValueError(f"ground-truth pair row {p_star} not among {S.shape[0]} candidates")
    neg = np.repeat(_column_mask(S.shape[1], overlap)[None, :], S.shape[0], axis=0)
    neg[p_star, a_star] = False
    return masked_hinge(S, (p_star, a_star), neg, margin, reduction)


def loss_pair_weak(S, a_star, p_hat, overlap=(), margin=0.2, reduction="sum"):
    """Latent pair: the entire a* column is dropped from the negatives."""
    S = np.asarray(S, dtype=np.float64)
    neg = np.repeat(_column_mask(S.shape[1], set(overlap) | {a_star})[None, :], S.shape[0], axis=0)
    return masked_hinge(S, (p_hat, a_star), neg, margin, reduction)


def loss_rel_pair(S, r_star, p_hat, margin=0.2, weak=True):
    """Relationship-by-pair hinge on a ``pairs x relationships`` matrix.

    Weak mode discards the whole r* column; full mode keeps (p != p*, r*)
    as negatives, mirroring :func:`loss_pair_full`.
    """
    S = np.asarray(S, dtype=np.float64)
    neg = np.ones(S.shape, dtype=bool)
    if weak:
        neg[:, r_star] = False
    else:
        neg[p_hat, r_star] = False
    return masked_hinge(S, (p_hat, r_star), neg, margin)


def loss_rel_pair_weak(S, r_star, p_hat, margin=0.2):
    return loss_rel_pair(S, r_star, p_hat, margin, weak=True)


def loss_irc_weak(rel_loss, int_losses, lam=1.5):
    return loss_joint(rel_loss, int_losses, lam)


def sample_pair(weights, rng, multinomial=True):
    """Index drawn proportionally to non-negative ``weights`` (argmax if not multinomial)."""
    w = np.asarray(weights, dtype=np.float64)
    if not multinomial:
        return int(np.argmax(w))
    total = w.sum()
    if not total > 0:
        raise ValueError("pair weights must have positive mass")
    u = rng.random() * total
    idx = int(np.searchsorted(np.cumsum(w), u, side="right"))
    return min(idx, len(w) - 1)


def sample_pair_weak(S, a_star, rng, multinomial=True):
    """Treat column a* of the pair matrix as a multinomial over pairs."""
    return sample_pair(np.asarray(S)[:, a_star], rng, multinomial)
