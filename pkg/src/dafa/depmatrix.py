"""Cross-sentence dependency agreement matrices and the attention calibration embedding.

Three n-by-m matrices score how the dependency trees of a sentence pair
line up: a branch-level agreement matrix over (head, relation, tail)
units, a recursive subtree-agreement matrix, and their tf-idf-weighted
combination. The combined matrix is then embedded (shifted by +1) into
the full packed-sequence layout so it can multiply attention logits
elementwise without erasing positions that carry no dependency evidence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .conllu import DepSentence
from .tfidf import TfIdfModel


@dataclass(frozen=True)
class DepMatrixConfig:
    """Scoring constants: relation-match factor, per-match score, child decay."""

    theta: float = 2.0
    alpha: float = 1.0
    nu: float = 0.5

    def __post_init__(self):
        if self.theta <= 0:
            raise ValueError(f"theta must be > 0, got {self.theta}")
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if not 0 <= self.nu < 1:
            raise ValueError(f"nu must be in [0, 1), got {self.nu}")


@dataclass(frozen=True)
class PairLayout:
    """Where each sentence's positions sit inside the packed input sequence."""

    d_seq: int
    a_span: range
    b_span: range

    def __post_init__(self):
        for name, span in (("a_span", self.a_span), ("b_span", self.b_span)):
            if len(span) and not (0 <= span[0] and span[-1] < self.d_seq):
                raise ValueError(f"{name} {span} outside [0, {self.d_seq})")
        if set(self.a_span) & set(self.b_span):
            raise ValueError("sentence spans overlap")


def word_match(a: str, b: str) -> float:
    """1.0 for case-insensitive form equality, else 0.0."""
    return 1.0 if a.lower() == b.lower() else 0.0


def rel_match(a: str, b: str, theta: float) -> float:
    """theta for equal relation labels, else 1.0."""
    return theta if a == b else 1.0


def base_matrix(a: DepSentence, b: DepSentence, config: DepMatrixConfig = DepMatrixConfig()) -> np.ndarray:
    """Branch agreement: (head match + tail match) scaled by the relation factor.

    Entry (i, j) compares the branch ending at token i of sentence a with
    the branch ending at token j of sentence b, so every entry lies in
    {0, 1, 2, theta, 2*theta}.
    """
    tri_a, tri_b = a.trigrams(), b.trigrams()
    out = np.zeros((a.n, b.n), dtype=np.float64)
    for i, x in enumerate(tri_a):
        for j, y in enumerate(tri_b):
            if x.head_index == 0 and y.head_index == 0:
                # root branches carry no governing word: they match each
                # other only through their tails, never through the sentinel
                head_score = word_match(x.tail_form, y.tail_form)
            else:
                head_score = word_match(x.head_form, y.head_form)
            node_score = head_score + word_match(x.tail_form, y.tail_form)
            out[i, j] = node_score * rel_match(x.rel, y.rel, config.theta)
    return out


def subgraph_matrix(a: DepSentence, b: DepSentence, config: DepMatrixConfig = DepMatrixConfig()) -> np.ndarray:
    """Recursive subtree agreement between the two dependency trees.

    A cell (i, j) is nonzero only when the two tail words match
    (case-insensitive) and their incoming relation labels are equal. A
    matching pair earns the fixed score alpha plus nu times the summed
    scores of all pairs of their children, recursively. Node pairs are
    evaluated deepest-first, so each cell is a lookup over already-scored
    children; the trees are finite and acyclic, so this covers every pair.
    """
    kids_a = [a.children(i) for i in range(1, a.n + 1)]
    kids_b = [b.children(j) for j in range(1, b.n + 1)]
    forms_a = [tok.form.lower() for tok in a.tokens]
    forms_b = [tok.form.lower() for tok in b.tokens]
    order_a = _by_depth_deepest_first(a)
    order_b = _by_depth_deepest_first(b)

    out = np.zeros((a.n, b.n), dtype=np.float64)
    for i in order_a:
        for j in order_b:
            if forms_a[i - 1] != forms_b[j - 1] or a.tokens[i - 1].deprel != b.tokens[j - 1].deprel:
                continue
            total = config.alpha * word_match(a.tokens[i - 1].form, b.tokens[j - 1].form)
            child_sum = 0.0
            for x in kids_a[i - 1]:
                for y in kids_b[j - 1]:
                    child_sum += out[x - 1, y - 1]
            out[i - 1, j - 1] = total + config.nu * child_sum
    return out


def _by_depth_deepest_first(s: DepSentence) -> list[int]:
    depth = [0] * (s.n + 1)
    for tok in s.tokens:
        node, d = tok.index, 0
        while node != 0:
            node = s.tokens[node - 1].head
            d += 1
        depth[tok.index] = d
    return sorted(range(1, s.n + 1), key=lambda i: -depth[i])


def final_matrix(
    a: DepSentence,
    b: DepSentence,
    tfidf: TfIdfModel,
    config: DepMatrixConfig = DepMatrixConfig(),
) -> np.ndarray:
    """Combined agreement, reweighted by the tail tokens' tf-idf scores."""
    combined = np.abs(base_matrix(a, b, config) + subgraph_matrix(a, b, config))
    return combined * np.outer(tfidf.weights(a), tfidf.weights(b))


def embed_calibration(mf: np.ndarray, layout: PairLayout) -> np.ndarray:
    """Place the pair matrix, shifted by +1, into the packed d_seq layout.

    Cross-sentence cells get mf + 1 (both orientations, so the result is
    symmetric); every other cell is the neutral 1.0, which leaves the
    corresponding attention logits untouched.
    """
    mf = np.asarray(mf, dtype=np.float64)
    n, m = mf.shape
    if len(layout.a_span) != n or len(layout.b_span) != m:
        raise ValueError(
            f"layout spans ({len(layout.a_span)}, {len(layout.b_span)}) do not fit matrix {mf.shape}"
        )
    c = np.ones((layout.d_seq, layout.d_seq), dtype=np.float64)
    a_idx, b_idx = list(layout.a_span), list(layout.b_span)
    c[np.ix_(a_idx, b_idx)] = mf + 1.0
    c[np.ix_(b_idx, a_idx)] = mf.T + 1.0
    return c
