"""Shared builders for tests: hand-made sentences and random dependency trees."""

from dafa.conllu import DepSentence, Token


def make_sentence(specs):
    """Build a DepSentence from (form, head, deprel) triples in token order."""
    tokens = tuple(
        Token(index=i, form=form, head=head, deprel=deprel)
        for i, (form, head, deprel) in enumerate(specs, start=1)
    )
    return DepSentence(tokens)


def conllu_block(specs):
    """Render (form, head, deprel) triples as a 10-column CoNLL-U block."""
    lines = [
        f"{i}\t{form}\t_\t_\t_\t_\t{head}\t{deprel}\t_\t_"
        for i, (form, head, deprel) in enumerate(specs, start=1)
    ]
    return "\n".join(lines) + "\n"


DEFAULT_LABELS = ("nsubj", "obj", "det", "amod", "advmod", "nmod")


def random_sentence(rng, n, vocab, labels=DEFAULT_LABELS):
    """Random rooted tree: each token attaches to an earlier node in a random order."""
    order = rng.permutation(n) + 1
    heads = {int(order[0]): 0}
    for pos in range(1, n):
        heads[int(order[pos])] = int(order[int(rng.integers(0, pos))])
    specs = []
    for i in range(1, n + 1):
        form = vocab[int(rng.integers(0, len(vocab)))]
        deprel = "root" if heads[i] == 0 else labels[int(rng.integers(0, len(labels)))]
        specs.append((form, heads[i], deprel))
    return make_sentence(specs)


def random_pair(rng, max_n=8, vocab=("alpha", "beta", "gamma", "delta", "epsilon")):
    n = int(rng.integers(1, max_n + 1))
    m = int(rng.integers(1, max_n + 1))
    return random_sentence(rng, n, vocab), random_sentence(rng, m, vocab)
