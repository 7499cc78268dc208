"""Commit message generation toolkit.

Submodules:

- ``corpus``: raw commit ingestion, filters, splits, dataset statistics
- ``preprocess``: reference and rigorous cleaning/tokenizing pipelines
- ``vocab``: token/index vocabularies with reserved specials
- ``numerics``: float64 tensors with a reverse-mode autodiff tape
- ``seq2seq``: bidirectional-GRU encoder, additive attention, GRU decoder
- ``trainer``: SGD loop, plateau decay, early stopping, checkpoints
- ``baseline``: nearest-neighbour message retrieval over diff bags-of-words
- ``metrics``: BLEU, ROUGE-1/2/L/W, METEOR and the evaluation report
- ``cli``: the ``commitgen`` command line front door
"""

__version__ = "0.1.0"
