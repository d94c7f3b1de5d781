"""Character n-gram and LSTM language models, interpolation, and rescoring."""

from .ngram import (
    BOS,
    EOS,
    UNK,
    InterpolatedLM,
    NGramModel,
    interpolate,
    perplexity,
    read_arpa,
    simplex_grid,
    train_ngram,
    write_arpa,
)
from .rescore import Rescored, rescore_nbest
from .rnnlm import RnnLm, RnnLmConfig, init_rnnlm_params, train_rnnlm

__all__ = [
    "BOS", "EOS", "InterpolatedLM", "NGramModel", "Rescored", "RnnLm", "RnnLmConfig", "UNK",
    "init_rnnlm_params", "interpolate", "perplexity", "read_arpa", "rescore_nbest", "simplex_grid",
    "train_ngram", "train_rnnlm", "write_arpa",
]
