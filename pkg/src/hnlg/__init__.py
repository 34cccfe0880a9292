"""Hierarchical POS-ordered natural language generation lab."""

from .corpus import (
    GeneratingOrder,
    LayerTargetSet,
    SemanticFrame,
    SIX_ORDERS,
    TaggedSentence,
    Vocabulary,
    build_layer_targets,
    delexicalize,
    length_stats,
    load_tagged_corpus,
)
from .metrics import EvalInstance, corpus_bleu, rouge_l, rouge_n
from .model import HierModel, ModelConfig, attention, decode_layer, decoder_step, encode, generate
from .numkit import AdamState, ParamSet, Tensor, adam_step, backward, gru_cell
from .training import TrainingSchedule, layer_loss, sample_inner, sample_inter, train

__all__ = [name for name in dir() if not name.startswith("_")]
