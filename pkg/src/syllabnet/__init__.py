"""Neural phonetic syllabification: a BiLSTM-CNN encoder with a linear-chain
CRF (or softmax) output head, written directly in numpy."""

from .config import BASE, BASE_SOFTMAX, SMALL, ModelConfig, preset
from .lexicon import (
    DatasetSplit,
    LexiconFormat,
    PhoneVocabulary,
    SyllabifiedEntry,
    build_vocabulary,
    clean_duplicates,
    decode_boundaries,
    encode_entry,
    parse_lexicon,
    split_dataset,
)
from .synthetic import generate_synthetic_language
from .training import evaluate_word_accuracy, run_experiment, train

__version__ = "0.1.0"
