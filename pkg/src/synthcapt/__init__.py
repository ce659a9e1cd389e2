"""Synthetic mispronunciation generation (P2P, T2S, S2S) and pronunciation-error detection in a toy speech domain."""

from .phonemes import INVENTORY, ErrorLabels, Lexicon, PhonemeInventory, PhonemeSeq, align, phoneme_distance
from .injector import PerturbationConfig, TrainingExample, make_p2p_example, perturb
from .speech import SpeakerProfile, SynthConfig, Utterance, forced_align, make_quadruple, s2s_convert, synthesize

__version__ = "0.1.0"

__all__ = ["INVENTORY", "ErrorLabels", "Lexicon", "PhonemeInventory", "PhonemeSeq", "align", "phoneme_distance",
           "PerturbationConfig", "TrainingExample", "make_p2p_example", "perturb", "SpeakerProfile", "SynthConfig",
           "Utterance", "forced_align", "make_quadruple", "s2s_convert", "synthesize", "__version__"]
