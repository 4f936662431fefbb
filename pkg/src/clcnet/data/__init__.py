from .corpus import Corpus, CorpusSplit, SplitIds, hash_split, load_corpus, synthetic_corpus
from .mixing import (
    MixConfig, Mixture, MixtureSpec, active_mask, make_mixture, measured_snr, sample_spec,
)
from .synth import NOISE_KINDS, synth_noise, synth_speech
from .wav import read_wav, write_wav
