from .distortion import SI_SDR_CAP, rmse, rmse_with_grad, si_sdr, si_sdr_with_grad
from .report import TABLE_BUCKETS, EvalReport, EvalRow, evaluate, score_utterance
from .stoi import stoi

__all__ = [
    "SI_SDR_CAP", "TABLE_BUCKETS", "EvalReport", "EvalRow", "evaluate", "rmse",
    "rmse_with_grad", "score_utterance", "si_sdr", "si_sdr_with_grad", "stoi",
]
