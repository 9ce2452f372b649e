from .attention import ATTENTION_KINDS, CrossAttention, attend_ma, attend_mha, attend_msa
from .config import ModelConfig
from .encoders import ENCODER_KINDS, EncoderOutput, build_encoder
from .seq2seq import AttentionTrace, DecoderState, LSTMDecoder, Seq2Seq, StepOverflow
from .translator import NqtTranslator, TrainingDiverged

__all__ = [
    "ATTENTION_KINDS", "ENCODER_KINDS", "AttentionTrace", "CrossAttention", "DecoderState",
    "EncoderOutput", "LSTMDecoder", "ModelConfig", "NqtTranslator", "Seq2Seq", "StepOverflow",
    "TrainingDiverged", "attend_ma", "attend_mha", "attend_msa", "build_encoder",
]
