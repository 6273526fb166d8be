"""Cloud-side user-modeling "brain" for social robots."""

from .errors import BrainError
from .protocol import decode_message, encode_message
from .usermodel import combine_certainty, predominant_emotion

__all__ = ["BrainError", "combine_certainty", "decode_message", "encode_message",
           "predominant_emotion"]
__version__ = "0.1.0"
