"""Closed vocabularies used on the wire and in the user model."""

# Fixed order doubles as the tie-break order for predominant emotion.
EMOTIONS = ("sadness", "anger", "disgust", "joy", "fear", "surprise", "contempt")

NEUTRAL = "neutral"
EXPRESSIONS = EMOTIONS + (NEUTRAL,)

GENDERS = ("male", "female")
AGE_RANGES = ("0-17", "18-24", "25-34", "35-44", "45-54", "55+")

REGISTERS = ("formal", "informal")
TONES = ("playful", "serious")
MODALITIES = ("text", "audio")
QUESTION_KINDS = ("free_text", "consent")
SOURCES = ("explicit", "implicit")
SPEAKERS = ("robot", "user")

PROTOCOL_VERSION = "v1"
