import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robot_brain.errors import ParseError, ValidationError
from robot_brain.perception import FixtureEmotionDetector
from robot_brain.protocol import (
    MESSAGE_TYPES,
    AnswerMessage,
    Directive,
    FrameBatch,
    QuestionMessage,
    SessionHello,
    decode_message,
    encode_message,
)
from strategies import ALL_MESSAGES


def test_every_message_type_has_a_strategy():
    assert {t.__name__ for t in MESSAGE_TYPES} == set(ALL_MESSAGES)


@pytest.mark.parametrize("name", sorted(ALL_MESSAGES))
def test_round_trip(name):
    @settings(max_examples=60)
    @given(ALL_MESSAGES[name])
    def check(message):
        data = encode_message(message)
        assert decode_message(data, type(message)) == message
        assert encode_message(decode_message(data, type(message))) == data

    check()


def test_directive_round_trip_example():
    d = Directive("formal", "serious", "neutral")
    body = json.loads(encode_message(d))
    assert body == {"v": "v1", "register": "formal", "tone": "serious", "expression": "neutral"}
    assert decode_message(encode_message(d), Directive) == d


def test_done_question_is_empty():
    body = json.loads(encode_message(QuestionMessage.finished()))
    assert body["done"] is True
    assert body["prompt_text"] == "" and body["question_id"] == ""


def test_frame_batch_encoding_is_deterministic(fixtures_dir):
    frames = FixtureEmotionDetector(fixtures_dir / "emotions").detect_emotions("cristina_first.json")
    batch = FrameBatch(tuple(frames))
    assert len(batch.frames) == 3
    assert encode_message(batch) == encode_message(FrameBatch(tuple(frames)))


def test_encoding_is_canonical():
    data = encode_message(Directive("informal", "playful", "joy"))
    assert data == b'{"expression":"joy","register":"informal","tone":"playful","v":"v1"}'


@given(st.sampled_from(list(ALL_MESSAGES.values())).flatmap(lambda s: s))
def test_equal_values_encode_identically(message):
    assert encode_message(message) == encode_message(type(message).from_wire(message.to_wire()))


# --- rejection --------------------------------------------------------------


def test_closed_enum_register():
    with pytest.raises(ValidationError) as info:
        decode_message(b'{"register":"shouty"}', Directive)
    assert info.value.field == "register"


def test_truncated_bytes():
    data = encode_message(Directive())
    with pytest.raises(ParseError):
        decode_message(data[:-7], Directive)


def test_invalid_utf8():
    with pytest.raises(ParseError):
        decode_message(b'\xff{"v":"v1"}', Directive)


def test_non_object():
    with pytest.raises(ValidationError):
        decode_message(b"[1, 2]", Directive)


def test_version_checks():
    with pytest.raises(ValidationError) as info:
        decode_message(b'{"v":"v2","register":"formal","tone":"serious","expression":"joy"}',
                       Directive)
    assert info.value.field == "v"
    with pytest.raises(ValidationError) as info:
        decode_message(b'{"register":"formal","tone":"serious","expression":"joy"}', Directive)
    assert info.value.field == "v"


def test_unknown_field_rejected():
    with pytest.raises(ValidationError) as info:
        decode_message(b'{"v":"v1","register":"formal","tone":"serious","expression":"joy",'
                       b'"volume":11}', Directive)
    assert info.value.field == "volume"


def test_unknown_emotion_in_expression():
    with pytest.raises(ValidationError) as info:
        decode_message(b'{"v":"v1","register":"formal","tone":"serious","expression":"glee"}',
                       Directive)
    assert info.value.field == "expression"


def _frame(ts=1, **over):
    frame = {"timestamp": ts,
             "scores": {e: 0.1 for e in ("sadness", "anger", "disgust", "joy", "fear",
                                          "surprise", "contempt")},
             "gender": ["female", 0.5], "age_range": ["18-24", 0.5]}
    frame.update(over)
    return frame


def _batch(*frames):
    return json.dumps({"v": "v1", "frames": list(frames)}).encode()


def test_unknown_emotion_name_in_scores():
    frame = _frame()
    frame["scores"]["glee"] = 0.3
    with pytest.raises(ValidationError) as info:
        decode_message(_batch(frame), FrameBatch)
    assert info.value.field == "frames[0].scores.glee"


def test_missing_emotion_in_scores():
    frame = _frame()
    del frame["scores"]["contempt"]
    with pytest.raises(ValidationError) as info:
        decode_message(_batch(frame), FrameBatch)
    assert info.value.field == "frames[0].scores.contempt"


@pytest.mark.parametrize("over,field", [
    ({"gender": ["robot", 0.5]}, "frames[0].gender[0]"),
    ({"age_range": ["30-40", 0.5]}, "frames[0].age_range[0]"),
    ({"gender": ["male", 1.5]}, "frames[0].gender[1]"),
])
def test_frame_vocabularies(over, field):
    with pytest.raises(ValidationError) as info:
        decode_message(_batch(_frame(**over)), FrameBatch)
    assert info.value.field == field


def test_frame_timestamps_must_not_decrease():
    with pytest.raises(ValidationError) as info:
        decode_message(_batch(_frame(5), _frame(3)), FrameBatch)
    assert info.value.field == "frames[1].timestamp"


def test_answer_modality_closed():
    with pytest.raises(ValidationError) as info:
        decode_message(b'{"v":"v1","question_id":"q","modality":"video","payload":"eA=="}',
                       AnswerMessage)
    assert info.value.field == "modality"


@pytest.mark.parametrize("payload", ["", "!!notbase64"])
def test_answer_payload_must_be_non_empty_base64(payload):
    body = json.dumps({"v": "v1", "question_id": "q", "modality": "text", "payload": payload})
    with pytest.raises(ValidationError) as info:
        decode_message(body.encode(), AnswerMessage)
    assert info.value.field == "payload"


def test_question_kind_closed():
    body = {"v": "v1", "question_id": "q", "prompt_text": "p", "attribute_key": "name",
            "kind": "multiple_choice", "done": False}
    with pytest.raises(ValidationError) as info:
        decode_message(json.dumps(body).encode(), QuestionMessage)
    assert info.value.field == "kind"


def test_done_question_with_prompt_rejected():
    body = {"v": "v1", "question_id": "", "prompt_text": "left over", "attribute_key": "",
            "kind": "", "done": True}
    with pytest.raises(ValidationError):
        decode_message(json.dumps(body).encode(), QuestionMessage)


def test_hello_probe_range():
    body = {"v": "v1", "client_id": "c", "face_probe": [0.0, 2.0], "timestamp": 1}
    with pytest.raises(ValidationError) as info:
        decode_message(json.dumps(body).encode(), SessionHello)
    assert info.value.field == "face_probe[1]"


def test_booleans_are_not_integers():
    body = {"v": "v1", "client_id": "c", "face_probe": [0.0], "timestamp": True}
    with pytest.raises(ValidationError):
        decode_message(json.dumps(body).encode(), SessionHello)


def test_answer_text_helper():
    answer = AnswerMessage.text("q_name", "Cristina")
    assert answer.payload == b"Cristina"
    assert decode_message(encode_message(answer), AnswerMessage) == answer
