"""Terminal robot simulator: plays the robot side of a conversation.

``simulate interactive`` lets a person play the visitor at the keyboard;
``simulate scripted`` replays a scenario file and prints a deterministic
transcript, optionally comparing it with a checked-in golden file.

Exit codes: 0 success/match, 1 transcript mismatch, 2 connection or
protocol failure.
"""

from __future__ import annotations

import argparse
import difflib
import io
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence, TextIO

from .client import BrainClient, ClientError
from .errors import BrainError
from .perception import EmotionFrame, FixtureEmotionDetector, make_template
from .protocol import AnswerMessage, Directive
from .usermodel import FaceTemplate

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_FAILURE = 2

DEFAULT_SERVER = os.environ.get("ROBOT_BRAIN_SERVER", "http://127.0.0.1:8765")

ReplySource = Callable[[], Optional[str]]


def format_directive(directive: Directive) -> str:
    return (f"[register={directive.register} tone={directive.tone} "
            f"expression={directive.expression}]")


class Conversation:
    """Drives one session against the brain and mirrors it as a transcript.

    Both simulator modes run through :meth:`run`; only the reply source
    differs. A reply source returning None ends the conversation early and
    leaves the session to the server's idle timeout.
    """

    def __init__(self, client: BrainClient, out: TextIO, *, audio: bool = False,
                 client_id: str = "simulator"):
        self.client = client
        self.out = out
        self.audio = audio
        self.client_id = client_id
        self._directive: Optional[Directive] = None

    def _say(self, line: str) -> None:
        print(line, file=self.out, flush=True)

    def _show(self, directive: Directive) -> None:
        if directive != self._directive:
            self._say(format_directive(directive))
            self._directive = directive

    def run(self, probe: FaceTemplate, frames: Sequence[EmotionFrame],
            next_reply: ReplySource) -> int:
        greeting = self.client.start_session(probe, self.client_id)
        sid = greeting.session_id
        self._say(f"ROBOT: {greeting.greeting_text}")
        self._show(greeting.directive)

        while True:
            question = self.client.next_question(sid)
            if question.done:
                self._say("[no more questions]")
                break
            self._say(f"ROBOT: {question.prompt_text}")
            reply = next_reply()
            if reply is None:
                return EXIT_OK
            if self.audio:
                answer = AnswerMessage.audio(question.question_id, reply.encode("utf-8"))
            else:
                answer = AnswerMessage.text(question.question_id, reply)
            ack = self.client.post_answer(sid, answer)
            if not ack.accepted:
                self._say("[reply not understood, asking again]")
            self._show(ack.directive)

        if frames:
            self._show(self.client.post_frames(sid, frames))
        summary = self.client.end_session(sid)
        if summary.predominant is None:
            mood = "none"
        else:
            mood = f"{summary.predominant[0]} ({summary.predominant[1]:.3f})"
        self._say(f"SUMMARY: interactions={summary.interaction_count} predominant={mood}")
        return EXIT_OK


def scripted_replies(replies: Sequence[str], out: TextIO) -> ReplySource:
    pending = list(replies)

    def next_reply() -> Optional[str]:
        if not pending:
            return None
        reply = pending.pop(0)
        print(f"YOU: {reply}", file=out, flush=True)
        return reply

    return next_reply


def terminal_replies(read: Callable[[str], str] = input, out: Optional[TextIO] = None) -> ReplySource:
    def next_reply() -> Optional[str]:
        try:
            return read("YOU: ")
        except EOFError:
            print("\n[conversation aborted]", file=out, flush=True)
            return None

    return next_reply


# --- scenarios --------------------------------------------------------------


@dataclass
class Scenario:
    face: FaceTemplate
    replies: List[str] = field(default_factory=list)
    emotions: Optional[Path] = None
    expect: Optional[Path] = None
    client_id: str = "simulator"
    audio: bool = False


def load_face(ref, base: Path) -> FaceTemplate:
    """A face probe is either a list of numbers or a path to a JSON list."""
    if isinstance(ref, str):
        path = base / ref
        try:
            ref = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ValueError(f"face fixture {str(path)!r} not found") from None
    return make_template(ref, path="face")


def load_scenario(path: os.PathLike | str) -> Scenario:
    path = Path(path)
    raw = json.loads(path.read_text(encoding="utf-8"))
    unknown = set(raw) - {"face", "replies", "emotions", "expect", "client_id", "audio"}
    if unknown:
        raise ValueError(f"{path}: unknown scenario keys {sorted(unknown)}")
    base = path.parent
    emotions = base / raw["emotions"] if raw.get("emotions") else None
    if emotions is not None and not emotions.exists():
        raise ValueError(f"{path}: emotion fixture {str(emotions)!r} not found")
    replies = raw.get("replies", [])
    if not isinstance(replies, list) or not all(isinstance(r, str) for r in replies):
        raise ValueError(f"{path}: replies must be a list of strings")
    return Scenario(
        face=load_face(raw["face"], base),
        replies=replies,
        emotions=emotions,
        expect=base / raw["expect"] if raw.get("expect") else None,
        client_id=raw.get("client_id", "simulator"),
        audio=bool(raw.get("audio", False)),
    )


def run_scripted(scenario_path: os.PathLike | str, server: str = DEFAULT_SERVER, *,
                 expect: Optional[os.PathLike | str] = None, audio: Optional[bool] = None,
                 out: Optional[TextIO] = None, err: Optional[TextIO] = None) -> tuple[str, int]:
    """Replay a scenario; returns ``(transcript, exit_status)``."""
    out, err = out or sys.stdout, err or sys.stderr
    try:
        scenario = load_scenario(scenario_path)
        frames = []
        if scenario.emotions is not None:
            frames = FixtureEmotionDetector().detect_emotions(str(scenario.emotions))
    except (ValueError, KeyError, OSError, BrainError) as exc:
        print(f"simulate: bad scenario: {exc}", file=err)
        return "", EXIT_FAILURE

    buffer = io.StringIO()
    conversation = Conversation(BrainClient(server), buffer,
                                audio=scenario.audio if audio is None else audio,
                                client_id=scenario.client_id)
    try:
        status = conversation.run(scenario.face, frames, scripted_replies(scenario.replies, buffer))
    except (ClientError, BrainError) as exc:
        out.write(buffer.getvalue())
        print(f"simulate: {exc}", file=err)
        return buffer.getvalue(), EXIT_FAILURE
    transcript = buffer.getvalue()
    out.write(transcript)

    expected_path = Path(expect) if expect is not None else scenario.expect
    if expected_path is not None:
        try:
            expected = expected_path.read_bytes()
        except OSError as exc:
            print(f"simulate: cannot read expected transcript: {exc}", file=err)
            return transcript, EXIT_FAILURE
        if expected != transcript.encode("utf-8"):
            diff = difflib.unified_diff(
                expected.decode("utf-8", "replace").splitlines(keepends=True),
                transcript.splitlines(keepends=True),
                fromfile=str(expected_path), tofile="actual")
            err.writelines(diff)
            return transcript, EXIT_MISMATCH
    return transcript, status


def run_interactive(server: str, face: FaceTemplate, emotions: Optional[os.PathLike | str] = None,
                    *, audio: bool = False, read: Callable[[str], str] = input,
                    out: Optional[TextIO] = None, err: Optional[TextIO] = None) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    try:
        frames = FixtureEmotionDetector().detect_emotions(str(emotions)) if emotions else []
    except BrainError as exc:
        print(f"simulate: {exc}", file=err)
        return EXIT_FAILURE
    conversation = Conversation(BrainClient(server), out, audio=audio)
    try:
        return conversation.run(face, frames, terminal_replies(read, out))
    except (ClientError, BrainError) as exc:
        print(f"simulate: {exc}", file=err)
        return EXIT_FAILURE


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="simulate", description="Robot client simulator.")
    sub = parser.add_subparsers(dest="mode", required=True)

    inter = sub.add_parser("interactive", help="talk to the brain from the keyboard")
    inter.add_argument("--server", default=DEFAULT_SERVER)
    inter.add_argument("--face", required=True, help="JSON file holding the face probe vector")
    inter.add_argument("--emotions", help="emotion frame fixture to stream")
    inter.add_argument("--audio", action="store_true", help="send replies as audio payloads")

    scripted = sub.add_parser("scripted", help="replay a scenario file")
    scripted.add_argument("scenario")
    scripted.add_argument("--expect", help="golden transcript to compare against")
    scripted.add_argument("--server", default=DEFAULT_SERVER)
    scripted.add_argument("--audio", action="store_true", default=None)

    args = parser.parse_args(argv)
    if args.mode == "interactive":
        try:
            face = load_face(args.face, Path.cwd())
        except (ValueError, BrainError) as exc:
            print(f"simulate: {exc}", file=sys.stderr)
            return EXIT_FAILURE
        return run_interactive(args.server, face, args.emotions, audio=args.audio)
    _, status = run_scripted(args.scenario, args.server, expect=args.expect, audio=args.audio)
    return status


if __name__ == "__main__":
    sys.exit(main())
