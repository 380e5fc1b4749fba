from __future__ import annotations

import pytest

from constructive.corpus import ChatMessage, GameRecord, LatLon, MarkerMove, SoloGuess
from constructive.text import load_resources

T0 = 1000.0


def make_game(
    messages=(("A", 1.0, "hello there"), ("B", 2.0, "hi")),
    moves=(),
    players=("A", "B"),
    solos=None,
    truth=(10.0, 20.0),
    final=(10.5, 20.5),
    game_id="g1",
    puzzle_id="p1",
    duration=60.0,
    window_leave=None,
) -> GameRecord:
    """Build a record from offsets relative to ``T0``."""
    if solos is None:
        solos = [(p, (truth[0] + 1.0 + i, truth[1]), 0.5) for i, p in enumerate(players)]
    return GameRecord(
        game_id=game_id,
        puzzle_id=puzzle_id,
        true_location=LatLon(*truth),
        players=tuple(players),
        solo_guesses=tuple(SoloGuess(p, LatLon(*loc), c) for p, loc, c in solos),
        messages=tuple(ChatMessage(p, T0 + t, text) for p, t, text in messages),
        marker_moves=tuple(MarkerMove(p, T0 + t, LatLon(*loc)) for p, t, loc in moves),
        final_guess=LatLon(*final) if final is not None else None,
        started_at=T0,
        submitted_at=T0 + duration,
        window_leave=window_leave,
    )


@pytest.fixture(scope="session")
def resources():
    return load_resources()


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
