"""Injectable wall clocks so incident timelines replay deterministically."""

from __future__ import annotations

import os
import threading
from datetime import datetime, timedelta
from typing import Callable, Optional, Sequence

Clock = Callable[[], datetime]

CLOCK_ENV = "PLAYBOOK_CLOCK"


def system_clock() -> datetime:
    return datetime.now().astimezone()


def scripted_clock(
    instants: Sequence[datetime], tail_step: timedelta = timedelta(minutes=5)
) -> Clock:
    """Yield the given instants in order, then keep stepping past the last."""
    if not instants:
        raise ValueError("scripted clock needs at least one instant")
    lock = threading.Lock()
    state = {"index": 0}

    def tick() -> datetime:
        with lock:
            i = state["index"]
            state["index"] += 1
        if i < len(instants):
            return instants[i]
        return instants[-1] + tail_step * (i - len(instants) + 1)

    return tick


def stepping_clock(start: datetime, step: timedelta = timedelta(minutes=5)) -> Clock:
    return scripted_clock([start], tail_step=step)


def clock_from_env(environ: Optional[dict] = None) -> Optional[Clock]:
    """Build a stepping clock from PLAYBOOK_CLOCK=`<iso-instant>/<step-seconds>`.

    Returns None when the variable is unset; raises ValueError on garbage
    so misconfiguration never silently falls back to real time.
    """
    env = os.environ if environ is None else environ
    raw = env.get(CLOCK_ENV)
    if not raw:
        return None
    start_text, _, step_text = raw.partition("/")
    start = datetime.fromisoformat(start_text)
    step = float(step_text) if step_text else 300.0
    return stepping_clock(start, timedelta(seconds=step))
