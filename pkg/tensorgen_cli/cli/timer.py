import time
from contextlib import ContextDecorator
from dataclasses import dataclass, field
from typing import Any, Callable, ClassVar, Dict, Optional

from loguru import logger as _logger


class TimerError(Exception):
    """A custom exception used to report errors in use of Timer class"""


def _debug(message: str) -> None:
    _logger.opt(colors=True).debug(message)


@dataclass
class Timer(ContextDecorator):
    """
    Times a pipeline stage, as a context manager or a decorator.

    Elapsed times are logged at DEBUG level, so they only show with ``--verbose``. Named timers
    accumulate their totals in ``Timer.timers``.
    """

    timers: ClassVar[Dict[str, float]] = {}
    name: Optional[str] = None
    text: str = "{name} took <cyan>{seconds:0.4f} seconds</>"
    logger: Optional[Callable[[str], None]] = _debug
    _start_time: Optional[float] = field(default=None, init=False, repr=False)

    def __post_init__(self) -> None:
        if self.name:
            self.timers.setdefault(self.name, 0)

    def start(self) -> None:
        """Starts the timer."""
        if self._start_time is not None:
            raise TimerError("Timer is running. Use .stop() to stop it")
        self._start_time = time.perf_counter()

    def stop(self) -> float:
        """Stops the timer, reports and returns the elapsed seconds."""
        if self._start_time is None:
            raise TimerError("Timer is not running. Use .start() to start it")

        elapsed_time = time.perf_counter() - self._start_time
        self._start_time = None

        if self.logger:
            self.logger(self.text.format(name=self.name or "Stage", seconds=elapsed_time))
        if self.name:
            self.timers[self.name] += elapsed_time

        return elapsed_time

    def __enter__(self) -> "Timer":
        self.start()
        return self

    def __exit__(self, *exc_info: Any) -> None:
        self.stop()
