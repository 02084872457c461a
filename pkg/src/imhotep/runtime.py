"""Event bus and background task executor.

Modules talk through topics instead of direct references: anything may
publish from any thread, while delivery happens only when the owning
(coordination) context calls `pump_events`.  Expensive jobs go through
`TaskExecutor.submit_task`, which runs them on a worker thread and fires
exactly one completion event on the bus.
"""

from __future__ import annotations

import enum
import inspect
import threading
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable

from .errors import ExecutorShutDown


class EventBus:
    """Per-topic FIFO queue with pull-based, exactly-once delivery."""

    def __init__(self):
        self._lock = threading.Lock()
        self._queue: deque[tuple[str, Any]] = deque()
        self._subs: dict[str, list[tuple[int, Callable[[Any], None]]]] = {}
        self._next_sub_id = 1
        self._pumping = False
        self._wakeup: Callable[[], None] | None = None

    def subscribe(self, topic: str, handler: Callable[[Any], None]) -> int:
        """Register a handler; handlers fire in subscription order."""
        if not topic:
            raise ValueError("topic must be nonempty")
        with self._lock:
            sub_id = self._next_sub_id
            self._next_sub_id += 1
            self._subs.setdefault(topic, []).append((sub_id, handler))
        return sub_id

    def unsubscribe(self, sub_id: int) -> bool:
        with self._lock:
            for topic, handlers in self._subs.items():
                for i, (sid, _) in enumerate(handlers):
                    if sid == sub_id:
                        del handlers[i]
                        return True
        return False

    def set_wakeup(self, callback: Callable[[], None] | None) -> None:
        """Thread-safe hook fired after every enqueue (for pump scheduling)."""
        with self._lock:
            self._wakeup = callback

    def publish(self, topic: str, payload: Any = None) -> None:
        """Enqueue an event from any thread; delivery waits for the pump."""
        if not topic:
            raise ValueError("topic must be nonempty")
        with self._lock:
            self._queue.append((topic, payload))
            wakeup = self._wakeup
        if wakeup is not None:
            wakeup()

    def pending(self) -> int:
        with self._lock:
            return len(self._queue)

    def pump_events(self, max_events: int | None = None) -> int:
        """Deliver queued events in order on the calling context.

        At most `max_events` are delivered, and never more than were
        queued on entry: events published by handlers during this pump
        wait for the next one.  Must not be re-entered from a handler.
        """
        with self._lock:
            if self._pumping:
                raise RuntimeError("pump_events re-entered from a handler")
            self._pumping = True
            budget = len(self._queue)
        if max_events is not None:
            budget = min(budget, max_events)
        delivered = 0
        try:
            while delivered < budget:
                with self._lock:
                    if not self._queue:
                        break
                    topic, payload = self._queue.popleft()
                    handlers = list(self._subs.get(topic, ()))
                for _sid, handler in handlers:
                    handler(payload)
                delivered += 1
        finally:
            with self._lock:
                self._pumping = False
        return delivered


class TaskStatus(enum.Enum):
    PENDING = "pending"
    RUNNING = "running"
    DONE = "done"
    FAILED = "failed"


_STATUS_ORDER = {
    TaskStatus.PENDING: 0,
    TaskStatus.RUNNING: 1,
    TaskStatus.DONE: 2,
    TaskStatus.FAILED: 2,
}


class TaskHandle:
    """Observable state of one submitted job; moves only forward."""

    def __init__(self, task_id: int):
        self.id = task_id
        self._lock = threading.Lock()
        self._status = TaskStatus.PENDING
        self._progress = 0.0

    @property
    def status(self) -> TaskStatus:
        with self._lock:
            return self._status

    @property
    def progress(self) -> float:
        with self._lock:
            return self._progress

    def _advance(self, status: TaskStatus) -> None:
        with self._lock:
            if _STATUS_ORDER[status] < _STATUS_ORDER[self._status]:
                raise RuntimeError(f"status cannot move back from {self._status} to {status}")
            self._status = status
            if status is TaskStatus.DONE:
                self._progress = 1.0

    def report_progress(self, value: float) -> None:
        value = min(1.0, max(0.0, float(value)))
        with self._lock:
            self._progress = max(self._progress, value)


@dataclass(frozen=True)
class TaskCompletion:
    """Payload of the single completion event every task publishes."""

    task_id: int
    value: Any = None
    error: BaseException | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def _wants_progress(job: Callable) -> bool:
    try:
        params = inspect.signature(job).parameters
    except (TypeError, ValueError):
        return False
    return len(params) >= 1


class TaskExecutor:
    """Worker pool whose completions are published to an event bus."""

    def __init__(self, bus: EventBus, max_workers: int | None = None):
        self.bus = bus
        self._pool = ThreadPoolExecutor(max_workers=max_workers,
                                        thread_name_prefix="imhotep-task")
        self._lock = threading.Lock()
        self._next_task_id = 1
        self._shut_down = False

    def submit_task(self, job: Callable, completion_topic: str) -> TaskHandle:
        """Run `job` on a worker; publish exactly one completion event.

        Jobs taking an argument receive a progress callback (a float in
        [0, 1]); handle progress is monotone regardless of what they send.
        """
        with self._lock:
            if self._shut_down:
                raise ExecutorShutDown("executor is shut down")
            handle = TaskHandle(self._next_task_id)
            self._next_task_id += 1

        pass_progress = _wants_progress(job)

        def run():
            handle._advance(TaskStatus.RUNNING)
            try:
                value = job(handle.report_progress) if pass_progress else job()
            except BaseException as exc:
                handle._advance(TaskStatus.FAILED)
                self.bus.publish(completion_topic,
                                 TaskCompletion(task_id=handle.id, error=exc))
                return
            handle._advance(TaskStatus.DONE)
            self.bus.publish(completion_topic,
                             TaskCompletion(task_id=handle.id, value=value))

        try:
            self._pool.submit(run)
        except RuntimeError as exc:
            raise ExecutorShutDown(str(exc)) from None
        return handle

    def shutdown(self, wait: bool = True) -> None:
        with self._lock:
            self._shut_down = True
        self._pool.shutdown(wait=wait, cancel_futures=True)


@dataclass
class Runtime:
    """One coordination context: a bus plus its background executor."""

    bus: EventBus = field(default_factory=EventBus)
    workers: int | None = None

    def __post_init__(self):
        self.executor = TaskExecutor(self.bus, max_workers=self.workers)

    def close(self, wait: bool = True) -> None:
        self.executor.shutdown(wait=wait)
        self.bus.set_wakeup(None)
