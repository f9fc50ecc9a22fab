from __future__ import annotations

from contextlib import AsyncExitStack
from dataclasses import dataclass, field
from logging import Logger, getLogger
from typing import Callable, Hashable, Iterable, Sequence, TypeVar

from anyio import (
    TASK_STATUS_IGNORED,
    CapacityLimiter,
    Event,
    create_memory_object_stream,
    create_task_group,
    to_thread,
)
from anyio.abc import TaskGroup, TaskStatus
from anyio.streams.memory import MemoryObjectReceiveStream, MemoryObjectSendStream

T = TypeVar("T", bound=Hashable)

Check = Callable[[Sequence[T]], Sequence[T]]


@dataclass
class _Batch:
    count: int = 0
    failures: list = field(default_factory=list)
    pending: int = 0
    closed: bool = False
    error: BaseException | None = None
    done: Event = field(default_factory=Event)

    def settle(self) -> None:
        if self.closed and self.pending == 0:
            self.done.set()


@dataclass
class _Job:
    items: list
    batch: _Batch


def chunked(items: Iterable[T], size: int) -> Iterable[list[T]]:
    chunk: list[T] = []
    for item in items:
        chunk.append(item)
        if len(chunk) == size:
            yield chunk
            chunk = []
    if chunk:
        yield chunk


class VerificationPool:
    """Fan a pure check out over worker threads.

    The check receives a chunk of items and returns the failing ones. Results are
    merged into a count and a sorted list of failures, so the outcome does not depend
    on the number of workers or on scheduling.
    """

    chunk_size: int = 256
    jobs: int
    _send_stream: MemoryObjectSendStream
    _receive_stream: MemoryObjectReceiveStream
    _limiter: CapacityLimiter
    _task_group: TaskGroup | None
    _started: Event | None
    _starting: bool

    def __init__(
        self,
        check: Check,
        jobs: int = 1,
        chunk_size: int | None = None,
        log: Logger | None = None,
    ):
        """Initialize the object.

        The pool should preferably be used as an async context manager:
        ```py
        async with VerificationPool(check, jobs=4) as pool:
            count, failures = await pool.run(patterns)
        ```
        However, a lower-level API can also be used:
        ```py
        task = asyncio.create_task(pool.start())
        await pool.started.wait()
        ...
        pool.stop()
        ```

        Arguments:
            check: A pure function mapping a chunk of items to the failing ones.
            jobs: The number of worker threads.
            chunk_size: The number of items per worker task.
            log: An optional logger.
        """
        if jobs < 1:
            raise ValueError(f"jobs must be at least 1, got {jobs}")
        self.check = check
        self.jobs = jobs
        if chunk_size is not None:
            self.chunk_size = chunk_size
        self.log = log or getLogger(__name__)
        self._task_group = None
        self._started = None
        self._starting = False

    @property
    def started(self) -> Event:
        """An async event that is set when the pool has started."""
        if self._started is None:
            self._started = Event()
        return self._started

    async def _worker(self, receive_stream: MemoryObjectReceiveStream) -> None:
        async with receive_stream:
            async for job in receive_stream:
                batch = job.batch
                if batch.error is None:
                    try:
                        failures = await to_thread.run_sync(self.check, job.items, limiter=self._limiter)
                    except Exception as exc:
                        batch.error = exc
                    else:
                        batch.count += len(job.items)
                        batch.failures.extend(failures)
                        self.log.debug("Checked %d items, %d failures", len(job.items), len(failures))
                batch.pending -= 1
                batch.settle()

    def _open(self, tg: TaskGroup) -> None:
        self._limiter = CapacityLimiter(self.jobs)
        self._send_stream, self._receive_stream = create_memory_object_stream(max_buffer_size=self.jobs)
        for _ in range(self.jobs):
            tg.start_soon(self._worker, self._receive_stream.clone())
        self._receive_stream.close()

    async def __aenter__(self) -> VerificationPool:
        if self._task_group is not None:
            raise RuntimeError("VerificationPool already running")

        async with AsyncExitStack() as exit_stack:
            tg = create_task_group()
            self._task_group = await exit_stack.enter_async_context(tg)
            self._exit_stack = exit_stack.pop_all()
            self._open(tg)
            self.started.set()

        return self

    async def __aexit__(self, exc_type, exc_value, exc_tb):
        if self._task_group is None:
            raise RuntimeError("VerificationPool not running")

        await self._send_stream.aclose()
        self._task_group = None
        return await self._exit_stack.__aexit__(exc_type, exc_value, exc_tb)

    async def start(self, *, task_status: TaskStatus[None] = TASK_STATUS_IGNORED):
        """Start the pool.

        Arguments:
            task_status: The status to set when the task has started.
        """
        if self._starting:
            return
        else:
            self._starting = True

        if self._task_group is not None:
            raise RuntimeError("VerificationPool already running")

        async with create_task_group() as self._task_group:
            self._open(self._task_group)
            self.started.set()
            self._starting = False
            task_status.started()

    def stop(self):
        """Stop the pool."""
        if self._task_group is None:
            raise RuntimeError("VerificationPool not running")

        self._send_stream.close()
        self._task_group.cancel_scope.cancel()
        self._task_group = None

    async def run(self, items: Iterable[T]) -> tuple[int, list[T]]:
        """Check every item.

        Arguments:
            items: The items, streamed to the workers in chunks.

        Returns:
            The number of items checked and the sorted failures.
        """
        if self._task_group is None:
            raise RuntimeError("VerificationPool not running")

        batch = _Batch()
        for chunk in chunked(items, self.chunk_size):
            if batch.error is not None:
                break
            batch.pending += 1
            await self._send_stream.send(_Job(chunk, batch))
        batch.closed = True
        batch.settle()
        await batch.done.wait()
        if batch.error is not None:
            raise batch.error
        return batch.count, sorted(batch.failures)
