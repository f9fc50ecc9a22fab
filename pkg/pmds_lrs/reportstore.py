from __future__ import annotations

import json
import struct
import tempfile
import time
from abc import ABC, abstractmethod
from contextlib import AsyncExitStack
from inspect import isawaitable
from logging import Logger, getLogger
from pathlib import Path
from typing import Any, AsyncIterator, Awaitable, Callable, Dict, cast

import aiosqlite
import anyio
from anyio import TASK_STATUS_IGNORED, Event, Lock, create_task_group
from anyio.abc import TaskGroup, TaskStatus

from .utils import Decoder, dumps, frame, get_new_path

Record = Dict[str, Any]

_HEADER = b"VERSION:%d\n"


class ReportNotFound(Exception):
    pass


async def _move_aside(path: str, log: Logger) -> None:
    new_path = await get_new_path(path)
    log.warning("ReportStore version mismatch, moving %s to %s", path, new_path)
    await anyio.Path(path).rename(new_path)


class BaseReportStore(ABC):
    """Persistence for verification and sweep records, one stream of records per label."""

    metadata_callback: Callable[[], Awaitable[bytes] | bytes] | None = None
    version = 1
    _started: Event | None = None
    _starting: bool = False
    _task_group: TaskGroup | None = None

    @abstractmethod
    def __init__(
        self, label: str, metadata_callback: Callable[[], Awaitable[bytes] | bytes] | None = None
    ):
        ...

    @abstractmethod
    async def write(self, record: Record) -> None:
        ...

    @abstractmethod
    async def read(self) -> AsyncIterator[tuple[Record, bytes, float]]:
        ...

    @property
    def started(self) -> Event:
        if self._started is None:
            self._started = Event()
        return self._started

    async def __aenter__(self) -> BaseReportStore:
        if self._task_group is not None:
            raise RuntimeError("ReportStore already running")

        async with AsyncExitStack() as exit_stack:
            tg = create_task_group()
            self._task_group = await exit_stack.enter_async_context(tg)
            self._exit_stack = exit_stack.pop_all()
            tg.start_soon(self._init)
            self.started.set()

        return self

    async def __aexit__(self, exc_type, exc_value, exc_tb):
        if self._task_group is None:
            raise RuntimeError("ReportStore not running")

        self._task_group.cancel_scope.cancel()
        self._task_group = None
        return await self._exit_stack.__aexit__(exc_type, exc_value, exc_tb)

    async def start(self, *, task_status: TaskStatus[None] = TASK_STATUS_IGNORED):
        """Start the store.

        Arguments:
            task_status: The status to set when the task has started.
        """
        if self._starting:
            return
        else:
            self._starting = True

        if self._task_group is not None:
            raise RuntimeError("ReportStore already running")

        async with create_task_group() as self._task_group:
            self._task_group.start_soon(self._init)
            self.started.set()
            self._starting = False
            task_status.started()

    async def _init(self) -> None:
        pass

    def stop(self) -> None:
        """Stop the store."""
        if self._task_group is None:
            raise RuntimeError("ReportStore not running")

        self._task_group.cancel_scope.cancel()
        self._task_group = None

    async def get_metadata(self) -> bytes:
        """
        Returns:
            The metadata.
        """
        if self.metadata_callback is None:
            return b""

        metadata = self.metadata_callback()
        if isawaitable(metadata):
            metadata = await metadata
        metadata = cast(bytes, metadata)
        return metadata

    async def records(self) -> list[Record]:
        """
        Returns:
            All stored records of this label, oldest first.
        """
        return [record async for record, *rest in self.read()]


class FileReportStore(BaseReportStore):
    """A report store which uses one file per label."""

    path: str
    metadata_callback: Callable[[], Awaitable[bytes] | bytes] | None
    lock: Lock

    def __init__(
        self,
        path: str,
        metadata_callback: Callable[[], Awaitable[bytes] | bytes] | None = None,
        log: Logger | None = None,
    ) -> None:
        """Initialize the object.

        Arguments:
            path: The file path used to store the records.
            metadata_callback: An optional callback to call to get the metadata.
            log: An optional logger.
        """
        self.path = path
        self.metadata_callback = metadata_callback
        self.log = log or getLogger(__name__)
        self.lock = Lock()

    async def check_version(self) -> int:
        """Make sure the file starts with the current format header.

        A file written with another format version is moved aside and a fresh one started.

        Returns:
            The offset of the first record.
        """
        header = _HEADER % self.version
        path = anyio.Path(self.path)
        if await path.exists():
            async with await anyio.open_file(self.path, "rb") as f:
                if await f.readline() == header:
                    return len(header)
            await _move_aside(self.path, self.log)
        async with await anyio.open_file(self.path, "wb") as f:
            await f.write(header)
        return len(header)

    async def read(self) -> AsyncIterator[tuple[Record, bytes, float]]:  # type: ignore
        """Records in the file, as (record, metadata, timestamp).

        Raises:
            ReportNotFound: If the file is missing or holds no records.
        """
        async with self.lock:
            if not await anyio.Path(self.path).exists():
                raise ReportNotFound(self.path)
            offset = await self.check_version()
            async with await anyio.open_file(self.path, "rb") as f:
                await f.seek(offset)
                data = await f.read()
        if not data:
            raise ReportNotFound(self.path)
        fields = Decoder(data).read_messages()
        # frames come in (record, metadata, timestamp) triples
        for record, metadata, timestamp in zip(fields, fields, fields):
            yield json.loads(record), metadata, struct.unpack("<d", timestamp)[0]

    async def write(self, record: Record) -> None:
        """Store a record.

        Arguments:
            record: The JSON-serializable record to store.
        """
        parent = Path(self.path).parent
        async with self.lock:
            await anyio.Path(parent).mkdir(parents=True, exist_ok=True)
            await self.check_version()
            async with await anyio.open_file(self.path, "ab") as f:
                metadata = await self.get_metadata()
                timestamp = struct.pack("<d", time.time())
                await f.write(frame(dumps(record).encode()) + frame(metadata) + frame(timestamp))


class TempFileReportStore(FileReportStore):
    """A report store which uses the system's temporary directory.
    Files are written under a common directory.
    To prefix the directory name (e.g. /tmp/my_prefix_b4whmm7y/):

    ```py
    class PrefixTempFileReportStore(TempFileReportStore):
        prefix_dir = "my_prefix_"
    ```
    """

    prefix_dir: str | None = None
    base_dir: str | None = None

    def __init__(
        self,
        path: str,
        metadata_callback: Callable[[], Awaitable[bytes] | bytes] | None = None,
        log: Logger | None = None,
    ):
        full_path = str(Path(self.get_base_dir()) / path)
        super().__init__(full_path, metadata_callback=metadata_callback, log=log)

    def get_base_dir(self) -> str:
        """
        Returns:
            The base directory where the record files are written.
        """
        if self.base_dir is None:
            self.make_directory()
        assert self.base_dir is not None
        return self.base_dir

    def make_directory(self):
        type(self).base_dir = tempfile.mkdtemp(prefix=self.prefix_dir)


class SQLiteReportStore(BaseReportStore):
    """A report store which uses an SQLite database.
    The records of all labels are stored in the same database.

    Subclass to point to your database file:

    ```py
    class MySQLiteReportStore(SQLiteReportStore):
        db_path = "path/to/my_reports.db"
    ```
    """

    db_path: str = "reports.db"
    # Records of a label older than this many seconds are dropped on the next write,
    # so that a rerun sweep replaces the stale one. Defaults to keeping everything.
    report_ttl: int | None = None
    label: str
    lock: Lock
    db_initialized: Event

    def __init__(
        self,
        label: str,
        metadata_callback: Callable[[], Awaitable[bytes] | bytes] | None = None,
        log: Logger | None = None,
    ) -> None:
        """Initialize the object.

        Arguments:
            label: The label under which records are stored.
            metadata_callback: An optional callback to call to get the metadata.
            log: An optional logger.
        """
        self.label = label
        self.metadata_callback = metadata_callback
        self.log = log or getLogger(__name__)
        self.lock = Lock()
        self.db_initialized = Event()

    async def _db_version(self) -> int | None:
        if not await anyio.Path(self.db_path).exists():
            return None
        async with aiosqlite.connect(self.db_path) as db:
            cursor = await db.execute("SELECT count(name) FROM sqlite_master WHERE type='table' AND name='reports'")
            if not (await cursor.fetchone())[0]:
                return None
            cursor = await db.execute("PRAGMA user_version")
            return (await cursor.fetchone())[0]

    async def _init(self) -> None:
        async with self.lock:
            version = await self._db_version()
            if version != self.version:
                if version is not None:
                    await _move_aside(self.db_path, self.log)
                async with aiosqlite.connect(self.db_path) as db:
                    await db.execute(
                        "CREATE TABLE IF NOT EXISTS reports "
                        "(label TEXT NOT NULL, record TEXT, metadata BLOB, timestamp REAL NOT NULL)"
                    )
                    await db.execute("CREATE INDEX IF NOT EXISTS idx_reports_label ON reports (label, timestamp)")
                    await db.execute(f"PRAGMA user_version = {self.version}")
                    await db.commit()
        self.db_initialized.set()

    async def read(self) -> AsyncIterator[tuple[Record, bytes, float]]:  # type: ignore
        """Records of this label in insertion order, as (record, metadata, timestamp).

        Raises:
            ReportNotFound: If the label has no records.
        """
        await self.db_initialized.wait()
        async with self.lock:
            async with aiosqlite.connect(self.db_path) as db:
                cursor = await db.execute(
                    "SELECT record, metadata, timestamp FROM reports WHERE label = ? ORDER BY rowid",
                    (self.label,),
                )
                rows = await cursor.fetchall()
        if not rows:
            raise ReportNotFound(self.label)
        for record, metadata, timestamp in rows:
            yield json.loads(record), metadata, timestamp

    async def write(self, record: Record) -> None:
        """Store a record.

        Arguments:
            record: The JSON-serializable record to store.
        """
        await self.db_initialized.wait()
        async with self.lock:
            async with aiosqlite.connect(self.db_path) as db:
                cursor = await db.execute(
                    "SELECT timestamp FROM reports WHERE label = ? ORDER BY timestamp DESC LIMIT 1",
                    (self.label,),
                )
                row = await cursor.fetchone()
                diff = (time.time() - row[0]) if row else 0

                if self.report_ttl is not None and diff > self.report_ttl:
                    self.log.info("Dropping stale records of %s", self.label)
                    await db.execute("DELETE FROM reports WHERE label = ?", (self.label,))

                metadata = await self.get_metadata()
                await db.execute(
                    "INSERT INTO reports VALUES (?, ?, ?, ?)",
                    (self.label, dumps(record), metadata, time.time()),
                )
                await db.commit()


def open_report_store(path: str, label: str = "sweep", log: Logger | None = None) -> BaseReportStore:
    """A SQLite store for paths ending in `.db`, a file store otherwise."""
    if path.endswith(".db"):
        store_class = type("SQLiteReportStoreAt", (SQLiteReportStore,), {"db_path": path})
        return store_class(label, log=log)
    return FileReportStore(path, log=log)
