import os
import tempfile
import time
from pathlib import Path
from unittest.mock import patch

import aiosqlite
import pytest

from pmds_lrs.reportstore import (
    FileReportStore,
    ReportNotFound,
    SQLiteReportStore,
    TempFileReportStore,
    open_report_store,
)


class MetadataCallback:
    def __init__(self):
        self.i = 0

    async def __call__(self):
        res = str(self.i).encode()
        self.i += 1
        return res


class MyTempFileReportStore(TempFileReportStore):
    prefix_dir = "test_temp_"


MY_SQLITE_REPORT_STORE_DB_PATH = str(Path(tempfile.mkdtemp(prefix="test_sql_")) / "reports.db")


class MySQLiteReportStore(SQLiteReportStore):
    db_path = MY_SQLITE_REPORT_STORE_DB_PATH
    report_ttl = 1000

    def __init__(self, *args, delete_db=False, **kwargs):
        if delete_db and os.path.exists(self.db_path):
            os.remove(self.db_path)
        super().__init__(*args, **kwargs)


RECORDS = [
    {"p": 2, "e": 2, "r": 2, "delta": 2, "h": 2, "m": 3, "mr": True},
    {"p": 2, "e": 3, "r": 3, "delta": 2, "h": 1, "m": 2, "mr": True},
    {"p": 3, "e": 1, "r": 1, "delta": 2, "h": 1, "m": 2, "mr": False},
]


@pytest.mark.anyio
@pytest.mark.parametrize("ReportStore", (MyTempFileReportStore, MySQLiteReportStore))
async def test_report_store(ReportStore):
    label = "my_sweep"
    store = ReportStore(label, metadata_callback=MetadataCallback())
    await store.start()
    for record in RECORDS:
        await store.write(record)

    if ReportStore == MyTempFileReportStore:
        assert (Path(MyTempFileReportStore.base_dir) / label).exists()
    elif ReportStore == MySQLiteReportStore:
        assert Path(MySQLiteReportStore.db_path).exists()
    i = 0
    async for record, metadata, timestamp in store.read():
        assert record == RECORDS[i]
        assert metadata == str(i).encode()
        assert timestamp <= time.time()
        i += 1

    assert i == len(RECORDS)


@pytest.mark.anyio
async def test_labels_are_separate_in_sqlite_store():
    first = MySQLiteReportStore("first", delete_db=True)
    await first.start()
    await first.write(RECORDS[0])
    second = MySQLiteReportStore("second")
    await second.start()
    await second.write(RECORDS[1])
    assert await first.records() == [RECORDS[0]]
    assert await second.records() == [RECORDS[1]]
    third = MySQLiteReportStore("third")
    await third.start()
    with pytest.raises(ReportNotFound):
        await third.records()


@pytest.mark.anyio
async def test_missing_file_store():
    store = FileReportStore(str(Path(tempfile.mkdtemp(prefix="test_missing_")) / "nothing"))
    with pytest.raises(ReportNotFound):
        await store.records()


@pytest.mark.anyio
async def test_report_ttl_sqlite_store():
    label = "my_sweep"
    store = MySQLiteReportStore(label, delete_db=True)
    await store.start()
    now = time.time()

    for i in range(3):
        # records written within the TTL accumulate
        with patch("time.time") as mock_time:
            mock_time.return_value = now
            await store.write(RECORDS[i])
            async with aiosqlite.connect(store.db_path) as db:
                assert (await (await db.execute("SELECT count(*) FROM reports")).fetchone())[0] == i + 1

    # a record written after the TTL replaces the stale ones
    with patch("time.time") as mock_time:
        mock_time.return_value = now + store.report_ttl + 1
        await store.write(RECORDS[0])
        async with aiosqlite.connect(store.db_path) as db:
            assert (await (await db.execute("SELECT count(*) FROM reports")).fetchone())[0] == 1


@pytest.mark.anyio
@pytest.mark.parametrize("ReportStore", (MyTempFileReportStore, MySQLiteReportStore))
async def test_version(ReportStore, caplog):
    label = "my_versioned_sweep"
    store = ReportStore(label)
    await store.start()
    await store.write(RECORDS[0])
    prev_version = ReportStore.version
    ReportStore.version = -1
    try:
        store = ReportStore(label)
        await store.start()
        await store.write(RECORDS[1])
    finally:
        ReportStore.version = prev_version
    assert "ReportStore version mismatch" in caplog.text


@pytest.mark.anyio
async def test_report_store_context_manager():
    store = MyTempFileReportStore("my_context_sweep")
    async with store:
        assert store.started.is_set()
        await store.write(RECORDS[2])
        with pytest.raises(RuntimeError):
            async with store:
                pass
    assert await store.records() == [RECORDS[2]]
    with pytest.raises(RuntimeError):
        store.stop()


def test_open_report_store():
    directory = Path(tempfile.mkdtemp(prefix="test_open_"))
    sqlite_store = open_report_store(str(directory / "sweep.db"), label="q4")
    assert isinstance(sqlite_store, SQLiteReportStore)
    assert sqlite_store.db_path == str(directory / "sweep.db")
    assert sqlite_store.label == "q4"
    file_store = open_report_store(str(directory / "sweep.records"))
    assert isinstance(file_store, FileReportStore)
    assert file_store.path == str(directory / "sweep.records")
