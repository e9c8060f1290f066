"""Database operations for benchmark results."""

import aiosqlite
from datetime import datetime
from typing import Dict, List, Optional
from pathlib import Path
from .models import BenchmarkRecord, BenchmarkRun


class Database:
    """SQLite database handler for benchmark runs."""

    def __init__(self, db_path: str = "./data/benchmarks.db"):
        """Initialize database connection."""
        self.db_path = db_path
        self.db: Optional[aiosqlite.Connection] = None

    async def connect(self):
        """Connect to database and initialize schema."""
        # Ensure data directory exists
        Path(self.db_path).parent.mkdir(parents=True, exist_ok=True)

        self.db = await aiosqlite.connect(self.db_path)
        await self._init_schema()

    async def _init_schema(self):
        """Initialize database schema."""
        await self.db.execute("""
            CREATE TABLE IF NOT EXISTS benchmark_runs (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                started_at DATETIME DEFAULT CURRENT_TIMESTAMP,
                manifest TEXT,
                jobs INTEGER DEFAULT 1
            )
        """)

        await self.db.execute("""
            CREATE TABLE IF NOT EXISTS benchmark_records (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                run_id INTEGER NOT NULL REFERENCES benchmark_runs(id),
                distribution TEXT NOT NULL,
                n_nodes INTEGER NOT NULL,
                ordinal INTEGER NOT NULL,
                label TEXT NOT NULL,
                status TEXT NOT NULL,
                exposure REAL,
                wall_time REAL,
                reference_exposure REAL,
                improvement REAL,
                error TEXT,
                scenario TEXT,
                recorded_at DATETIME DEFAULT CURRENT_TIMESTAMP
            )
        """)

        # Tables created before the scenario column existed
        async with self.db.execute("PRAGMA table_info(benchmark_records)") as cursor:
            columns = {row[1] for row in await cursor.fetchall()}
        if "scenario" not in columns:
            await self.db.execute("ALTER TABLE benchmark_records ADD COLUMN scenario TEXT")

        # Group summaries are per (distribution, n)
        await self.db.execute("""
            CREATE INDEX IF NOT EXISTS idx_records_group
            ON benchmark_records(distribution, n_nodes)
        """)

        await self.db.commit()

    async def start_run(self, manifest: str, jobs: int) -> BenchmarkRun:
        """Create a run row and return it with its id."""
        started_at = datetime.now()
        cursor = await self.db.execute("""
            INSERT INTO benchmark_runs (started_at, manifest, jobs)
            VALUES (?, ?, ?)
        """, (started_at.isoformat(), manifest, jobs))
        await self.db.commit()
        return BenchmarkRun(id=cursor.lastrowid, started_at=started_at, manifest=manifest, jobs=jobs)

    async def log_record(self, run_id: int, record: BenchmarkRecord) -> int:
        """Store one instance outcome; returns the row id."""
        cursor = await self.db.execute("""
            INSERT INTO benchmark_records (
                run_id, distribution, n_nodes, ordinal, label, status,
                exposure, wall_time, reference_exposure, improvement, error, scenario, recorded_at
            )
            VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)
        """, (
            run_id,
            record.distribution,
            record.n_nodes,
            record.ordinal,
            record.label,
            record.status,
            record.exposure,
            record.wall_time,
            record.reference_exposure,
            record.improvement,
            record.error,
            record.scenario,
            (record.recorded_at or datetime.now()).isoformat()
        ))
        await self.db.commit()
        record.id = cursor.lastrowid
        record.run_id = run_id
        return record.id

    async def get_records(self, run_id: int) -> List[BenchmarkRecord]:
        """Records of a run in insertion order."""
        async with self.db.execute("""
            SELECT id, run_id, distribution, n_nodes, ordinal, status, exposure,
                   wall_time, reference_exposure, improvement, error, scenario, recorded_at
            FROM benchmark_records
            WHERE run_id = ?
            ORDER BY id ASC
        """, (run_id,)) as cursor:
            rows = await cursor.fetchall()
            return [
                BenchmarkRecord(
                    id=row[0],
                    run_id=row[1],
                    distribution=row[2],
                    n_nodes=row[3],
                    ordinal=row[4],
                    status=row[5],
                    exposure=row[6],
                    wall_time=row[7],
                    reference_exposure=row[8],
                    improvement=row[9],
                    error=row[10],
                    scenario=row[11],
                    recorded_at=datetime.fromisoformat(row[12]) if row[12] else None
                )
                for row in rows
            ]

    async def get_group_stats(self, run_id: int) -> List[Dict]:
        """
        Per-(distribution, n) counts and mean exposure/improvement of a run.

        The sample standard deviation is computed by the harness, not here;
        SQLite has no built-in for it.
        """
        async with self.db.execute("""
            SELECT
                distribution,
                n_nodes,
                COUNT(*) as instances,
                SUM(CASE WHEN status = 'ok' THEN 1 ELSE 0 END) as solved,
                AVG(exposure) as mean_exposure,
                AVG(improvement) as mean_improvement,
                SUM(wall_time) as total_wall_time
            FROM benchmark_records
            WHERE run_id = ?
            GROUP BY distribution, n_nodes
            ORDER BY distribution, n_nodes
        """, (run_id,)) as cursor:
            rows = await cursor.fetchall()
            return [
                {
                    'distribution': row[0],
                    'n_nodes': row[1],
                    'instances': row[2],
                    'solved': row[3],
                    'mean_exposure': row[4],
                    'mean_improvement': row[5],
                    'total_wall_time': row[6]
                }
                for row in rows
            ]

    async def close(self):
        """Close database connection."""
        if self.db:
            await self.db.close()
