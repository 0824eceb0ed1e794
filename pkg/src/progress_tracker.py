import os
import json
from typing import Dict, List, Optional
from datetime import datetime
import logging
from dotenv import load_dotenv

load_dotenv()


def run_key(scenario_name: str, seed: int, variant: str = "") -> str:
    """Key of one run; the variant tells apart runs of other lengths"""
    key = f"{scenario_name}@{seed}"
    return f"{key}/{variant}" if variant else key


class ProgressTracker:
    """Tracks completed scenario runs and enables resume capability"""

    def __init__(self, progress_file: str = "progress.json"):
        self.progress_file = progress_file
        self.logger = logging.getLogger(__name__)
        self.progress_data = self._load_progress()

    def _empty_progress(self) -> Dict:
        return {
            "completed_runs": {},
            "runs_completed": 0,
            "session_runs": 0,
            "last_run_time": None,
            "session_id": None,
            "session_start": None,
            "errors": [],
        }

    def _load_progress(self) -> Dict:
        """Load progress from file"""
        try:
            if os.path.exists(self.progress_file):
                with open(self.progress_file, "r") as f:
                    data = json.load(f)
                progress = self._empty_progress()
                progress.update(data)
                return progress
        except (json.JSONDecodeError, FileNotFoundError) as e:
            self.logger.warning(f"Could not load progress file: {e}")

        return self._empty_progress()

    def _save_progress(self):
        """Save progress to file"""
        try:
            directory = os.path.dirname(self.progress_file)
            if directory:
                os.makedirs(directory, exist_ok=True)
            with open(self.progress_file, "w") as f:
                json.dump(self.progress_data, f, indent=2, default=str)
        except Exception as e:
            self.logger.error(f"Could not save progress: {e}")

    def start_session(self) -> str:
        """Start a new tracking session"""
        session_id = datetime.utcnow().strftime("%Y%m%d_%H%M%S")
        self.progress_data["session_id"] = session_id
        self.progress_data["session_start"] = datetime.utcnow().isoformat()
        self.progress_data["session_runs"] = 0
        self._save_progress()
        return session_id

    def is_completed(self, scenario_name: str, seed: int, variant: str = "") -> bool:
        return run_key(scenario_name, seed, variant) in self.progress_data["completed_runs"]

    def completed_result(self, scenario_name: str, seed: int, variant: str = "") -> Optional[Dict]:
        return self.progress_data["completed_runs"].get(run_key(scenario_name, seed, variant))

    def pending_runs(self, runs: List[tuple], variant: str = "") -> List[tuple]:
        """Filter (scenario_name, seed, ...) tuples down to the ones not yet completed"""
        return [run for run in runs if not self.is_completed(run[0], run[1], variant)]

    def mark_completed(self, scenario_name: str, seed: int, files: Dict[str, str], variant: str = ""):
        """Record a finished run and the result files it wrote"""
        self.progress_data["completed_runs"][run_key(scenario_name, seed, variant)] = files
        self.progress_data["runs_completed"] = len(self.progress_data["completed_runs"])
        self.progress_data["session_runs"] = self.progress_data.get("session_runs", 0) + 1
        self.progress_data["last_run_time"] = datetime.utcnow().isoformat()
        self._save_progress()

        self.logger.info(
            f"Progress updated: {self.progress_data['runs_completed']} runs completed, "
            f"last: {scenario_name} seed {seed}"
        )

    def log_error(self, error: str, scenario_name: str, seed: int):
        """Log an error for one run"""
        error_entry = {
            "timestamp": datetime.utcnow().isoformat(),
            "error": str(error),
            "scenario": scenario_name,
            "seed": seed,
        }

        if "errors" not in self.progress_data:
            self.progress_data["errors"] = []

        self.progress_data["errors"].append(error_entry)
        self._save_progress()

    def get_statistics(self) -> Dict:
        """Get processing statistics"""
        return {
            "runs_completed": self.progress_data.get("runs_completed", 0),
            "session_id": self.progress_data.get("session_id"),
            "session_start": self.progress_data.get("session_start"),
            "last_run_time": self.progress_data.get("last_run_time"),
            "error_count": len(self.progress_data.get("errors", [])),
        }

    def reset_progress(self):
        """Reset progress tracking"""
        self.progress_data = self._empty_progress()
        self._save_progress()
        self.logger.info("Progress tracking reset")

    def calculate_eta(self, remaining: int) -> Optional[str]:
        """Calculate estimated time to completion from the last session's pace"""
        if not self.progress_data.get("session_start") or not self.progress_data.get("last_run_time"):
            return None

        try:
            start_time = datetime.fromisoformat(self.progress_data["session_start"])
            last_run = datetime.fromisoformat(self.progress_data["last_run_time"])
            elapsed = (last_run - start_time).total_seconds()

            processed = self.progress_data.get("session_runs", 0)

            if processed == 0 or elapsed <= 0:
                return None

            rate = processed / elapsed  # runs per second
            eta_seconds = remaining / rate

            minutes = int(eta_seconds // 60)
            secs = int(eta_seconds % 60)

            return f"{minutes}m {secs}s"

        except (ValueError, ZeroDivisionError):
            return None
