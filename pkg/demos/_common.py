from pathlib import Path

PROBLEMS = Path(__file__).resolve().parent.parent / "problems"
