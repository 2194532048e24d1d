import argparse
import time

import pandas as pd
import yaml
from path import Path

COLUMNS = ["experiment", "seed", "passed", "instances", "seconds"]


def _run_info(summary_path: Path, group_dir: Path) -> dict:
    # results/<group>/experiment=<name>/seed=<seed>/summary.yaml
    info = {}
    for part in summary_path.parent.relpath(group_dir).splitall():
        if "=" in part:
            key, value = part.split("=", 1)
            info[key] = value
    return info


def collect(group_dir: Path) -> pd.DataFrame:
    rows = []
    if not group_dir.isdir():
        return pd.DataFrame(columns=COLUMNS)
    for summary_path in sorted(group_dir.walkfiles("summary.yaml")):
        with open(summary_path) as f:
            summary = yaml.safe_load(f)
        row = _run_info(summary_path, group_dir)
        row.update({k: v for k, v in summary.items() if not isinstance(v, dict)})
        rows.append(row)
    if not rows:
        return pd.DataFrame(columns=COLUMNS)
    frame = pd.DataFrame(rows)
    ordered = [c for c in COLUMNS if c in frame.columns]
    rest = sorted(c for c in frame.columns if c not in ordered)
    return frame[ordered + rest].sort_values(ordered[:2]).reset_index(drop=True)


def tabulate(args):
    starttime = time.time()

    BASE_PATH = Path(__file__).parent / "../.."
    if args.base_path is not None:
        BASE_PATH = Path(args.base_path)
    group_dir = BASE_PATH / "results" / args.experiment_group
    output_dir = BASE_PATH / "tables" / args.experiment_group
    output_dir.makedirs_p()

    print(
        f"[{time.strftime('%H:%M:%S', time.localtime())}] "
        f"Collecting summaries under {group_dir}"
    )
    frame = collect(group_dir)
    output_file = output_dir / args.filename
    frame.to_csv(output_file, index=False)
    print(frame.to_string(index=False))
    print(
        f"[{time.strftime('%H:%M:%S', time.localtime())}] "
        f"Saved {len(frame)} runs to {output_file} ({time.time() - starttime:.2f}s)"
    )
    return frame


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="dirreg summary tables")
    parser.add_argument("--base_path", type=str, default=None)
    parser.add_argument("--experiment_group", type=str, required=True)
    parser.add_argument("--filename", type=str, default="summary.csv")
    args = parser.parse_args()  # pylint: disable=redefined-outer-name
    tabulate(args)
