"""Runs every ean command on a tiny configuration and validates the JSON it writes.

usage: validate_artifacts.py <ean binary> <stub evaluator binary> <schema dir>
"""

import json
import pathlib
import subprocess
import sys
import tempfile

import jsonschema

TINY = {
    "stage_sizes": [2, 2],
    "stage_widths": [4, 6],
    "block_hidden": 6,
    "attention_bottleneck": 3,
    "classes": 3,
    "input_dim": 5,
    "train_size": 96,
    "val_size": 30,
    "test_size": 30,
    "pretrain_steps": 30,
    "batch_size": 8,
    "scratch_steps": 20,
    "correlate_schemes": 4,
    "search_steps": 6,
    "ppo_start": 3,
    "reps": 20,
    "timing_runs": 20,
}

SUMMARY_SCHEMA = {
    "pretrain": "pretrain-summary",
    "search": "search-summary",
    "bruteforce": "bruteforce-summary",
    "baseline-random": "baseline-random-summary",
    "baseline-hsp": "baseline-hsp-summary",
}


def main():
    ean, stub, schema_dir = sys.argv[1], sys.argv[2], pathlib.Path(sys.argv[3])
    schemas = {p.name.removesuffix(".schema.json"): json.loads(p.read_text()) for p in schema_dir.glob("*.schema.json")}
    checker = jsonschema.Draft202012Validator.FORMAT_CHECKER

    def validate(doc, name, where):
        jsonschema.Draft202012Validator(schemas[name], format_checker=checker).validate(doc)
        print(f"ok  {where} against {name}")

    with tempfile.TemporaryDirectory() as tmp:
        tmp = pathlib.Path(tmp)
        cfg = tmp / "tiny.json"
        cfg.write_text(json.dumps(TINY))

        def ean_run(out, *args, expect=0):
            cmd = [ean, *args, "--config", str(cfg), "--out", str(tmp / out)]
            code = subprocess.run(cmd, stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL).returncode
            if code != expect:
                sys.exit(f"{' '.join(cmd)} exited {code}, expected {expect}")
            return tmp / out

        runs = [
            ean_run("pretrain", "pretrain"),
            ean_run("search", "search", "--env", "planted", "--m", "6"),
            ean_run("brute", "bruteforce", "--env", "planted", "--m", "5"),
            ean_run("random", "baseline", "random", "--m", "6"),
            ean_run("hsp", "baseline", "hsp", "--m", "6", "--env", "planted"),
            ean_run("bench", "bench"),
            ean_run("corr", "correlate"),
            ean_run("abort", "search", "--env", "external", "--endpoint", f"exec:{stub} --mode exit --after 3",
                    "--m", "6", expect=3),
        ]
        runs.append(ean_run("supernet", "search", "--env", "supernet",
                            "--checkpoint", str(tmp / "pretrain" / "supernet.ckpt")))

        for run in runs:
            manifest = json.loads((run / "manifest.json").read_text())
            validate(manifest, "manifest", f"{run.name}/manifest.json")
            for name in manifest["artifacts"]:
                path = run / name
                if name == "summary.json":
                    validate(json.loads(path.read_text()), SUMMARY_SCHEMA[manifest["command"]], f"{run.name}/{name}")
                elif name == "run.jsonl":
                    for i, line in enumerate(path.read_text().splitlines(), 1):
                        validate(json.loads(line), "run-record", f"{run.name}/{name}:{i}")
                elif name == "state.json":
                    validate(json.loads(path.read_text()), "search-state", f"{run.name}/{name}")
                elif name == "bench.json":
                    validate(json.loads(path.read_text()), "bench", f"{run.name}/{name}")
                elif name == "correlation.json":
                    validate(json.loads(path.read_text()), "correlation", f"{run.name}/{name}")
                elif name == "supernet.ckpt.json":
                    validate(json.loads(path.read_text()), "checkpoint-sidecar", f"{run.name}/{name}")


if __name__ == "__main__":
    main()
