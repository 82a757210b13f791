"""Run `tinydef bench` on a small shape and validate its report and manifest."""
import json
import pathlib
import subprocess
import sys

import jsonschema


def main() -> int:
    exe, schema_path, work = sys.argv[1], sys.argv[2], pathlib.Path(sys.argv[3])
    work.mkdir(parents=True, exist_ok=True)
    proc = subprocess.run(
        [exe, "--out", str(work), "bench", "--shapes", "2,3,8,8;1,4,5,7,2", "--reps", "20"],
        capture_output=True, text=True, check=False)
    if proc.returncode != 0:
        print(proc.stderr)
        print(f"bench exited with {proc.returncode}")
        return 1
    report = json.loads(proc.stdout)
    schema = json.loads(pathlib.Path(schema_path).read_text())
    jsonschema.validate(report, schema)
    manifest = json.loads((work / "run-manifest.json").read_text())
    jsonschema.validate(manifest["report"], schema)
    if manifest["command"] != "bench" or manifest["exit_code"] != 0:
        print("manifest does not describe the bench run")
        return 1
    print("bench report matches schema")
    return 0


if __name__ == "__main__":
    sys.exit(main())
