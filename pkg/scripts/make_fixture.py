"""Regenerate the bundled regression fixture and its golden emission log.

Run from the repository root:

    python3 scripts/make_fixture.py

The fixture is a 60 s synthetic stream (5 segments of 12 s, d=16, 2 FPS,
noise 0.03, fixed seed). The golden log is the emission output of

    evseg segment --profile paper-defaults --input tests/data/fixture_60s.evst

captured once and committed. Regenerating should be byte-identical unless the
engine's arithmetic deliberately changed; in that case the golden moves with
the change and the diff documents it.
"""

import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from evseg.cli import main  # noqa: E402
from evseg.harness import SynthSpec, generate_stream  # noqa: E402
from evseg.stream import write_binary  # noqa: E402

DATA = pathlib.Path(__file__).resolve().parents[1] / "tests" / "data"

SPEC = SynthSpec(
    d=16,
    segments=((12.0, 101), (12.0, 202), (12.0, 303), (12.0, 404), (12.0, 505)),
    noise_sigma=0.03,
    fps=2.0,
    seed=60,
)


def main_():
    DATA.mkdir(parents=True, exist_ok=True)
    fixture = DATA / "fixture_60s.evst"
    golden = DATA / "golden_emissions.jsonl"
    with open(fixture, "wb") as fp:
        n = write_binary(generate_stream(SPEC), fp)
    print(f"wrote {fixture} ({n} frames)")
    rc = main(
        [
            "segment",
            "--profile",
            "paper-defaults",
            "--input",
            str(fixture),
            "--emissions-out",
            str(golden),
        ]
    )
    if rc != 0:
        raise SystemExit(rc)
    print(f"wrote {golden} ({len(golden.read_text().splitlines())} emissions)")


if __name__ == "__main__":
    main_()
