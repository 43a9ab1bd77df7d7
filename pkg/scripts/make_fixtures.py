"""Regenerate the committed test fixtures from the scenario specs.

The golden PGM comes from the brute-force oracle path, never from the
bit-packed pipeline, so the golden test compares two independent routes.
"""

from pathlib import Path

from sparq.ingest import serialize_trajectory
from sparq.plot import PlotSpec, render_plot
from sparq.preprocess import load_config
from sparq.testkit import ScenarioSpec, brute_force_contact, generate_scenario

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"
LAG8_SCALE = 4


def main():
    spec = ScenarioSpec.from_json((FIXTURES / "lag8_scenario.json").read_text())
    cfg = load_config(FIXTURES / "lag8.conf")
    contagious, healthy = generate_scenario(spec)
    (FIXTURES / "lag8_contagious.csv").write_bytes(serialize_trajectory(contagious))
    (FIXTURES / "lag8_healthy.csv").write_bytes(serialize_trajectory(healthy))
    oracle = brute_force_contact(contagious, healthy, cfg)
    (FIXTURES / "lag8_combined.pgm").write_bytes(render_plot(oracle, PlotSpec(scale=LAG8_SCALE)))
    print(f"wrote fixtures for n={oracle.n} to {FIXTURES}")


if __name__ == "__main__":
    main()
