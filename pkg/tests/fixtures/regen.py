"""Regenerate the frozen oracle reference values.

Run from the repository root:

    python3 tests/fixtures/regen.py

Every number in the fixture files is produced by the deterministic
oracles, never typed in by hand.
"""
import json
import pathlib

from idmc.models.infection import default_infection_params, infection_posterior_oracle

HERE = pathlib.Path(__file__).parent


def main():
    p = default_infection_params()
    out = {
        "t_obs": 3.0,
        "posterior_x0": infection_posterior_oracle(p, 3.0),
    }
    path = HERE / "infection_posterior_t3.json"
    path.write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
