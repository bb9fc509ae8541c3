"""
Fixture generation for the command-line front end.

Writes a generic (non-CR) random lift, the CP^2-fiber lift and synthetic A/B
data for the binormal and degenerate classification cases. The binormal A/B
data is synthetic: the binormal lift of the round sphere has vanishing b and
classifies as null-torsion-binormal.
"""
import argparse
import sys
from pathlib import Path

# Add project root to path
sys.path.append(str(Path(__file__).parent.parent))

import numpy as np
import orjson

from config.settings import settings
from src.core.runner import random_lift_fixture
from src.families.constructions import centered_axis, degree_one_line, fiber_curve
from src.invariants.classifier import ABData, ab_to_dict


def binormal_ab(n: int = 9, step: float = 1e-2) -> ABData:
    """Synthetic A = (A1, 0), B = (0, B2) with holomorphic A1, B2: B^T A vanishes, a and b do not."""
    x = centered_axis(n, step)
    z = x[:, None] + 1j * x[None, :]
    A = np.stack([1.0 + 0.5 * z, np.zeros_like(z)], axis=-1)
    B = np.stack([np.zeros_like(z), 0.5 * np.exp(z)], axis=-1)
    return ABData(A=A, B=B, step=(step, step))


def degenerate_ab(n: int = 9, step: float = 1e-2) -> ABData:
    zeros = np.zeros((n, n, 2), dtype=complex)
    return ABData(A=zeros, B=zeros, step=(step, step))


def write_json(path: Path, data: dict):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(orjson.dumps(data))
    print(f"wrote {path}")


def main():
    parser = argparse.ArgumentParser(description='Generate calib7 fixtures')
    parser.add_argument('--out', default='fixtures', help='Output directory')
    parser.add_argument('--seed', type=int, default=settings.sampling.seed)
    args = parser.parse_args()
    out = Path(args.out)

    try:
        random_lift_fixture(str(out / 'random_lift.json'), args.seed)
        print(f"wrote {out / 'random_lift.json'}")
        fiber_curve(np.eye(7)[:, 4], degree_one_line).write_json(str(out / 'fiber_lift.json'))
        print(f"wrote {out / 'fiber_lift.json'}")
        write_json(out / 'binormal_ab.json', ab_to_dict(binormal_ab()))
        write_json(out / 'degenerate_ab.json', ab_to_dict(degenerate_ab()))
    except Exception as e:
        print(f"Error generating fixtures: {e}")
        sys.exit(1)


if __name__ == "__main__":
    main()
