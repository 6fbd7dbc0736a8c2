"""Smoke test for the bautin_dde extension module.

Build first, then run from the repository root:

    cargo build --release -p bautin-py
    cp target/release/libbautin_dde.so python/bautin_dde.so
    python3 python/smoke_test.py
"""

import json
import math
import pathlib
import sys

HERE = pathlib.Path(__file__).resolve().parent
ROOT = HERE.parent
sys.path.insert(0, str(HERE))

import bautin_dde as bd  # noqa: E402


def close(a, b, tol):
    return abs(a - b) <= tol


def check_wright():
    sys_ = bd.System.wright()
    assert sys_.n == 1 and sys_.delay == 1.0
    roots = sys_.roots((0.0, 0.0))
    lead, mult = roots[0]
    assert mult == 1
    assert close(lead.real, 0.0, 1e-10) and close(lead.imag, math.pi / 2, 1e-10)
    assert abs(sys_.char_det((0.0, 0.0), lead)) < 1e-10

    h1 = sys_.check_h1((0.0, 0.0))
    assert h1["holds"], h1

    hp = sys_.hopf_point((0.0, 0.0), order=3)
    assert close(hp.l1, -0.21413, 5e-5), hp.l1
    assert hp.l2 is None
    # F20 = iπ for Wright, g20 = F20/(1 + iπ/2)
    assert abs(hp.g(2, 0) - 1j * math.pi / (1 + 1j * math.pi / 2)) < 1e-9

    try:
        sys_.find_bautin((0.0, 0.0), max_iter=3)
    except bd.NumericalError as e:
        stage, _ = e.args
        assert stage == "normalform"
    else:
        raise AssertionError("Wright has no Bautin point")


def check_golden():
    sys_ = bd.System.load(ROOT / "systems" / "golden.json")
    hp = sys_.hopf_point((0.01, -0.25))
    assert close(hp.l1, -0.25, 1e-9) and close(hp.l2, 1.0, 1e-8)
    assert all(close(a, b, 1e-12) for a, b in zip(hp.nu, (0.01, -0.25)))
    coeffs = dict(hp.coefficients())
    assert close(coeffs[(3, 2)].real, 12.0, 1e-8)

    beta = bd.beta(hp.nu, hp.l2)
    region, amps = bd.classify(beta)
    assert region == "TwoCycles"
    assert close(amps[0], math.sqrt(0.05), 1e-9) and close(amps[1], math.sqrt(0.2), 1e-9)
    assert [round(x, 9) for x in bd.radial_roots(0.01, -0.25, 1.0)] == [round(math.sqrt(0.05), 9), round(math.sqrt(0.2), 9)]

    found = sys_.find_bautin((0.05, -0.03))
    assert close(found["alpha0"]["alpha1"], 0.0, 1e-8) and close(found["alpha0"]["alpha2"], 0.0, 1e-8)
    h2 = sys_.check_h2((0.0, 0.0))
    assert h2["holds"] and close(h2["det"], 1.0, 1e-6)

    t, x, z = sys_.simulate((0.01, -0.25), 2.0, h=0.05)
    assert len(t) == len(x) == len(z) == 41
    assert close(abs(z[0]), 0.1, 1e-9)

    report = sys_.report((0.01, -0.25), mode="verify")
    assert report["bautin_bifurcation"] is True
    assert report["simulation"]["agreement"] is True
    json.dumps(report)

    try:
        import jsonschema
    except ImportError:
        print("jsonschema not installed; schema check skipped")
    else:
        schema = json.loads((ROOT / "docs" / "report.schema.json").read_text())
        jsonschema.validate(report, schema)


def check_errors():
    try:
        bd.System.from_json('{"n": 1}')
    except bd.ConfigError:
        pass
    else:
        raise AssertionError("missing fields must be rejected")
    try:
        bd.System.hayes(1.0).hopf_point((0.0, 0.0))
    except bd.NumericalError as e:
        assert e.args[0] in ("spectrum", "normalform"), e.args
    else:
        raise AssertionError("a stable scalar system has no critical pair")
    assert issubclass(bd.ConfigError, bd.BautinError)


def main():
    check_wright()
    check_golden()
    check_errors()
    print(f"bautin_dde {bd.__version__}: smoke test passed")


if __name__ == "__main__":
    main()
