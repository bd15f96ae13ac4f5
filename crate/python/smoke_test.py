"""Smoke test for the pg3py extension.

Uses an installed pg3py if there is one (e.g. after `maturin develop` in crates/py),
otherwise loads the library cargo left in target/.
"""

import importlib.machinery
import importlib.util
import math
import pathlib
import sys

ROOT = pathlib.Path(__file__).resolve().parents[1]


def load():
    try:
        import pg3py

        return pg3py
    except ImportError:
        pass
    for profile in ("release", "debug"):
        lib = ROOT / "target" / profile / "libpg3py.so"
        if lib.exists():
            loader = importlib.machinery.ExtensionFileLoader("pg3py", str(lib))
            spec = importlib.util.spec_from_file_location("pg3py", lib, loader=loader)
            module = importlib.util.module_from_spec(spec)
            loader.exec_module(module)
            return module
    sys.exit("pg3py not found: run `cargo build -p pg3-py` first")


def close(a, b, tol=1e-9):
    return all(abs(x - y) <= tol for x, y in zip(a, b))


def up_to_sign(a, b, tol=1e-9):
    return close(a, b, tol) or close(a, [-x for x in b], tol)


def main():
    pg = load()
    e = [[1.0 if i == j else 0.0 for j in range(4)] for i in range(4)]

    l = pg.Line(e[0], e[1])
    assert up_to_sign(l.plucker, [1, 0, 0, 0, 0, 0])
    m = pg.clifford_parallel(pg.ProjPoint(e[2]), l)
    assert up_to_sign(m.plucker, [0, 0, 0, 1, 0, 0])
    assert pg.is_clifford_parallel(l, m)
    assert l.meet(m) is None
    p = l.meet(pg.Line(e[0], e[2]))
    assert up_to_sign(p.coords, e[0])

    r = pg.classify([[0, 0, 0, 0], [0, 1, 0, 0], [0, 0, 2, 0], [0, 0, 0, 3]])
    assert r["case"] == "c5"
    assert (r["params"]["b"], r["params"]["c"], r["params"]["d"]) == (1.0, 2.0, 3.0)

    flow = pg.Flow("c5", b=1, c=2, d=3)
    g = flow.gamma(math.log(2))
    top = max(abs(x) for row in g.matrix for x in row)
    diag = [g.matrix[i][i] / top for i in range(4)]
    assert close(diag, [0.125, 0.25, 0.5, 1.0], 1e-12)
    assert g.then(flow.gamma(1.0)).distance(flow.gamma(1.0 + math.log(2))) < 1e-12

    lim = flow.limit(pg.Line([1, 1, 0, 0], [0, 0, 1, 1]))
    assert lim["converged"]
    assert up_to_sign(lim["limit"]["plucker"], [0, 0, 0, 0, 1, 0])

    report = pg.replay("c5", b=1, c=2, d=3, samples=100, seed=7)
    assert report["passed"] and report["passes"] == 100
    assert pg.spread_audit(samples=200, seed=1)["violations"] == []
    assert pg.spread_audit(samples=200, seed=1, mutated=True)["violations"]

    try:
        pg.replay("a1", a=1, b=0, c=2)
    except ValueError as err:
        assert "precondition" in str(err)
    else:
        raise AssertionError("b = 0 must be rejected")

    try:
        pg.ProjPoint([0, 0, 0, 0])
    except ValueError:
        pass
    else:
        raise AssertionError("zero vector must be rejected")

    print("pg3py smoke test: ok")


if __name__ == "__main__":
    main()
