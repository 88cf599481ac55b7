"""Compare the compiled and numpy FEM kernels on the Test Case 1 mesh.

    python benchmarks/bench_kernels.py [--repeat N] [--nx 41 --ny 7]

Prints per-call timings for assembly, stress recovery and the Weibull sum,
the time of one full objective evaluation with each backend, and the
largest relative difference between the two backends' outputs.
"""
from __future__ import annotations

import argparse
import importlib
import timeit

import numpy as np

from paretotrace.shape_fem import ShapeGeometry, build_mesh, test_case_1
from paretotrace.shape_fem import _kernels_py
from paretotrace.shape_fem import fem


def load_compiled():
    try:
        return importlib.import_module("paretotrace.shape_fem._kernels_c")
    except ImportError:
        return None


def kernel_inputs(nx, ny):
    problem = test_case_1()
    geom = ShapeGeometry(nx=nx, ny=ny)
    mesh = build_mesh(geom)
    state = fem.solve_state(geom, problem.material, mesh)
    mat = problem.material
    return mesh, state, mat


def bench(fn, repeat):
    timer = timeit.Timer(fn)
    number, _ = timer.autorange()
    best = min(timer.repeat(repeat=repeat, number=number)) / number
    return best


def rel_diff(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    scale = max(np.abs(a).max(), np.abs(b).max(), np.finfo(float).tiny)
    return float(np.abs(a - b).max() / scale)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--nx", type=int, default=41)
    parser.add_argument("--ny", type=int, default=7)
    args = parser.parse_args(argv)

    compiled = load_compiled()
    mesh, state, mat = kernel_inputs(args.nx, args.ny)
    nodes, tris = mesh.nodes, mesh.elements
    lam, mu = mat.lame_lambda, mat.lame_mu
    ndof, skip, bw = 2 * mesh.n_nodes, state.n_fixed, state.bandwidth
    u, stress, areas = state.displacement, state.stress, state.areas
    m = float(mat.weibull_modulus)

    cases = {
        "triangle_areas": lambda k: k.triangle_areas(nodes, tris),
        "assemble_banded": lambda k: k.assemble_banded(nodes, tris, lam, mu, skip, bw, ndof),
        "element_stress": lambda k: k.element_stress(nodes, tris, u, lam, mu),
        "weibull_sum": lambda k: k.weibull_sum(stress, areas, mat.sigma0, m, 64),
    }
    backends = [("numpy", _kernels_py)]
    if compiled is not None:
        backends.append(("cython", compiled))
    else:
        print("compiled kernels unavailable; timing the numpy backend only")

    print(f"mesh {args.nx}x{args.ny}: {mesh.n_nodes} nodes, {tris.shape[0]} triangles")
    header = f"{'kernel':<18}" + "".join(f"{name:>14}" for name, _ in backends)
    if compiled is not None:
        header += f"{'speedup':>10}{'rel diff':>12}"
    print(header)
    for label, call in cases.items():
        times = [bench(lambda k=k: call(k), args.repeat) for _, k in backends]
        line = f"{label:<18}" + "".join(f"{t * 1e6:>11.1f} us" for t in times)
        if compiled is not None:
            diff = rel_diff(call(_kernels_py), call(compiled))
            line += f"{times[0] / times[1]:>9.1f}x{diff:>12.1e}"
        print(line)

    problem = test_case_1()
    x = problem.geometry.design.copy()
    for name, k in backends:
        fem.kernels.use_backend(k)
        geom = problem.geometry_at(x)
        t = bench(lambda: fem.weibull_intensity(fem.solve_state(geom, problem.material),
                                                problem.material), args.repeat)
        print(f"full objective evaluation ({name}): {t * 1e3:.3f} ms")
    fem.kernels.use_backend(None)


if __name__ == "__main__":
    main()
