"""Command-line front end: ``isoradial <subcommand> ...``.

Exit codes: 0 success, 1 validation failure, 2 numerical tolerance
failure, 64 usage error. Every output file embeds a run manifest and is
written atomically (temporary file plus rename).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .errors import GraphError, IsoradialError
from .lattice import (
    BUILTINS,
    COMBINATORIAL,
    PERMISSIVE,
    STRICT,
    build_graph,
    generate,
    read_document,
    superpose,
    validate_zigzag,
    write_document,
)

EXIT_OK, EXIT_INVALID, EXIT_TOLERANCE, EXIT_USAGE = 0, 1, 2, 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


# ---------------------------------------------------------------------------
# I/O helpers


def atomic_write(path, data):
    """Write text or bytes to ``path`` through a temporary file in the same directory."""
    path = os.path.abspath(path)
    d = os.path.dirname(path)
    os.makedirs(d, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": ""})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class Run:
    """Collects the manifest of one invocation."""

    def __init__(self, argv, args):
        self.argv = list(argv)
        self.args = args
        self.start = time.perf_counter()
        self.graph_hash = None
        self.tolerances = {}

    def manifest(self):
        return {
            "command": self.argv,
            "graph_hash": self.graph_hash,
            "tool_version": __version__,
            "tolerances": self.tolerances,
            "wall_time": round(time.perf_counter() - self.start, 6),
        }

    # outputs -----------------------------------------------------------
    def emit_json(self, payload, out):
        doc = dict(payload)
        doc["manifest"] = self.manifest()
        text = json.dumps(doc, indent=1, sort_keys=True) + "\n"
        self._emit(text, out)

    def emit_csv(self, header, rows, out):
        buf = io.StringIO()
        buf.write("# manifest: " + json.dumps(self.manifest(), sort_keys=True) + "\n")
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(header)
        for r in rows:
            wr.writerow([_cell(x) for x in r])
        self._emit(buf.getvalue(), out)

    def emit_svg(self, text, out):
        comment = "<!-- manifest: " + json.dumps(self.manifest(), sort_keys=True).replace("--", "- -") + " -->\n"
        head, _, rest = text.partition("\n")
        self._emit(head + "\n" + comment + rest, out)

    def _emit(self, text, out):
        if out in (None, "-"):
            sys.stdout.write(text)
        else:
            atomic_write(out, text)

    def plot_path(self, out):
        if not getattr(self.args, "plot", False):
            return None
        if out in (None, "-"):
            raise UsageError("--plot needs --out")
        return os.path.splitext(out)[0] + ".png"


def _cell(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return x


def _inst(text):
    try:
        parts = [int(p) for p in text.split(":")]
    except ValueError:
        raise UsageError(f"instance {text!r} is not of the form tid:a:b") from None
    if len(parts) == 1:
        parts += [0, 0]
    if len(parts) != 3:
        raise UsageError(f"instance {text!r} is not of the form tid:a:b")
    return tuple(parts)


def _fmt_inst(inst):
    return "{}:{}:{}".format(*inst)


def load_graph(path, mode=STRICT):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    doc = read_document(text)
    if "parent" in doc:
        # superpositions are rebuilt from the parent so roles and sources are known
        return superpose(build_graph(doc["parent"], mode=mode))
    return build_graph(doc, mode=mode)


def _graph(run, args):
    if not args.graph:
        raise UsageError("--graph is required")
    g = load_graph(args.graph)
    run.graph_hash = g.digest()
    return g


def _first(g, color):
    for t in range(g.n_vertices):
        if color is None or g.colors[t] == color:
            return (t, 0, 0)
    raise GraphError(f"graph has no {color} vertex")


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen(run, args):
    g = generate(args.lattice, args.theta)
    doc = g.to_document()
    if args.superpose:
        gd = superpose(g)
        parent = doc
        doc = gd.to_document()
        doc["parent"] = parent
        g = gd
    run.graph_hash = g.digest()
    text = write_document(doc)
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        atomic_write(args.out, text)
    p = run.plot_path(args.out)
    if p:
        from .plotting import plot_graph

        plot_graph(g, p, radius=args.radius or 4.0)
    return EXIT_OK


def cmd_validate(run, args):
    mode = {"strict": STRICT, "permissive": PERMISSIVE, "combinatorial": COMBINATORIAL}[args.mode]
    path = args.path or args.graph
    if not path:
        raise UsageError("validate needs a graph file")
    g = load_graph(path, mode=mode)
    run.graph_hash = g.digest()
    zz = validate_zigzag(g, args.radius or 6.0)
    report = {
        "valid": not zz,
        "n_vertices": g.n_vertices,
        "n_faces": g.n_faces,
        "n_edges": g.n_edges,
        "bipartite": g.bipartite,
        "theta": [float(t) for t in g.theta],
        "zigzag_violations": zz,
    }
    run.emit_json(report, args.out)
    if zz:
        sys.stderr.write(f"zig-zag condition fails: {zz[0]}\n")
        return EXIT_INVALID
    return EXIT_OK


def cmd_kernel(run, args):
    from .kernels import dbar_inverse, green

    g = _graph(run, args)
    radius = args.radius or 6.0
    method = args.method
    if args.which == "dbar-inv":
        base = _inst(args.base) if args.base else _first(g, "W")
        targets = g.instances_within(g.position(base), radius, "black")

        def one(b):
            return dbar_inverse(g, base, b, method=method), (
                dbar_inverse(g, base, b, method="quadrature") if args.cross_check else None)
    else:
        base = _inst(args.base) if args.base else (0, 0, 0)
        targets = g.instances_within(g.position(base), radius, "all")

        def one(v):
            return green(g, base, v, method=method), (
                green(g, base, v, method="quadrature") if args.cross_check and v != base else None)

    with ThreadPoolExecutor(max_workers=max(1, args.threads or os.cpu_count() or 1)) as ex:
        results = list(ex.map(one, targets))
    rows, worst, plot_rows = [], 0.0, []
    for v, (kv, other) in zip(targets, results):
        val = complex(kv.value)
        resid = abs(val - complex(other.value)) if other is not None else float("nan")
        if other is not None:
            worst = max(worst, resid)
        rows.append([v[0], v[1], v[2], val.real, val.imag, abs(val), resid])
        plot_rows.append((abs(g.position(v) - g.position(base)), val))
    tol = args.tol if args.tol is not None else 1e-8
    run.tolerances = {"cross_check": tol}
    run.emit_csv(["b_id", "offset_u", "offset_v", "re", "im", "abs", "method_residual"], rows, args.out)
    p = run.plot_path(args.out)
    if p:
        from .plotting import plot_green, plot_kernel

        if args.which == "dbar-inv":
            plot_kernel(plot_rows, p, title="dbar inverse")
        else:
            plot_green([r for r in plot_rows if r[0] > 0], p)
    if args.cross_check and worst > tol:
        sys.stderr.write(f"residue and quadrature differ by {worst:.3g}\n")
        return EXIT_TOLERANCE
    return EXIT_OK


def _thermo_payload(g, model):
    from .thermo import thermo_report

    rep = thermo_report(g, model)
    return rep, rep.to_dict()


def cmd_detlog(run, args):
    g = _graph(run, args)
    rep, payload = _thermo_payload(g, args.model)
    run.tolerances = {"identities": args.tol if args.tol is not None else 1e-12}
    run.emit_json(payload, args.out)
    return _thermo_finish(run, args, rep)


def cmd_thermo(run, args):
    return cmd_detlog(run, args)


def _thermo_finish(run, args, rep):
    p = run.plot_path(args.out)
    if p:
        from .plotting import plot_thermo

        plot_thermo(rep, p)
    tol = run.tolerances["identities"]
    if any(abs(r) > tol for r in rep.identity_residuals):
        sys.stderr.write(f"identity residuals {rep.identity_residuals} exceed {tol}\n")
        return EXIT_TOLERANCE
    return EXIT_OK


def cmd_oracle(run, args):
    from .thermo import _bloch_matrices, bloch_logdet1, logdet1_dimer, logdet1_tree

    g = _graph(run, args)
    grid = args.grid or 256
    bloch = bloch_logdet1(g, args.model, grid=grid)
    closed = logdet1_dimer(g) if args.model == "dimer" else logdet1_tree(g)
    tol = args.tol if args.tol is not None else (1e-4 if args.model == "dimer" else 1e-3)
    run.tolerances = {"bloch_vs_closed_form": tol}
    diff = abs(bloch - closed)
    run.emit_json({"model": args.model, "grid": grid, "bloch": bloch, "closed_form": closed,
                   "difference": diff}, args.out)
    p = run.plot_path(args.out)
    if p:
        from .plotting import plot_bloch

        n = 64
        pts = (np.arange(n) + 0.5) / n
        vals = np.array([np.linalg.slogdet(_bloch_matrices(g, args.model, np.full(n, s), pts))[1]
                         for s in pts]).T
        plot_bloch(vals, p)
    return EXIT_OK if diff <= tol else EXIT_TOLERANCE


def cmd_finite(run, args):
    from .kasteleyn import (
        box_polygon,
        check_flatness,
        cut_subgraph,
        local_stats,
        log_partition_function,
        partition_function,
        square_box,
    )

    g = _graph(run, args)
    if args.polygon:
        poly = [complex(*p) for p in json.loads(args.polygon)]
        s = cut_subgraph(g, poly)
    elif args.box:
        s = square_box(g, args.box) if g.n_vertices == 2 and len(g.directions) == 4 else \
            cut_subgraph(g, box_polygon(0j, args.box))
    else:
        raise UsageError("finite needs --box N or --polygon JSON")
    if args.edges:
        pairs = [(tuple(w), tuple(b)) for w, b in json.loads(args.edges)]
    else:
        pairs = [(s.whites[i], s.blacks[j]) for i, j, _ in s.edges]
    z = partition_function(s)
    rows = [["Z", "", "", z], ["logZ", "", "", log_partition_function(s)]]
    probs = []
    if z > 0:
        for w, b in pairs:
            pr = local_stats(s, [(w, b)])
            probs.append(pr)
            rows.append(["edge", _fmt_inst(w), _fmt_inst(b), pr])
    flat = check_flatness(s)
    rows.append(["flatness", "", "", flat])
    tol = args.tol if args.tol is not None else 1e-10
    run.tolerances = {"flatness": tol}
    run.emit_csv(["kind", "w_id", "b_id", "value"], rows, args.out)
    p = run.plot_path(args.out)
    if p and probs:
        from .plotting import plot_edges

        plot_edges([(g.position(w), g.position(b)) for w, b in pairs], probs, p)
    return EXIT_OK if flat <= tol else EXIT_TOLERANCE


def cmd_optimize(run, args):
    from .optimize import maximize, random_feasible

    g = _graph(run, args)
    starts = [None] if not args.starts else random_feasible(g, args.starts, model=args.model)
    runs = [maximize(g, args.model, start=s) for s in starts]
    theta, val, cert = max(runs, key=lambda r: r[1])
    spread = max((float(np.max(np.abs(r[0] - theta))) for r in runs), default=0.0)
    payload = {
        "angles": [float(t) for t in theta],
        "objective": val,
        "grad_norm": cert.grad_norm,
        "iterations": cert.iterations,
        "certificate": cert.to_dict(),
        "starts": len(starts),
        "start_spread": spread,
    }
    run.tolerances = {"grad_norm": 1e-10}
    run.emit_json(payload, args.out)
    p = run.plot_path(args.out)
    if p:
        from .plotting import plot_history

        plot_history(cert.history, p)
    return EXIT_OK


def _measure(args):
    from .daf import AtomicMeasure

    if not args.measure:
        raise UsageError("--measure is required")
    text = args.measure
    if os.path.exists(text):
        with open(text, encoding="utf-8") as fh:
            text = fh.read()
    try:
        return AtomicMeasure.from_json(text)
    except (ValueError, IndexError, TypeError) as exc:
        raise UsageError(f"bad measure: {exc}") from None


def cmd_daf(run, args):
    from .daf import convolve_analytic, convolve_harmonic

    g = _graph(run, args)
    m = _measure(args)
    radius = args.radius or 8.0
    if args.harmonic:
        base = _inst(args.base) if args.base else (0, 0, 0)
        res = convolve_harmonic(g, base, m, radius)
    else:
        base = _inst(args.base) if args.base else _first(g, "W")
        res = convolve_analytic(g, base, m, radius)
    tol = args.tol if args.tol is not None else 1e-9
    run.tolerances = {"relative_residual": tol}
    rows = [[v[0], v[1], v[2], z.real, z.imag] for v, z in sorted(res.values.items())]
    rows.append(["residual", "", "", res.residual, res.relative_residual])
    run.emit_csv(["id", "offset_u", "offset_v", "re", "im"], rows, args.out)
    p = run.plot_path(args.out)
    if p:
        from .plotting import plot_values

        keys = sorted(res.values)
        plot_values([g.position(v) for v in keys], [res.values[v] for v in keys], p)
    return EXIT_OK if res.relative_residual <= tol else EXIT_TOLERANCE


def cmd_perturb(run, args):
    from .daf import convolve_analytic, dbar_inverse_values, perturb_embedding, render_svg

    g = _graph(run, args)
    radius = args.radius or 6.0
    base = _inst(args.base) if args.base else _first(g, "W")
    singular = None
    if args.dbar_inv:
        values = dbar_inverse_values(g, base, radius + 2)
        singular = base
    elif args.measure:
        values = convolve_analytic(g, base, _measure(args), radius + 2).values
    else:
        values = None
    p = perturb_embedding(g, values, args.epsilon, radius=radius, singular=singular,
                          windings=args.windings)
    svg = render_svg(p)
    tol = args.tol if args.tol is not None else 1e-9
    run.tolerances = {"closure": tol}
    if args.format == "json":
        run.emit_json({"epsilon": p.epsilon, "max_defect": p.max_defect(),
                       "singular_defect": p.white_defects.get(singular) if singular else None,
                       "stitch_defect": p.stitch_defect,
                       "holonomy": [p.holonomy.real, p.holonomy.imag],
                       "faces": len(p.black_polygons) + len(p.white_polygons)}, args.out)
    else:
        run.emit_svg(svg, args.out)
    pp = run.plot_path(args.out)
    if pp:
        from .plotting import plot_embedding

        plot_embedding(p, pp)
    return EXIT_OK if p.max_defect() <= tol else EXIT_TOLERANCE


# ---------------------------------------------------------------------------
# parser


def _common(p):
    p.add_argument("--graph", help="graph document (JSON)")
    p.add_argument("--out", help="output file (default stdout)")
    p.add_argument("--format", choices=["json", "csv", "svg"])
    p.add_argument("--radius", type=float)
    p.add_argument("--grid", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--threads", type=int)
    p.add_argument("--model", choices=["dimer", "tree"], default="dimer")
    p.add_argument("--plot", action="store_true", help="also write a PNG next to --out")


def build_parser():
    parser = _Parser(prog="isoradial", description="Discrete complex analysis on critical graphs.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("gen", help="write a built-in graph")
    _common(p)
    p.add_argument("--lattice", choices=BUILTINS, required=True)
    p.add_argument("--theta", type=float)
    p.add_argument("--superpose", action="store_true")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("validate", help="check a graph document")
    _common(p)
    p.add_argument("path", nargs="?")
    p.add_argument("--mode", choices=["strict", "permissive", "combinatorial"], default="strict")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("kernel", help="dbar inverse or Green's function on a window")
    _common(p)
    p.add_argument("which", choices=["dbar-inv", "green"])
    p.add_argument("--base", help="base vertex tid:a:b")
    p.add_argument("--method", choices=["residue", "quadrature"], default="residue")
    p.add_argument("--cross-check", action="store_true", help="compare with contour quadrature")
    p.set_defaults(func=cmd_kernel)

    p = sub.add_parser("detlog", help="normalized log-determinant report")
    _common(p)
    p.set_defaults(func=cmd_detlog)

    p = sub.add_parser("thermo", help="thermodynamic report")
    _common(p)
    p.set_defaults(func=cmd_thermo)

    p = sub.add_parser("oracle", help="independent oracles")
    _common(p)
    p.add_argument("which", choices=["bloch"])
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("finite", help="finite dimer model on a box or polygon")
    _common(p)
    p.add_argument("--box", type=int)
    p.add_argument("--polygon", help="JSON list of [x, y] corners")
    p.add_argument("--edges", help="JSON list of [[w tid,a,b],[b tid,a,b]] pairs")
    p.set_defaults(func=cmd_finite)

    p = sub.add_parser("optimize", help="maximize log det1 over rhombus angles")
    _common(p)
    p.add_argument("--starts", type=int, default=0, help="random feasible starts (ISORADIAL_SEED)")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("daf", help="discrete analytic or harmonic function from a measure")
    _common(p)
    p.add_argument("--measure", help="JSON list of [re, im, c_re, c_im] or a file")
    p.add_argument("--base", help="base vertex tid:a:b")
    p.add_argument("--harmonic", action="store_true")
    p.set_defaults(func=cmd_daf)

    p = sub.add_parser("perturb", help="perturbed embedding as SVG")
    _common(p)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--measure")
    p.add_argument("--base")
    p.add_argument("--dbar-inv", action="store_true", help="perturb by dbar^{-1}(base, .)")
    p.add_argument("--windings", type=int, default=0)
    p.set_defaults(func=cmd_perturb)
    return parser


def run(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError(parser.format_usage() + "isoradial: error: a subcommand is required")
        return args.func(Run(argv, args), args)
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_USAGE
    except IsoradialError as exc:
        sys.stderr.write(f"{type(exc).__name__}: {exc}\n")
        return EXIT_INVALID
    except OSError as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_INVALID


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
