"""Command-line front end.

Subcommands map one-to-one onto the library surface: ``bound`` (graph
bounds from a network JSON), ``svd-deriv`` (singular-value Jacobian and
Hessian), ``activation``, ``fourier``, ``dynamics`` and ``shapley``.
Human-readable reports go to stdout; machine outputs are written only via
--out style flags. All floats are emitted with 17 significant digits so
files round-trip losslessly.

Exit codes: 2 parse/validation, 3 graph structure, 4 degenerate spectrum,
5 other numeric failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import activations, dynamics, fourlip, netbounds, specgame, svdcalc
from .errors import (
    CycleDetected,
    DegenerateSpectrum,
    GraphInvalid,
    LipkitError,
    NotAPath,
    UnknownActivation,
    ZeroSingular,
)
from .matcore import DenseMatrix, full_svd, load_matrix_csv, save_matrix_csv

EXIT_PARSE = 2
EXIT_GRAPH = 3
EXIT_DEGENERATE = 4
EXIT_NUMERIC = 5


def _fmt(x):
    return format(float(x), ".17g")


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------------------
# network JSON
# ---------------------------------------------------------------------------

def _activation_from_json(value, node_id):
    if isinstance(value, str):
        return activations.make_activation(value)
    if isinstance(value, dict):
        try:
            return activations.make_activation(
                value["name"],
                alpha=float(value.get("alpha", 1.0)),
                dim=int(value.get("dim", 0)),
            )
        except KeyError:
            raise CliError(f"node {node_id!r}: activation object needs a 'name'", EXIT_PARSE)
    raise CliError(f"node {node_id!r}: activation must be a name or object", EXIT_PARSE)


def load_network_json(path) -> netbounds.NetworkGraph:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}", EXIT_PARSE)
    except OSError as exc:
        raise CliError(f"{path}: {exc}", EXIT_PARSE)

    matrices = {}
    for ref, spec in (doc.get("matrices") or {}).items():
        for key in ("rows", "cols", "data"):
            if key not in spec:
                raise CliError(f"matrix {ref!r}: missing field {key!r}", EXIT_PARSE)
        try:
            matrices[ref] = DenseMatrix.from_flat(
                int(spec["rows"]), int(spec["cols"]), spec["data"]
            )
        except ValueError as exc:
            raise CliError(f"matrix {ref!r}: {exc}", EXIT_PARSE)

    def resolve(node_id, value):
        if isinstance(value, str):
            if value not in matrices:
                raise CliError(
                    f"node {node_id!r}: parameter matrix {value!r} not in 'matrices'",
                    EXIT_PARSE,
                )
            return matrices[value]
        return value

    nodes = []
    for entry in doc.get("nodes", []):
        if "id" not in entry or "kind" not in entry:
            raise CliError("every node needs 'id' and 'kind' fields", EXIT_PARSE)
        nid, kind = entry["id"], entry["kind"]
        kwargs = {}
        if kind == "linear":
            kwargs["weight_ref"] = entry.get("weight_ref")
        elif kind == "activation":
            kwargs["activation"] = _activation_from_json(entry.get("activation"), nid)
        elif kind == "scalar_lip":
            kwargs["lip"] = entry.get("lip")
        elif kind == "residual_group":
            kwargs["inner_lip"] = entry.get("inner_lip")
        elif kind == "attention":
            kwargs["attention_kind"] = entry.get("attention_kind")
            params = dict(entry.get("params") or {})
            if "heads" in params:
                params["heads"] = [
                    (resolve(nid, q), resolve(nid, v)) for q, v in params["heads"]
                ]
            params = {k: resolve(nid, v) for k, v in params.items()}
            kwargs["attention_params"] = params
        try:
            nodes.append(netbounds.Node(id=nid, kind=kind, **kwargs))
        except (GraphInvalid, UnknownActivation) as exc:
            raise CliError(str(exc), EXIT_PARSE)

    try:
        return netbounds.NetworkGraph(
            nodes,
            [tuple(e) for e in doc.get("edges", [])],
            matrices=matrices,
            source=doc.get("source"),
            sink=doc.get("sink"),
        )
    except CycleDetected:
        raise
    except GraphInvalid as exc:
        raise CliError(str(exc), EXIT_PARSE)


def cmd_bound(args):
    g = load_network_json(args.net)
    lips = netbounds.all_node_lips(
        g, spectral=args.spectral, iters=args.iters, seed=args.seed
    )
    per_node_s = None
    if args.method == "product":
        chain = g.topo_order
        bound = netbounds.product_bound(chain, g, lips=lips)
    elif args.method == "dag":
        res = netbounds.dag_bound(g, lips=lips)
        bound, per_node_s = res.bound, res.per_node_s
    else:
        res = netbounds.articulation_bound(g, lips=lips)
        bound = res.bound
        print("cut_vertices:", ",".join(res.cut_vertices) or "(none)")
        print("subdag_bounds:", " ".join(_fmt(b) for b in res.subdag_bounds))
    print(f"bound = {_fmt(bound)}")
    for nid in g.topo_order:
        nl = lips[nid]
        line = f"node {nid} lip={_fmt(nl.lip)} provenance={nl.provenance}"
        if nl.provenance == "power_iteration":
            line += f" iters={nl.iterations} seed={nl.seed}"
        if per_node_s is not None:
            line += f" S={_fmt(per_node_s[nid])}"
        print(line)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write("node,lip,provenance,S\n")
            for nid in g.topo_order:
                s_val = _fmt(per_node_s[nid]) if per_node_s is not None else ""
                fh.write(f"{nid},{_fmt(lips[nid].lip)},{lips[nid].provenance},{s_val}\n")
    return 0


def cmd_svd_deriv(args):
    mat = load_matrix_csv(args.matrix)
    svd = full_svd(mat)
    if args.order == 1:
        result = svdcalc.sv_jacobian(svd, args.k)
    else:
        result = svdcalc.sv_hessian(svd, args.k)
    for i in range(result.rows):
        print(",".join(_fmt(x) for x in result.array[i, :]))
    if args.check_fd:
        if args.order == 1:
            fd = svdcalc.fd_gradient_oracle(mat, args.k, step=args.step)
            dev = float(np.max(np.abs(result.array - fd.array)))
        else:
            dev = _hessian_fd_deviation(mat, args.k, result, step=args.step)
        print(f"max_abs_deviation = {_fmt(dev)}")
    if args.out:
        save_matrix_csv(args.out, result)
    return 0


def _hessian_fd_deviation(mat, k, hess, step):
    m, n = mat.shape
    base = np.array(mat.array)
    fd = np.empty((m * n, m * n))
    for col in range(m * n):
        i, j = col % m, col // m
        bumped = base.copy()
        bumped[i, j] += step
        up = svdcalc.sv_jacobian(full_svd(DenseMatrix(bumped)), k).array
        bumped[i, j] -= 2 * step
        down = svdcalc.sv_jacobian(full_svd(DenseMatrix(bumped)), k).array
        fd[:, col] = ((up - down) / (2 * step)).ravel(order="F")
    return float(np.max(np.abs(hess.array - fd)))


def cmd_activation(args):
    spec = activations.make_activation(args.name, alpha=args.alpha, dim=args.dim or 2)
    value = activations.closed_form_lipschitz(spec)
    print(f"{args.name} {_fmt(value)}")
    if args.numeric:
        if args.name == "softmax":
            est = activations.numeric_softmax_lipschitz(
                args.dim or 2, restarts=args.restarts, seed=args.seed
            )
            print(f"numeric {_fmt(est)}")
        else:
            res = activations.numeric_scalar_lipschitz(
                spec, domain=(args.domain[0], args.domain[1]), grid=args.grid
            )
            print(f"numeric {_fmt(res.value)} attained={res.attained}")
    return 0


def _parse_vector(text, label):
    try:
        return np.array([float(tok) for tok in text.split(",")])
    except ValueError:
        raise CliError(f"--{label}: expected comma-separated numbers, got {text!r}", EXIT_PARSE)


def cmd_fourier(args):
    sig = fourlip.load_signal_csv(args.signal)
    did = False
    if args.bound:
        print(f"spectral_bound = {_fmt(fourlip.spectral_lipschitz_bound(sig))}")
        print(f"grid_sup = {_fmt(fourlip.grid_gradient_sup(sig))}")
        did = True
    if args.band_center is not None:
        center = _parse_vector(args.band_center, "band-center")
        if args.band_radius is None:
            raise CliError("--band-center needs --band-radius", EXIT_PARSE)
        perturbed, eps = fourlip.band_remove(sig, center, args.band_radius)
        bound = fourlip.band_bound(sig, center, args.band_radius, eps)
        sup = float(np.max(np.abs(sig.samples - perturbed.samples)))
        print(f"eps = {_fmt(eps)}")
        print(f"band_bound = {_fmt(bound)}")
        print(f"sup_diff = {_fmt(sup)}")
        if bound > 0:
            print(f"ratio = {_fmt(sup / bound)}")
        did = True
    rows = None
    if args.esd is not None:
        if args.snr:
            noise = fourlip.load_signal_csv(args.snr)
            values = fourlip.snr(sig, noise, args.esd)
            label = "snr"
        else:
            values = fourlip.radial_esd(sig, args.esd)
            label = "esd"
        rows = [(ring, val) for ring, val in enumerate(values)]
        for ring, val in rows:
            print(f"{label}[{ring}] = {_fmt(val)}")
        did = True
    if args.direction is not None:
        direction = _parse_vector(args.direction, "direction")
        ts = _parse_vector(args.t_grid or "0", "t")
        vals = fourlip.directional_transform(sig, direction, ts)
        for t, v in zip(ts, vals):
            print(f"t={_fmt(t)} re={_fmt(v.real)} im={_fmt(v.imag)}")
        did = True
    if not did:
        raise CliError("nothing to do: pass --bound, --band-center, --esd or --direction", EXIT_PARSE)
    if args.out and rows is not None:
        with open(args.out, "w") as fh:
            fh.write("ring_index,value\n")
            for ring, val in rows:
                fh.write(f"{ring},{_fmt(val)}\n")
    return 0


def cmd_dynamics(args):
    theta = load_matrix_csv(args.matrix)
    grad_mat = load_matrix_csv(args.grad)
    if grad_mat.shape != theta.shape:
        raise CliError(
            f"--grad shape {grad_mat.shape} must match --matrix shape {theta.shape}",
            EXIT_PARSE,
        )
    cov = load_matrix_csv(args.cov)
    from .matcore import vec as _vec

    state = dynamics.LayerDynamicsState.create(theta, _vec(grad_mat), cov, args.eta)
    forces = dynamics.driving_forces(state)
    print(f"sigma1 = {_fmt(state.sigma1)}")
    print(f"mu = {_fmt(forces.mu)}")
    print(f"kappa = {_fmt(forces.kappa)}")
    print(f"lambda_norm = {_fmt(np.linalg.norm(forces.lam))}")
    if args.traj_out:
        traj = dynamics.euler_maruyama(
            state,
            dt=args.dt,
            steps=args.steps,
            seed=args.seed,
            store_every=args.store_every,
        )
        rows = dynamics.trajectory_stats(
            traj, args.steps, state.grad, cov, args.eta, store_every=args.store_every
        )
        with open(args.traj_out, "w") as fh:
            fh.write("step,sigma1,Z,mu,kappa,lambda_norm\n")
            for step, sigma1, z, mu, kappa, lam_norm in rows:
                fh.write(
                    f"{step},{_fmt(sigma1)},{_fmt(z)},"
                    f"{_fmt(mu)},{_fmt(kappa)},{_fmt(lam_norm)}\n"
                )
        print(f"trajectory written to {args.traj_out}")
    return 0


def cmd_shapley(args):
    game = specgame.load_game_csv(args.game, n_players=args.players)
    if args.mc_perms:
        psi, err_bound = specgame.shapley_mc(
            lambda mask: game.values[mask], game.n_players, args.mc_perms, seed=args.seed
        )
        print(f"err_bound = {_fmt(err_bound)}")
    else:
        psi = specgame.shapley_exact(game)
    for i, val in enumerate(psi):
        print(f"psi[{i}] = {_fmt(val)}")
    print(f"efficiency = {_fmt(psi.sum())}")
    if args.score:
        beta = _parse_vector(args.beta, "beta") if args.beta else None
        print(f"score = {_fmt(specgame.importance_score(psi, beta))}")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write("player,psi\n")
            for i, val in enumerate(psi):
                fh.write(f"{i},{_fmt(val)}\n")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="lipkit",
        description="Certified Lipschitz bounds and spectral calculus toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bound", help="Lipschitz bound of a network JSON file")
    p.add_argument("--net", required=True, help="network JSON file")
    p.add_argument("--method", choices=("product", "dag", "articulation"), default="dag")
    p.add_argument("--spectral", choices=("auto", "full", "power"), default="auto")
    p.add_argument("--iters", type=int, default=100, help="power-iteration count")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="per-node CSV output path")
    p.set_defaults(fn=cmd_bound)

    p = sub.add_parser("svd-deriv", help="singular-value Jacobian / Hessian")
    p.add_argument("--matrix", required=True, help="matrix CSV file")
    p.add_argument("--k", type=int, required=True, help="singular-value index (1-based)")
    p.add_argument("--order", type=int, choices=(1, 2), required=True)
    p.add_argument("--check-fd", action="store_true", dest="check_fd")
    p.add_argument("--step", type=float, default=None, help="finite-difference step")
    p.add_argument("--out", help="write the derivative matrix CSV here")
    p.set_defaults(fn=cmd_svd_deriv)

    p = sub.add_parser("activation", help="activation Lipschitz constants")
    p.add_argument("--name", required=True)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--dim", type=int, default=0, help="softmax dimension")
    p.add_argument("--numeric", action="store_true", help="also run the numerical maximizer")
    p.add_argument("--domain", type=float, nargs=2, default=(-20.0, 20.0))
    p.add_argument("--grid", type=int, default=2048)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_activation)

    p = sub.add_parser("fourier", help="spectral Lipschitz analysis of a signal CSV")
    p.add_argument("--signal", required=True)
    p.add_argument("--bound", action="store_true", help="spectral bound and grid gradient sup")
    p.add_argument("--band-center", dest="band_center", help="comma-separated frequency")
    p.add_argument("--band-radius", dest="band_radius", type=float)
    p.add_argument("--esd", type=int, help="number of radial rings")
    p.add_argument("--snr", help="noise signal CSV (with --esd)")
    p.add_argument("--direction", help="unit direction, comma-separated")
    p.add_argument("--t", dest="t_grid", help="comma-separated t values for --direction")
    p.add_argument("--out", help="ring CSV output path")
    p.set_defaults(fn=cmd_fourier)

    p = sub.add_parser("dynamics", help="driving forces and trajectory simulation")
    p.add_argument("--matrix", required=True, help="layer matrix CSV")
    p.add_argument("--grad", required=True, help="loss-gradient matrix CSV (same shape)")
    p.add_argument("--cov", required=True, help="noise covariance CSV (mn x mn)")
    p.add_argument("--eta", type=float, required=True, help="learning rate")
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--store-every", dest="store_every", type=int, default=1)
    p.add_argument("--traj-out", dest="traj_out", help="trajectory CSV output path")
    p.set_defaults(fn=cmd_dynamics)

    p = sub.add_parser("shapley", help="Shapley values of a coalition game table")
    p.add_argument("--game", required=True, help="game CSV of (bitmask, value) rows")
    p.add_argument("--players", type=int, default=None)
    p.add_argument("--mc-perms", dest="mc_perms", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--score", action="store_true")
    p.add_argument("--beta", help="comma-separated nonnegative weights")
    p.add_argument("--out", help="per-player psi CSV output path")
    p.set_defaults(fn=cmd_shapley)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "step", None) is None and args.command == "svd-deriv":
        args.step = 1e-6 if args.order == 1 else 1e-5
    try:
        return args.fn(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (CycleDetected, NotAPath) as exc:
        print(f"graph error: {exc}", file=sys.stderr)
        return EXIT_GRAPH
    except (DegenerateSpectrum, ZeroSingular) as exc:
        msg = f"degenerate spectrum: {exc}"
        if isinstance(exc, DegenerateSpectrum) and exc.gap is not None:
            msg += f" (gap = {exc.gap:.6e})"
        print(msg, file=sys.stderr)
        return EXIT_DEGENERATE
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except LipkitError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
