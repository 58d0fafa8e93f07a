"""
Command-line interface for dstruct-tools.
"""

import json
import logging
import sys
from typing import Any, List, Optional

import click

from .core import DStructTools, read_json
from .exceptions import BudgetExceededError, DStructToolsError, ValidationError
from . import graph as graphs


def _jsonable(value: Any) -> Any:
    if hasattr(value, "to_json"):
        return value.to_json()
    if isinstance(value, (set, tuple)):
        return list(value)
    return str(value)


def _dump(data: Any) -> str:
    return json.dumps(data, indent=2, sort_keys=True, default=_jsonable)


def _int_list(text: Optional[str]) -> Optional[List[int]]:
    if text is None:
        return None
    try:
        return [int(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError:
        raise click.BadParameter(f"expected a comma-separated list of integers, got {text!r}")


def _fail(e: Exception) -> None:
    if isinstance(e, BudgetExceededError):
        click.echo(_dump({"error": str(e), "partial": e.partial}))
    click.echo(f"Error: {e}", err=True)
    sys.exit(1)


def _tools(ctx: click.Context) -> DStructTools:
    obj = ctx.obj
    return DStructTools(obj["data_dir"], workers=obj["workers"], seed=obj["seed"])


@click.group()
@click.version_option()
@click.option("--data-dir", help="Directory for modular polynomial tables")
@click.option("-v", "--verbose", count=True, help="Log progress to stderr (-vv for debug output)")
@click.option("--seed", type=int, default=0, show_default=True, help="Seed for every random choice")
@click.option("--workers", type=int, default=1, show_default=True, help="Worker threads")
@click.option("--budget-steps", type=int, help="Step budget for random walks")
@click.option("--budget-seconds", type=float, help="Wall-clock budget for random walks")
@click.pass_context
def main(ctx, data_dir, verbose, seed, workers, budget_steps, budget_seconds):
    """dstruct-tools - (d, eps)-structures on supersingular curves."""
    level = logging.WARNING if verbose == 0 else logging.INFO if verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    ctx.ensure_object(dict)
    ctx.obj.update(
        data_dir=data_dir,
        seed=seed,
        workers=workers,
        budget_steps=budget_steps,
        budget_seconds=budget_seconds,
    )


# -- graphs -----------------------------------------------------------------


@main.group()
def graph():
    """Build and check structure graphs."""
    pass


@graph.command("build")
@click.option("--d", "d", type=int, required=True, help="Structure degree")
@click.option("--eps", type=click.Choice(["1", "-1"]), default="1", show_default=True)
@click.option("--p", "p", type=int, required=True, help="Characteristic")
@click.option("--primes", default="2", show_default=True, help="Edge degrees, comma separated")
@click.option("--method", type=click.Choice(["auto", "enumerate", "orbit"]), default="auto", show_default=True)
@click.option("--format", "fmt", type=click.Choice(["json", "dot", "text"]), default="json", show_default=True)
@click.option("--output", type=click.Path(dir_okay=False, writable=True), help="Write to a file instead of stdout")
@click.pass_context
def graph_build(ctx, d, eps, p, primes, method, fmt, output):
    """Build the graph of (d, eps)-structures over F_p^2."""
    try:
        tools = _tools(ctx)
        G = tools.build_graph(d, int(eps), p, _int_list(primes), method)
        if fmt == "text":
            text = graphs.summary(G)
        elif fmt == "json":
            data = G.to_json()
            data["meta"]["provenance"] = tools.provenance(p=p, d=d, eps=int(eps))
            text = _dump(data)
        else:
            text = graphs.export(G, fmt)
        if output:
            with open(output, "w") as f:
                f.write(text + "\n")
            click.echo(f"Wrote {len(G)} vertices to {output}", err=True)
        else:
            click.echo(text)
    except DStructToolsError as e:
        _fail(e)


@graph.command("verify")
@click.argument("graph_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--json", "json_output", is_flag=True, help="Output in JSON format")
@click.pass_context
def graph_verify(ctx, graph_file, json_output):
    """Check a graph file against the counting and degree rules."""
    try:
        tools = _tools(ctx)
        G = tools.load_graph(graph_file)
        report = tools.verify_graph(G)
        if json_output:
            data = report.to_json()
            data["provenance"] = tools.provenance(p=G.p, d=G.d, eps=G.eps)
            click.echo(_dump(data))
        else:
            for name, ok in sorted(report.checks.items()):
                click.echo(f"  {name}: {'ok' if ok else 'FAILED'}")
            for name, detail in sorted(report.details.items()):
                click.echo(f"    {name}: {json.dumps(detail, sort_keys=True)}")
        if not report.ok:
            sys.exit(1)
    except (DStructToolsError, ValueError) as e:
        _fail(e)


@main.command("enumerate")
@click.option("--d", "d", type=int, required=True)
@click.option("--eps", type=click.Choice(["1", "-1"]), default="1", show_default=True)
@click.option("--p", "p", type=int, required=True)
@click.option("--json", "json_output", is_flag=True, help="Output in JSON format")
@click.pass_context
def enumerate_cmd(ctx, d, eps, p, json_output):
    """List every (d, eps)-structure over F_p^2 up to isomorphism."""
    try:
        tools = _tools(ctx)
        found = tools.enumerate(d, int(eps), p)
        if json_output:
            click.echo(_dump({"structures": found, "count": len(found), "provenance": tools.provenance(p=p, d=d, eps=int(eps))}))
        else:
            for item in found:
                click.echo(f"{item['label']:>24}  {item['class']:<3}  j={item['j']}")
            click.echo(f"{len(found)} structures")
    except DStructToolsError as e:
        _fail(e)


# -- key exchange -----------------------------------------------------------


@main.command()
@click.option("--p", "p", type=int, required=True)
@click.option("--d", "d", type=int, required=True)
@click.option("--eps", type=click.Choice(["1", "-1"]), default="1", show_default=True)
@click.option("--primes", required=True, help="Split primes for the action, comma separated")
@click.option("--lambda-sec", type=int, default=8, show_default=True, help="Target security bits")
@click.option("--bound", type=int, help="Exponent bound B (default: least B meeting the keyspace rule)")
@click.option("--shared-secret", type=click.Choice(["orbit", "j"]), help="Shared secret canonicalization")
@click.option("--output", type=click.Path(dir_okay=False, writable=True), help="Params file to write")
@click.pass_context
def params(ctx, p, d, eps, primes, lambda_sec, bound, shared_secret, output):
    """Generate a parameter set."""
    try:
        tools = _tools(ctx)
        sp = tools.make_params(
            p, d, int(eps), _int_list(primes), lambda_sec=lambda_sec, bound=bound, shared_secret=shared_secret
        )
        data = sp.to_json()
        data["params_id"] = sp.params_id
        text = _dump(data)
        if output:
            with open(output, "w") as f:
                f.write(text + "\n")
            click.echo(f"Wrote parameters {sp.params_id[:16]} to {output}", err=True)
        else:
            click.echo(text)
    except DStructToolsError as e:
        _fail(e)


@main.command()
@click.option("--params", "params_file", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--secret", "secret_file", type=click.Path(dir_okay=False, writable=True), help="Secret key file to write")
@click.option("--public", "public_file", type=click.Path(dir_okay=False, writable=True), help="Public key file to write")
@click.pass_context
def keygen(ctx, params_file, secret_file, public_file):
    """Generate a key pair from --seed."""
    try:
        tools = _tools(ctx)
        sp = tools.load_params(params_file)
        pair = tools.keygen(sp)
        secret = pair.secret_json(sp)
        public = pair.public_json(sp)
        if secret_file:
            with open(secret_file, "w") as f:
                f.write(_dump(secret) + "\n")
        if public_file:
            with open(public_file, "w") as f:
                f.write(_dump(public) + "\n")
        if not (secret_file or public_file):
            click.echo(_dump(secret))
        else:
            click.echo(_dump({"params_id": sp.params_id, "pk": public["pk"], "seed": tools.seed}))
    except (DStructToolsError, OSError, ValueError) as e:
        _fail(e)


@main.command()
@click.option("--params", "params_file", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--alice", "secret_file", type=click.Path(exists=True, dir_okay=False), required=True, help="Own secret key file")
@click.option("--bob", "public_file", type=click.Path(exists=True, dir_okay=False), required=True, help="Peer public key file")
@click.pass_context
def exchange(ctx, params_file, secret_file, public_file):
    """Derive the shared secret from an own secret key and a peer public key."""
    try:
        tools = _tools(ctx)
        sp = tools.load_params(params_file)
        secret = tools.exchange(sp, read_json(secret_file), read_json(public_file))
        click.echo(_dump({"params_id": sp.params_id, "shared_secret": secret, "seed": tools.seed}))
    except ValidationError as e:
        click.echo(f"Error: {e} (check: {e.check})", err=True)
        sys.exit(1)
    except (DStructToolsError, OSError, ValueError) as e:
        _fail(e)


@main.command()
@click.option("--params", "params_file", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--key", "public_file", type=click.Path(exists=True, dir_okay=False), required=True, help="Public key file")
@click.option("--json", "json_output", is_flag=True, help="Output in JSON format")
@click.pass_context
def validate(ctx, params_file, public_file, json_output):
    """Check a public key; exits 1 when it is rejected."""
    try:
        tools = _tools(ctx)
        sp = tools.load_params(params_file)
        report = tools.validate(sp, read_json(public_file))
        if json_output:
            data = report.to_json()
            data["params_id"] = sp.params_id
            click.echo(_dump(data))
        else:
            for name, ok in report.checks.items():
                click.echo(f"  {name}: {'ok' if ok else 'FAILED'}")
            click.echo("valid" if report else f"rejected at {report.failed}: {report.message}")
        if not report:
            sys.exit(1)
    except (DStructToolsError, OSError, ValueError) as e:
        _fail(e)


# -- navigation -------------------------------------------------------------


@main.command()
@click.option("--d1", type=int, required=True)
@click.option("--d2", type=int, required=True)
@click.option("--p", "p", type=int, required=True)
@click.option("--eps", type=click.Choice(["1", "-1"]), default="1", show_default=True)
@click.option("--json", "json_output", is_flag=True, help="Output in JSON format")
@click.pass_context
def crossroads(ctx, d1, d2, p, eps, json_output):
    """Curves carrying a d1- and a d2-structure at once."""
    try:
        tools = _tools(ctx)
        found = tools.crossroads(d1, d2, p, int(eps))
        if json_output:
            click.echo(_dump({"crossroads": found, "count": len(found), "provenance": tools.provenance(p=p, d1=d1, d2=d2, eps=int(eps))}))
        else:
            for c in found:
                counts = ", ".join(f"{len(ws)} of degree {d}" for d, ws in sorted(c.witnesses.items()))
                click.echo(f"j={c.j}: {counts}")
            click.echo(f"{len(found)} crossroads")
    except DStructToolsError as e:
        _fail(e)


@main.command()
@click.option("--p", "p", type=int, required=True)
@click.option("--j1", help="Start j-invariant as 'a' or 'a+b*s' (random if omitted)")
@click.option("--j2", help="Target j-invariant (random if omitted)")
@click.option("--degrees", default="1", show_default=True, help="Structure degrees, comma separated")
@click.option("--eps", type=click.Choice(["1", "-1"]), default="1", show_default=True)
@click.option("--ell", type=int, default=2, show_default=True, help="Degree of the walk steps")
@click.pass_context
def pathfind(ctx, p, j1, j2, degrees, eps, ell):
    """Find an isogeny path between two supersingular curves."""
    try:
        tools = _tools(ctx)
        result = tools.pathfind(
            p,
            j1,
            j2,
            _int_list(degrees),
            int(eps),
            ell,
            max_steps=ctx.obj["budget_steps"],
            max_seconds=ctx.obj["budget_seconds"],
        )
        result["provenance"] = tools.provenance(p=p, degrees=_int_list(degrees), eps=int(eps))
        click.echo(_dump(result))
    except (DStructToolsError, ValueError) as e:
        _fail(e)


@main.command("sidh-check")
@click.option("--p-expr", default="2**216*3**137-1", show_default=True, help="Prime as an expression")
@click.option("--j", "j", type=int, default=287496, show_default=True, help="Start j-invariant in F_p")
@click.option("--degrees", help="Candidate degrees (default: configured levels)")
@click.pass_context
def sidh_check(ctx, p_expr, j, degrees):
    """Degrees d for which the start curve carries a d-structure."""
    try:
        tools = _tools(ctx)
        found = tools.sidh_check(p_expr, j, _int_list(degrees))
        click.echo(_dump({"degrees": found, "p_expr": p_expr, "j": j, "provenance": tools.provenance()}))
    except DStructToolsError as e:
        _fail(e)


@main.command()
@click.option("--d", "d", type=int, required=True)
@click.option("--p", "p", type=int, required=True)
@click.pass_context
def kappa(ctx, d, p):
    """Ratio of the number of d-structures to 1-structures (estimated for large p)."""
    try:
        tools = _tools(ctx)
        click.echo(_dump(tools.kappa(d, p)))
    except DStructToolsError as e:
        _fail(e)


@main.command("hit-rate")
@click.option("--d", "d", type=int, required=True)
@click.option("--p", "p", type=int, required=True)
@click.option("--walks", type=int, default=20, show_default=True)
@click.option("--length", type=int, default=20, show_default=True)
@click.pass_context
def hit_rate(ctx, d, p, walks, length):
    """Share of distinguished vertices met by random 2-walks."""
    try:
        tools = _tools(ctx)
        report = tools.hit_rate(d, p, walks, length).to_json()
        report["seed"] = tools.seed
        click.echo(_dump(report))
    except DStructToolsError as e:
        _fail(e)


@main.command()
@click.option("--json", "json_output", is_flag=True, help="Output in JSON format")
@click.pass_context
def selftest(ctx, json_output):
    """Cross-check the library against brute-force oracles."""
    try:
        tools = _tools(ctx)
        results = tools.selftest()
        if json_output:
            click.echo(_dump({"checks": results, "seed": tools.seed}))
        else:
            for name, result in results.items():
                status_str = "✓" if result["ok"] else "✗"
                click.echo(f"  {status_str} {name}: {result['detail']}")
        if not all(r["ok"] for r in results.values()):
            sys.exit(1)
    except DStructToolsError as e:
        _fail(e)


# -- tables -----------------------------------------------------------------


@main.group()
def tables():
    """Manage modular polynomial tables."""
    pass


@tables.command("status")
@click.option("--json", "json_output", is_flag=True, help="Output in JSON format")
@click.pass_context
def tables_status(ctx, json_output):
    """Show which levels are cached or computable."""
    try:
        status_info = _tools(ctx).tables_status()
        if json_output:
            click.echo(_dump(status_info))
        else:
            click.echo(f"Data Directory: {status_info['data_dir']}")
            click.echo("\nLevels:")
            for m, info in status_info["levels"].items():
                status_str = "✓ Cached" if info["cached"] else "✓ Computable" if info["available"] else "✗ Missing"
                click.echo(f"  Phi_{m}: {status_str}")
    except DStructToolsError as e:
        _fail(e)


@tables.command("fetch")
@click.argument("levels", nargs=-1, type=int, required=True)
@click.option("--force", is_flag=True, help="Download again even if present")
@click.pass_context
def tables_fetch(ctx, levels, force):
    """Download extended tables for the given levels."""
    try:
        for m, path in _tools(ctx).tables_fetch(levels, force).items():
            click.echo(f"Phi_{m} stored at {path}")
    except DStructToolsError as e:
        _fail(e)


@tables.command("clear")
@click.pass_context
def tables_clear(ctx):
    """Remove cached and downloaded tables."""
    try:
        removed = _tools(ctx).tables_clear()
        click.echo(f"Removed {len(removed)} files")
    except (DStructToolsError, OSError) as e:
        _fail(e)


if __name__ == "__main__":
    main()
